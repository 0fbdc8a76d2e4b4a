use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::AssignmentError;

/// User-verified corrections applied to a re-solve.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pinned: BTreeSet<(usize, usize)>,
    forbidden: BTreeSet<(usize, usize)>,
    forced_unassigned: BTreeSet<usize>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty() && self.forbidden.is_empty() && self.forced_unassigned.is_empty()
    }

    pub fn pin(&mut self, track: usize, detection: usize) -> &mut Self {
        self.pinned.insert((track, detection));
        self
    }

    pub fn forbid(&mut self, track: usize, detection: usize) -> &mut Self {
        self.forbidden.insert((track, detection));
        self
    }

    pub fn force_unassigned(&mut self, track: usize) -> &mut Self {
        self.forced_unassigned.insert(track);
        self
    }

    pub fn unpin(&mut self, track: usize, detection: usize) -> bool {
        self.pinned.remove(&(track, detection))
    }

    pub fn unforbid(&mut self, track: usize, detection: usize) -> bool {
        self.forbidden.remove(&(track, detection))
    }

    pub fn pinned(&self) -> &BTreeSet<(usize, usize)> {
        &self.pinned
    }

    pub fn forbidden(&self) -> &BTreeSet<(usize, usize)> {
        &self.forbidden
    }

    pub fn forced_unassigned(&self) -> &BTreeSet<usize> {
        &self.forced_unassigned
    }

    /// Pins every pair of a complete assignment.
    pub fn pin_all(track_to_detection: &[Option<usize>]) -> Self {
        let mut set = Self::new();
        for (i, j) in track_to_detection.iter().enumerate() {
            match j {
                Some(j) => set.pin(i, *j),
                None => set.force_unassigned(i),
            };
        }
        set
    }

    pub fn validate(&self, n_tracks: usize, n_detections: usize) -> Result<(), AssignmentError> {
        let out_of_range = |i: usize, j: Option<usize>| {
            i >= n_tracks || j.is_some_and(|j| j >= n_detections)
        };
        for &(i, j) in self.pinned.iter().chain(&self.forbidden) {
            if out_of_range(i, Some(j)) {
                return Err(AssignmentError::IndexOutOfRange { track: i, detection: Some(j) });
            }
        }
        for &i in &self.forced_unassigned {
            if out_of_range(i, None) {
                return Err(AssignmentError::IndexOutOfRange { track: i, detection: None });
            }
        }
        let mut tracks = BTreeSet::new();
        let mut detections = BTreeSet::new();
        for &(i, j) in &self.pinned {
            if !tracks.insert(i) {
                return Err(AssignmentError::InfeasibleConstraints(format!(
                    "track {i} is pinned to more than one detection"
                )));
            }
            if !detections.insert(j) {
                return Err(AssignmentError::InfeasibleConstraints(format!(
                    "detection {j} is pinned to more than one track"
                )));
            }
            if self.forbidden.contains(&(i, j)) {
                return Err(AssignmentError::InfeasibleConstraints(format!(
                    "pair ({i}, {j}) is both pinned and forbidden"
                )));
            }
            if self.forced_unassigned.contains(&i) {
                return Err(AssignmentError::InfeasibleConstraints(format!(
                    "track {i} is both pinned and forced unassigned"
                )));
            }
        }
        Ok(())
    }
}
