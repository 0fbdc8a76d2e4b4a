//! Gated frame-to-frame assignment: cost matrix, exact solver, constrained
//! re-solve, and K-best enumeration.

mod constraints;
mod cost;
mod lap;
mod lex;
mod murty;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use constraints::ConstraintSet;
pub use cost::{CostMatrix, Gate};
pub use lap::{solve_constrained, solve_lap};
pub use murty::{murty_k_best, murty_k_best_constrained, KBest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("invalid cost input: {0}")]
    NonFiniteInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("constraint index out of range: track {track}, detection {detection:?}")]
    IndexOutOfRange { track: usize, detection: Option<usize> },
    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),
}

/// A one-to-one map from tracks to detections; `None` means the track took
/// its gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub track_to_detection: Vec<Option<usize>>,
    /// Detections claimed by no track, ascending.
    pub unassigned_detections: Vec<usize>,
    /// Selected entries plus the gate of every unassigned track.
    pub total_cost: f64,
}

impl Assignment {
    pub fn from_tracks(cost: &CostMatrix, track_to_detection: Vec<Option<usize>>) -> Self {
        let mut taken = vec![false; cost.n_detections()];
        for j in track_to_detection.iter().flatten() {
            assert!(!taken[*j], "detection {j} assigned twice");
            taken[*j] = true;
        }
        let unassigned_detections = taken
            .iter()
            .enumerate()
            .filter_map(|(j, t)| (!t).then_some(j))
            .collect();
        let total_cost = cost.assignment_cost(&track_to_detection);
        Self {
            track_to_detection,
            unassigned_detections,
            total_cost,
        }
    }

    pub fn n_tracks(&self) -> usize {
        self.track_to_detection.len()
    }

    pub fn detection_of(&self, track: usize) -> Option<usize> {
        self.track_to_detection[track]
    }

    pub fn matched_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.track_to_detection
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
    }

    pub fn unassigned_tracks(&self) -> impl Iterator<Item = usize> + '_ {
        self.track_to_detection
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.is_none().then_some(i))
    }
}
