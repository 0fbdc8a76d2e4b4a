use serde::{Deserialize, Serialize};

use super::AssignmentError;
use crate::Vec3;

/// Cost of leaving a track without a detection. Infinite means ungated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Uniform(f64),
    PerTrack(Vec<f64>),
}

impl Gate {
    pub fn ungated() -> Self {
        Gate::Uniform(f64::INFINITY)
    }

    fn resolve(&self, n: usize) -> Result<Vec<f64>, AssignmentError> {
        let gates = match self {
            Gate::Uniform(d) => vec![*d; n],
            Gate::PerTrack(ds) => {
                if ds.len() != n {
                    return Err(AssignmentError::ShapeMismatch(format!(
                        "{} gates for {n} tracks",
                        ds.len()
                    )));
                }
                ds.clone()
            }
        };
        if let Some(d) = gates.iter().find(|d| d.is_nan() || **d <= 0.0) {
            return Err(AssignmentError::NonFiniteInput(format!("gate must be positive, got {d}")));
        }
        Ok(gates)
    }
}

/// The block cost matrix of a gated frame-to-frame association.
///
/// Logically `n × (m + n)`: the first `m` columns hold track-to-detection
/// costs, column `m + i` holds gate `d_i` for track `i`, and every other
/// entry of the gate block is `+∞`. Only the `n × m` block and the gate
/// vector are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    m: usize,
    block: Vec<f64>,
    gates: Vec<f64>,
}

impl CostMatrix {
    /// Builds a matrix from a row-major `n × m` block. Entries must be
    /// non-negative or `+∞`.
    pub fn new(n: usize, m: usize, block: Vec<f64>, gates: Vec<f64>) -> Result<Self, AssignmentError> {
        if block.len() != n * m {
            return Err(AssignmentError::ShapeMismatch(format!(
                "block has {} entries, expected {n} × {m}",
                block.len()
            )));
        }
        let gates = Gate::PerTrack(gates).resolve(n)?;
        if let Some(c) = block.iter().find(|c| c.is_nan() || **c < 0.0) {
            return Err(AssignmentError::NonFiniteInput(format!(
                "costs must be non-negative, got {c}"
            )));
        }
        Ok(Self { n, m, block, gates })
    }

    /// Euclidean distances between tracks and detections; distances beyond a
    /// track's gate become `+∞`.
    pub fn from_positions(tracks: &[Vec3], detections: &[Vec3], gate: &Gate) -> Result<Self, AssignmentError> {
        let finite = |p: &Vec3| p.iter().all(|c| c.is_finite());
        if !tracks.iter().all(finite) || !detections.iter().all(finite) {
            return Err(AssignmentError::NonFiniteInput("non-finite position".into()));
        }
        let n = tracks.len();
        let m = detections.len();
        let gates = gate.resolve(n)?;
        let mut block = Vec::with_capacity(n * m);
        for (z, d) in tracks.iter().zip(&gates) {
            for o in detections {
                let dist = (z - o).norm();
                block.push(if dist > *d { f64::INFINITY } else { dist });
            }
        }
        Ok(Self { n, m, block, gates })
    }

    pub fn n_tracks(&self) -> usize {
        self.n
    }

    pub fn n_detections(&self) -> usize {
        self.m
    }

    pub fn entry(&self, track: usize, detection: usize) -> f64 {
        self.block[track * self.m + detection]
    }

    pub fn row(&self, track: usize) -> &[f64] {
        &self.block[track * self.m..(track + 1) * self.m]
    }

    pub fn gate(&self, track: usize) -> f64 {
        self.gates[track]
    }

    pub fn gates(&self) -> &[f64] {
        &self.gates
    }

    /// Entry of the logical `n × (m + n)` matrix.
    pub fn augmented_entry(&self, track: usize, column: usize) -> f64 {
        if column < self.m {
            self.entry(track, column)
        } else if column - self.m == track {
            self.gates[track]
        } else {
            f64::INFINITY
        }
    }

    /// Multiplies every finite cost and gate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite());
        Self {
            n: self.n,
            m: self.m,
            block: self.block.iter().map(|c| c * factor).collect(),
            gates: self.gates.iter().map(|d| d * factor).collect(),
        }
    }

    /// Sum of the selected entries plus the gate of every unassigned track.
    pub fn assignment_cost(&self, track_to_detection: &[Option<usize>]) -> f64 {
        track_to_detection
            .iter()
            .enumerate()
            .map(|(i, j)| match j {
                Some(j) => self.entry(i, *j),
                None => self.gates[i],
            })
            .sum()
    }
}
