//! Seam-cell splines, moving frames, and the straightening remap.
//!
//! Seam-cell midpoints are interpolated by a natural cubic spline whose knots
//! are the cumulative chord lengths between consecutive midpoints; the left
//! and right rows share those knots. Arc length along the midline is tabulated
//! densely and inverted with Newton steps. The moving frame is a
//! rotation-minimizing (double reflection) frame seeded with the left-right
//! axis at the tail, which stays well defined on straight stretches where a
//! Frenet normal does not exist.

mod seam;
pub mod spline;
mod worm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use seam::{PairName, SeamCellFrame, SeamPair};
pub use worm::{Ellipse, MovingFrame, StraightenedCoord, WormSplines, MIN_PAIRS};

use crate::{NucleusRecord, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("at least {MIN_PAIRS} seam pairs are required, found {found}")]
    TooFewPairs { found: usize },
    #[error("consecutive seam midpoints coincide at pair index {index}")]
    DuplicateKnot { index: usize },
    #[error("arc length {s} is outside [0, {length}]")]
    OutOfRange { s: f64, length: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid seam frame: {0}")]
    InvalidSeam(String),
    #[error("invalid geometry config: {0}")]
    InvalidConfig(String),
    #[error("nucleus {index}: {source}")]
    Nucleus {
        index: usize,
        #[source]
        source: Box<GeometryError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Resolution of the arc-length table and of the projection scan.
    pub sample_count: usize,
    /// Dorsoventral to lateral semi-axis ratio of the cross-section.
    pub aspect: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            sample_count: 512,
            aspect: 1.0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.sample_count < 8 {
            return Err(GeometryError::InvalidConfig(format!(
                "sample_count must be at least 8, got {}",
                self.sample_count
            )));
        }
        if !(self.aspect.is_finite() && self.aspect > 0.0) {
            return Err(GeometryError::InvalidConfig(format!(
                "aspect must be positive, got {}",
                self.aspect
            )));
        }
        Ok(())
    }
}

pub fn fit_splines(seam: &SeamCellFrame, config: &GeometryConfig) -> Result<WormSplines, GeometryError> {
    WormSplines::fit(seam, config)
}

/// Straightens every point of one frame against that frame's seam cells.
/// Output order follows input order.
pub fn straighten_points(
    points: &[Vec3],
    seam: &SeamCellFrame,
    config: &GeometryConfig,
) -> Result<Vec<StraightenedCoord>, GeometryError> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let splines = WormSplines::fit(seam, config)?;
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            splines.straighten_point(*p).map_err(|e| GeometryError::Nucleus {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Fits the frame's splines once and straightens every nucleus, keeping order.
pub fn straighten_frame(
    nuclei: &[NucleusRecord],
    seam: &SeamCellFrame,
    config: &GeometryConfig,
) -> Result<Vec<(NucleusRecord, StraightenedCoord)>, GeometryError> {
    let positions: Vec<Vec3> = nuclei.iter().map(|n| n.position).collect();
    let coords = straighten_points(&positions, seam, config)?;
    Ok(nuclei
        .iter()
        .cloned()
        .zip(coords)
        .map(|(mut n, c)| {
            n.straightened = Some(c);
            (n, c)
        })
        .collect())
}
