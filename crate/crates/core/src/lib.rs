//! Untwisting and frame-to-frame tracking of embryo nuclei.
//!
//! Nuclei detected in a coiled embryo are remapped into a straightened body
//! frame built from seam-cell fiducials ([`geometry`]), associated across
//! frames by gated linear assignment ([`assignment`]), optionally re-ranked
//! with an edge-consistency cost over spatial graphs ([`graphs`]), and folded
//! into tracks ([`tracking`]). [`synth`] produces coiled-embryo datasets with
//! ground truth, [`metrics`] scores detections and tracking, and [`io`] holds
//! the CSV formats and configuration.

pub mod assignment;
pub mod geometry;
pub mod graphs;
pub mod io;
pub mod metrics;
pub mod records;
pub mod synth;
pub mod tracking;

/// A position or offset in micrometres.
pub type Vec3 = nalgebra::Vector3<f64>;

pub use records::{NucleusRecord, OriginTag};
