use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::Vec3;

/// Seam-cell pair names, ordered posterior to anterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairName {
    T,
    V6,
    V5,
    Q,
    V4,
    V3,
    V2,
    V1,
    H2,
    H1,
    H0,
}

impl PairName {
    /// All canonical pairs, tail first.
    pub const CANONICAL: [PairName; 11] = [
        PairName::T,
        PairName::V6,
        PairName::V5,
        PairName::Q,
        PairName::V4,
        PairName::V3,
        PairName::V2,
        PairName::V1,
        PairName::H2,
        PairName::H1,
        PairName::H0,
    ];

    /// Q is a late-appearing neuroblast pair and may be absent.
    pub fn is_optional(self) -> bool {
        self == PairName::Q
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairName::T => "T",
            PairName::V6 => "V6",
            PairName::V5 => "V5",
            PairName::Q => "Q",
            PairName::V4 => "V4",
            PairName::V3 => "V3",
            PairName::V2 => "V2",
            PairName::V1 => "V1",
            PairName::H2 => "H2",
            PairName::H1 => "H1",
            PairName::H0 => "H0",
        }
    }
}

impl fmt::Display for PairName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairName {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PairName::CANONICAL
            .iter()
            .copied()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| GeometryError::InvalidSeam(format!("unknown seam pair name `{s}`")))
    }
}

/// One bilateral seam-cell pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeamPair {
    pub name: PairName,
    pub left: Vec3,
    pub right: Vec3,
}

impl SeamPair {
    pub fn new(name: PairName, left: Vec3, right: Vec3) -> Self {
        Self { name, left, right }
    }

    pub fn midpoint(&self) -> Vec3 {
        (self.left + self.right) * 0.5
    }
}

/// The named fiducial pairs for one frame, stored in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeamCellFrame {
    frame_index: usize,
    pairs: Vec<SeamPair>,
}

impl SeamCellFrame {
    /// Sorts `pairs` into canonical order and checks for duplicates and
    /// non-finite coordinates. Partial sets are accepted here; use
    /// [`SeamCellFrame::missing_required`] for completeness checks.
    pub fn new(frame_index: usize, mut pairs: Vec<SeamPair>) -> Result<Self, GeometryError> {
        pairs.sort_by_key(|p| p.name);
        for w in pairs.windows(2) {
            if w[0].name == w[1].name {
                return Err(GeometryError::InvalidSeam(format!(
                    "pair {} appears more than once in frame {frame_index}",
                    w[0].name
                )));
            }
        }
        if let Some(p) = pairs
            .iter()
            .find(|p| !(p.left.iter().all(|c| c.is_finite()) && p.right.iter().all(|c| c.is_finite())))
        {
            return Err(GeometryError::InvalidSeam(format!(
                "pair {} has a non-finite coordinate in frame {frame_index}",
                p.name
            )));
        }
        Ok(Self { frame_index, pairs })
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn pairs(&self) -> &[SeamPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, name: PairName) -> Option<&SeamPair> {
        self.pairs.iter().find(|p| p.name == name)
    }

    /// Required canonical pairs (everything except Q) that are absent.
    pub fn missing_required(&self) -> Vec<PairName> {
        PairName::CANONICAL
            .iter()
            .copied()
            .filter(|n| !n.is_optional() && self.get(*n).is_none())
            .collect()
    }

    /// Applies `f` to every seam position.
    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            frame_index: self.frame_index,
            pairs: self
                .pairs
                .iter()
                .map(|p| SeamPair::new(p.name, f(p.left), f(p.right)))
                .collect(),
        }
    }
}
