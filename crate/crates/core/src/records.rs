use serde::{Deserialize, Serialize};

use crate::geometry::StraightenedCoord;
use crate::Vec3;

/// Where a detection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginTag {
    #[default]
    Imported,
    UserAdded,
    UserEdited,
}

/// One detected or annotated nucleus centre in a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NucleusRecord {
    pub frame: usize,
    /// Track identity, e.g. a band letter plus index such as `A07`.
    pub id: Option<String>,
    /// Raw position (μm).
    pub position: Vec3,
    pub straightened: Option<StraightenedCoord>,
    #[serde(default)]
    pub origin: OriginTag,
}

impl NucleusRecord {
    pub fn new(frame: usize, id: Option<String>, position: Vec3) -> Self {
        Self {
            frame,
            id,
            position,
            straightened: None,
            origin: OriginTag::Imported,
        }
    }

    pub fn with_id(frame: usize, id: impl Into<String>, position: Vec3) -> Self {
        Self::new(frame, Some(id.into()), position)
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }
}
