use serde::Serialize;
use thiserror::Error;

use seamtrack_core::assignment::AssignmentError;
use seamtrack_core::io::IoError;
use seamtrack_core::tracking::TrackError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("revision conflict: expected {expected}, current {actual}")]
    Conflict { expected: u64, actual: u64 },
    #[error("frame {frame} is committed and cannot be edited")]
    FrameCommitted { frame: usize },
    #[error("frame {frame} is not part of the session")]
    UnknownFrame { frame: usize },
    #[error("index {index} out of range ({len} entries)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown track {0}")]
    UnknownTrack(String),
    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),
    #[error("detections {indices:?} match no track and have no name; pin a name or commit with force")]
    UncoveredDetections { indices: Vec<usize> },
    #[error("every frame is committed")]
    Finished,
    #[error("nothing to {0}")]
    NothingTo(&'static str),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl ServiceError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::SessionNotFound(_) => "session_not_found",
            ServiceError::Conflict { .. } => "conflict",
            ServiceError::FrameCommitted { .. } => "frame_committed",
            ServiceError::UnknownFrame { .. } => "unknown_frame",
            ServiceError::IndexOutOfRange { .. } => "index_out_of_range",
            ServiceError::UnknownTrack(_) => "unknown_track",
            ServiceError::InfeasibleConstraints(_) => "infeasible_constraints",
            ServiceError::UncoveredDetections { .. } => "uncovered_detections",
            ServiceError::Finished => "finished",
            ServiceError::NothingTo(_) => "nothing_to_do",
            ServiceError::Invalid(_) => "invalid_request",
            ServiceError::Storage(_) => "storage",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::SessionNotFound(_) | ServiceError::UnknownFrame { .. } => 404,
            ServiceError::Conflict { .. }
            | ServiceError::FrameCommitted { .. }
            | ServiceError::InfeasibleConstraints(_)
            | ServiceError::UncoveredDetections { .. }
            | ServiceError::Finished
            | ServiceError::NothingTo(_) => 409,
            ServiceError::IndexOutOfRange { .. } | ServiceError::UnknownTrack(_) | ServiceError::Invalid(_) => 422,
            ServiceError::Storage(_) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl From<TrackError> for ServiceError {
    fn from(e: TrackError) -> Self {
        match e {
            TrackError::Assignment(AssignmentError::InfeasibleConstraints(m)) => ServiceError::InfeasibleConstraints(m),
            other => ServiceError::Invalid(other.to_string()),
        }
    }
}

impl From<IoError> for ServiceError {
    fn from(e: IoError) -> Self {
        if e.is_validation() {
            ServiceError::Invalid(e.to_string())
        } else {
            ServiceError::Storage(e.to_string())
        }
    }
}
