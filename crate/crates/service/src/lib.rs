//! Curation sessions over the seamtrack tracker: revisioned edits,
//! constrained re-prediction, undo/redo, a replayable operation log, and an
//! HTTP JSON API.

pub mod api;
pub mod error;
pub mod manager;
pub mod session;

pub use api::{router, serve};
pub use error::{ErrorBody, ServiceError};
pub use manager::{patch_config, Defaults, SessionManager};
pub use session::{
    ConstraintOp, Constraints, EditAction, LogEntry, Op, Prediction, Session, SessionInit, StateDelta, StateView,
};
