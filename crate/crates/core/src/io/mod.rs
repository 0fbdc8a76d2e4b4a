//! File formats, configuration, and atomic file output.
//!
//! All coordinates at the file boundary are in μm, and every header spells
//! out its unit with a `_um` suffix.

mod config;
mod sequence;
mod tables;

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{Config, MetricsConfig, ServiceConfig};
pub use sequence::Sequence;
pub use tables::*;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}{}: {message}", column.map(|c| format!(":{c}")).unwrap_or_default())]
    Parse {
        source_name: String,
        line: u64,
        column: Option<usize>,
        message: String,
    },
    #[error("{source_name}: header {found:?} lacks unit suffixes, expected {expected:?}")]
    UnitMismatch {
        source_name: String,
        expected: String,
        found: String,
    },
    #[error("{source_name}: unexpected header {found:?}, expected {expected:?}")]
    Header {
        source_name: String,
        expected: String,
        found: String,
    },
    #[error("{source_name}: {message}")]
    Validation { source_name: String, message: String },
    #[error("{source_name}: {path}: {message}")]
    Config {
        source_name: String,
        /// Dotted key path of the offending entry.
        path: String,
        message: String,
    },
}

impl IoError {
    /// True for problems with the input itself, as opposed to failures of
    /// the environment (disk full, permissions).
    pub fn is_validation(&self) -> bool {
        match self {
            IoError::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => true,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}
