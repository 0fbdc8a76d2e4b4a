//! Session registry with optional on-disk persistence.
//!
//! Each session lives in `<data_dir>/<id>.jsonl`: a header line with the
//! initial dataset, then one line per applied operation. Mutations are
//! serialized per session; readers take the last published snapshot.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use seamtrack_core::geometry::GeometryConfig;
use seamtrack_core::io::write_atomic;
use seamtrack_core::tracking::TrackConfig;

use crate::error::ServiceError;
use crate::session::{LogEntry, Op, Prediction, Session, SessionInit, StateDelta, StateView};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    session_id: String,
    init: SessionInit,
}

struct Handle {
    session: Mutex<Session>,
    published: RwLock<Arc<StateView>>,
}

impl Handle {
    fn publish(&self, session: &Session) -> Arc<StateView> {
        let view = Arc::new(session.state());
        *self.published.write() = view.clone();
        view
    }
}

/// Defaults applied to new sessions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Defaults {
    pub config: TrackConfig,
    pub geometry: GeometryConfig,
}

pub struct SessionManager {
    sessions: RwLock<HashMap<String, Arc<Handle>>>,
    data_dir: Option<PathBuf>,
    defaults: Defaults,
}

fn storage(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(format!("{}: {e}", path.display()))
}

/// Overlays the keys of `patch` onto `base`, recursing into objects.
pub fn merge_json(base: &mut serde_json::Value, patch: &serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

/// `base` with the fields present in `patch` replaced.
pub fn patch_config(base: &TrackConfig, patch: &serde_json::Value) -> Result<TrackConfig, ServiceError> {
    let mut value = serde_json::to_value(base).expect("config serializes");
    merge_json(&mut value, patch);
    let cfg: TrackConfig =
        serde_json::from_value(value).map_err(|e| ServiceError::Invalid(format!("config: {e}")))?;
    cfg.validate().map_err(ServiceError::Invalid)?;
    Ok(cfg)
}

impl SessionManager {
    pub fn new(data_dir: Option<PathBuf>, defaults: Defaults) -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            data_dir,
            defaults,
        }
    }

    pub fn defaults(&self) -> &Defaults {
        &self.defaults
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    /// Replays every session log in the data directory. Returns the number
    /// of sessions loaded.
    pub fn load_all(&self) -> Result<usize, ServiceError> {
        let Some(dir) = &self.data_dir else {
            return Ok(0);
        };
        std::fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| storage(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in &paths {
            let session = read_log(path)?;
            let handle = Handle {
                published: RwLock::new(Arc::new(session.state())),
                session: Mutex::new(session),
            };
            let id = handle.session.lock().id().to_string();
            self.sessions.write().insert(id, Arc::new(handle));
        }
        Ok(paths.len())
    }

    pub fn create(&self, init: SessionInit) -> Result<StateView, ServiceError> {
        let id = uuid::Uuid::new_v4().to_string();
        self.create_with_id(id, init)
    }

    pub fn create_with_id(&self, id: String, init: SessionInit) -> Result<StateView, ServiceError> {
        if self.sessions.read().contains_key(&id) {
            return Err(ServiceError::Invalid(format!("session {id} already exists")));
        }
        let session = Session::create(id.clone(), init)?;
        if let Some(path) = self.log_path(&id) {
            let header = Header {
                session_id: id.clone(),
                init: session.init().clone(),
            };
            let mut line = serde_json::to_string(&header).expect("header serializes");
            line.push('\n');
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
            }
            write_atomic(&path, line.as_bytes())?;
        }
        let view = session.state();
        let handle = Handle {
            published: RwLock::new(Arc::new(view.clone())),
            session: Mutex::new(session),
        };
        self.sessions.write().insert(id, Arc::new(handle));
        Ok(view)
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, ServiceError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::SessionNotFound(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// The last published state; never blocks on a running mutation.
    pub fn state(&self, id: &str) -> Result<Arc<StateView>, ServiceError> {
        Ok(self.handle(id)?.published.read().clone())
    }

    pub fn delta(&self, id: &str, since: u64) -> Result<StateDelta, ServiceError> {
        self.handle(id)?.session.lock().delta(since)
    }

    /// Applies `op`, persists it, and publishes the new state. A failed
    /// write leaves the session unchanged.
    pub fn apply(&self, id: &str, op: Op, expected_revision: Option<u64>) -> Result<Arc<StateView>, ServiceError> {
        let handle = self.handle(id)?;
        let mut session = handle.session.lock();
        let mut next = session.clone();
        let entry = next.apply(op, expected_revision)?;
        if let Some(path) = self.log_path(id) {
            append_entry(&path, &entry)?;
        }
        *session = next;
        Ok(handle.publish(&session))
    }

    /// Predicts the active pair. `patch` overrides fields of the session
    /// config for this prediction only.
    pub fn predict(&self, id: &str, patch: Option<&serde_json::Value>) -> Result<Prediction, ServiceError> {
        let handle = self.handle(id)?;
        let mut session = handle.session.lock();
        let cfg = match patch {
            Some(p) => Some(patch_config(session.config(), p)?),
            None => None,
        };
        let prediction = session.predict(cfg.as_ref())?;
        handle.publish(&session);
        Ok(prediction)
    }

    pub fn export_csv(&self, id: &str) -> Result<String, ServiceError> {
        Ok(self.handle(id)?.session.lock().export_csv())
    }

    /// A copy of the session, for inspection.
    pub fn snapshot(&self, id: &str) -> Result<Session, ServiceError> {
        Ok(self.handle(id)?.session.lock().clone())
    }
}

fn append_entry(path: &Path, entry: &LogEntry) -> Result<(), ServiceError> {
    let mut line = serde_json::to_string(entry).expect("log entry serializes");
    line.push('\n');
    let mut file = OpenOptions::new().append(true).open(path).map_err(|e| storage(path, e))?;
    file.write_all(line.as_bytes()).map_err(|e| storage(path, e))?;
    file.sync_data().map_err(|e| storage(path, e))
}

/// Rebuilds a session from its log file.
pub fn read_log(path: &Path) -> Result<Session, ServiceError> {
    let text = std::fs::read_to_string(path).map_err(|e| storage(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| storage(path, "empty session log"))?;
    let header: Header = serde_json::from_str(first).map_err(|e| storage(path, format!("line 1: {e}")))?;
    let entries = lines
        .map(|(n, l)| serde_json::from_str::<LogEntry>(l).map_err(|e| storage(path, format!("line {}: {e}", n + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    Session::replay(header.session_id, header.init, &entries)
}
