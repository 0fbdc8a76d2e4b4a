//! A curation session: one sequence, tracked frame by frame under user
//! control. Every mutation bumps the revision and appends to an operation
//! log; replaying the log over the initial dataset rebuilds the session.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use seamtrack_core::assignment::ConstraintSet;
use seamtrack_core::geometry::{fit_splines, GeometryConfig};
use seamtrack_core::io::{format_tracks, track_rows, Sequence};
use seamtrack_core::records::OriginTag;
use seamtrack_core::tracking::{track_frame_pair, PairResult, TrackConfig, Tracker};
use seamtrack_core::{NucleusRecord, Vec3};

use crate::error::ServiceError;

/// Everything needed to start (or replay) a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInit {
    pub sequence: Sequence,
    pub config: TrackConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum EditAction {
    Add { position: Vec3 },
    Remove { index: usize },
    Move { index: usize, position: Vec3 },
    /// Replaces `index` by `a` and appends `b`.
    Split { index: usize, a: Vec3, b: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintOp {
    /// Pins a track to a detection of the active frame. An id that names no
    /// matchable track becomes the name of a new track at that detection.
    Pin { track: String, detection: usize },
    Unpin { track: String },
    Forbid { track: String, detection: usize },
    Unforbid { track: String, detection: usize },
    /// Forces the track to take its gate.
    Dim { track: String },
    Undim { track: String },
    Clear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Op {
    Edit { frame: usize, edit: EditAction },
    Constrain { constraint: ConstraintOp },
    Configure { config: TrackConfig },
    Commit { force: bool },
    Undo,
    Redo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Revision reached by applying `op`.
    pub revision: u64,
    pub op: Op,
}

/// Constraints on the active frame pair, keyed by track id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub pins: BTreeMap<String, usize>,
    pub forbidden: BTreeSet<(String, usize)>,
    pub dimmed: BTreeSet<String>,
}

impl Constraints {
    fn is_empty(&self) -> bool {
        self.pins.is_empty() && self.forbidden.is_empty() && self.dimmed.is_empty()
    }

    /// Shifts detection indices after `removed` was deleted.
    fn remove_detection(&mut self, removed: usize) {
        let shift = |j: usize| if j > removed { j - 1 } else { j };
        self.pins = std::mem::take(&mut self.pins)
            .into_iter()
            .filter(|(_, j)| *j != removed)
            .map(|(t, j)| (t, shift(j)))
            .collect();
        self.forbidden = std::mem::take(&mut self.forbidden)
            .into_iter()
            .filter(|(_, j)| *j != removed)
            .map(|(t, j)| (t, shift(j)))
            .collect();
    }

    /// Solver constraints against `matchable`, plus the names given to new
    /// detections.
    fn resolve(
        &self,
        matchable: &[NucleusRecord],
        n_detections: usize,
    ) -> Result<(ConstraintSet, BTreeMap<usize, String>), ServiceError> {
        let index: BTreeMap<&str, usize> = matchable
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id().expect("matchable tracks carry ids"), i))
            .collect();
        let track = |id: &str| index.get(id).copied().ok_or_else(|| ServiceError::UnknownTrack(id.to_string()));
        let check = |j: usize| {
            if j < n_detections {
                Ok(j)
            } else {
                Err(ServiceError::IndexOutOfRange {
                    index: j,
                    len: n_detections,
                })
            }
        };
        let mut set = ConstraintSet::new();
        let mut names = BTreeMap::new();
        let mut claimed: BTreeMap<usize, &str> = BTreeMap::new();
        for (id, &j) in &self.pins {
            let j = check(j)?;
            if let Some(other) = claimed.insert(j, id) {
                return Err(ServiceError::InfeasibleConstraints(format!(
                    "detection {j} is pinned to both {other} and {id}"
                )));
            }
            match index.get(id.as_str()) {
                Some(&i) => {
                    set.pin(i, j);
                }
                None => {
                    names.insert(j, id.clone());
                }
            }
        }
        for (id, j) in &self.forbidden {
            let (i, j) = (track(id)?, check(*j)?);
            if self.pins.get(id) == Some(&j) {
                return Err(ServiceError::InfeasibleConstraints(format!(
                    "{id} is both pinned and forbidden at detection {j}"
                )));
            }
            set.forbid(i, j);
        }
        for id in &self.dimmed {
            let i = track(id)?;
            if self.pins.contains_key(id) {
                return Err(ServiceError::InfeasibleConstraints(format!("{id} is both pinned and dimmed")));
            }
            set.force_unassigned(i);
        }
        // a named detection starts a new track, so no existing track may take it
        for &j in names.keys() {
            for i in 0..matchable.len() {
                set.forbid(i, j);
            }
        }
        Ok((set, names))
    }
}

/// The undoable part of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Editable {
    /// Committed frames hold labeled records; later frames hold the working
    /// detections.
    frames: Vec<Vec<NucleusRecord>>,
    tracker: Tracker,
    constraints: Constraints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchView {
    pub track: String,
    pub detection: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewDetectionView {
    pub detection: usize,
    /// Name given by a pin, if any.
    pub name: Option<String>,
}

/// A proposed assignment for the active frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Revision the prediction was computed at.
    pub revision: u64,
    pub prev_frame: usize,
    pub frame: usize,
    pub config: TrackConfig,
    pub matches: Vec<MatchView>,
    /// Tracks taking their gate.
    pub dimmed: Vec<String>,
    pub new: Vec<NewDetectionView>,
    /// Finite part of the objective: distances plus finite gates.
    pub total_cost: f64,
    /// Quadratic rescoring score, when that method ran.
    pub score: Option<f64>,
    pub graph_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionView {
    pub index: usize,
    pub id: Option<String>,
    pub position: Vec3,
    pub straightened: Option<Vec3>,
    pub origin: OriginTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub frame: usize,
    pub committed: bool,
    pub detections: Vec<DetectionView>,
}

/// Read-only snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub session_id: String,
    pub revision: u64,
    pub frame_numbers: Vec<usize>,
    pub committed_frames: usize,
    /// Frame numbers of the pair awaiting commit.
    pub active_pair: Option<[usize; 2]>,
    pub config: TrackConfig,
    pub frames: Vec<FrameView>,
    pub matchable_tracks: Vec<String>,
    pub constraints: Constraints,
    pub can_undo: bool,
    pub can_redo: bool,
    /// Present only when computed at the current revision.
    pub prediction: Option<Prediction>,
}

/// Changes since a revision the client already has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDelta {
    pub since: u64,
    pub revision: u64,
    pub ops: Vec<LogEntry>,
    /// Full state whenever anything changed.
    pub state: Option<StateView>,
}

#[derive(Debug, Clone)]
struct Cached {
    revision: u64,
    config: TrackConfig,
    result: PairResult,
    names: BTreeMap<usize, String>,
    view: Prediction,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    init: Arc<SessionInit>,
    revision: u64,
    current: Arc<Editable>,
    undo: Vec<Arc<Editable>>,
    redo: Vec<Arc<Editable>>,
    log: Vec<LogEntry>,
    cache: Option<Cached>,
}

fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

impl Session {
    /// Starts a session with the first frame as the seed; its records must
    /// carry ids. Ids in later frames are dropped.
    pub fn create(id: impl Into<String>, init: SessionInit) -> Result<Self, ServiceError> {
        init.config.validate().map_err(ServiceError::Invalid)?;
        init.geometry
            .validate()
            .map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let seq = &init.sequence;
        if seq.is_empty() {
            return Err(ServiceError::Invalid("the sequence has no frames".into()));
        }
        if seq.frame_numbers.len() != seq.frames.len() {
            return Err(ServiceError::Invalid("frame numbers and frames differ in length".into()));
        }
        if let Some(seams) = &seq.seams {
            if seams.len() != seq.frames.len() {
                return Err(ServiceError::Invalid(format!(
                    "{} frames but {} seam frames",
                    seq.frames.len(),
                    seams.len()
                )));
            }
        }
        let mut frames = seq.frames.clone();
        for (t, frame) in frames.iter_mut().enumerate() {
            for r in frame.iter_mut() {
                if t > 0 {
                    r.id = None;
                }
            }
            if seq.seams.is_some() {
                straighten(&init, t, frame)?;
            }
        }
        let tracker = Tracker::new(&frames[0], init.config.clone())?;
        Ok(Self {
            id: id.into(),
            init: Arc::new(init),
            revision: 0,
            current: Arc::new(Editable {
                frames,
                tracker,
                constraints: Constraints::default(),
            }),
            undo: Vec::new(),
            redo: Vec::new(),
            log: Vec::new(),
            cache: None,
        })
    }

    /// Rebuilds a session from its initial dataset and operation log.
    pub fn replay(id: impl Into<String>, init: SessionInit, log: &[LogEntry]) -> Result<Self, ServiceError> {
        let mut session = Self::create(id, init)?;
        for entry in log {
            let applied = session.apply(entry.op.clone(), None)?;
            if applied.revision != entry.revision {
                return Err(ServiceError::Storage(format!(
                    "log entry at revision {} replayed to revision {}",
                    entry.revision, applied.revision
                )));
            }
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn init(&self) -> &SessionInit {
        &self.init
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn config(&self) -> &TrackConfig {
        self.current.tracker.config()
    }

    pub fn tracker(&self) -> &Tracker {
        &self.current.tracker
    }

    pub fn constraints(&self) -> &Constraints {
        &self.current.constraints
    }

    /// Working or committed records of frame position `t`.
    pub fn frame(&self, t: usize) -> &[NucleusRecord] {
        &self.current.frames[t]
    }

    pub fn frame_count(&self) -> usize {
        self.current.frames.len()
    }

    pub fn committed_count(&self) -> usize {
        self.current.tracker.next_frame()
    }

    pub fn is_finished(&self) -> bool {
        self.committed_count() >= self.frame_count()
    }

    /// Committed frames' labeled records.
    pub fn committed_frames(&self) -> &[Vec<NucleusRecord>] {
        &self.current.frames[..self.committed_count()]
    }

    fn position_of(&self, frame: usize) -> Result<usize, ServiceError> {
        self.init
            .sequence
            .frame_numbers
            .iter()
            .position(|&f| f == frame)
            .ok_or(ServiceError::UnknownFrame { frame })
    }

    fn check_revision(&self, expected: Option<u64>) -> Result<(), ServiceError> {
        match expected {
            Some(e) if e != self.revision => Err(ServiceError::Conflict {
                expected: e,
                actual: self.revision,
            }),
            _ => Ok(()),
        }
    }

    /// Validates and applies one operation, returning its log entry.
    pub fn apply(&mut self, op: Op, expected_revision: Option<u64>) -> Result<LogEntry, ServiceError> {
        self.check_revision(expected_revision)?;
        match &op {
            Op::Undo => {
                let prev = self.undo.pop().ok_or(ServiceError::NothingTo("undo"))?;
                self.redo.push(std::mem::replace(&mut self.current, prev));
            }
            Op::Redo => {
                let next = self.redo.pop().ok_or(ServiceError::NothingTo("redo"))?;
                self.undo.push(std::mem::replace(&mut self.current, next));
            }
            Op::Commit { force } => {
                let next = self.committed(*force)?;
                // committed frames are final: history does not reach past them
                self.current = Arc::new(next);
                self.undo.clear();
                self.redo.clear();
            }
            other => {
                let next = self.edited(other)?;
                self.undo.push(std::mem::replace(&mut self.current, Arc::new(next)));
                self.redo.clear();
            }
        }
        self.revision += 1;
        let entry = LogEntry {
            revision: self.revision,
            op,
        };
        self.log.push(entry.clone());
        Ok(entry)
    }

    fn edited(&self, op: &Op) -> Result<Editable, ServiceError> {
        let mut next = (*self.current).clone();
        match op {
            Op::Edit { frame, edit } => {
                let t = self.position_of(*frame)?;
                if t < self.committed_count() {
                    return Err(ServiceError::FrameCommitted { frame: *frame });
                }
                let records = &mut next.frames[t];
                let len = records.len();
                let in_range = |index: usize| {
                    if index < len {
                        Ok(index)
                    } else {
                        Err(ServiceError::IndexOutOfRange { index, len })
                    }
                };
                let fresh = |position: Vec3, origin: OriginTag| NucleusRecord {
                    origin,
                    ..NucleusRecord::new(*frame, None, position)
                };
                let active = t == self.committed_count();
                match edit {
                    EditAction::Add { position } => records.push(fresh(*position, OriginTag::UserAdded)),
                    EditAction::Remove { index } => {
                        records.remove(in_range(*index)?);
                        if active {
                            next.constraints.remove_detection(*index);
                        }
                    }
                    EditAction::Move { index, position } => {
                        records[in_range(*index)?] = fresh(*position, OriginTag::UserEdited);
                    }
                    EditAction::Split { index, a, b } => {
                        records[in_range(*index)?] = fresh(*a, OriginTag::UserEdited);
                        records.push(fresh(*b, OriginTag::UserAdded));
                    }
                }
                if self.init.sequence.seams.is_some() {
                    straighten(&self.init, t, &mut next.frames[t])?;
                }
                if active {
                    next.constraints.resolve(&next.tracker.matchable(), next.frames[t].len())?;
                }
            }
            Op::Constrain { constraint } => {
                let t = self.committed_count();
                if t >= self.frame_count() {
                    return Err(ServiceError::Finished);
                }
                let c = &mut next.constraints;
                let known = |id: &str| next.tracker.matchable().iter().any(|r| r.id() == Some(id));
                match constraint {
                    ConstraintOp::Pin { track, detection } => {
                        c.pins.insert(track.clone(), *detection);
                    }
                    ConstraintOp::Unpin { track } => {
                        c.pins.remove(track).ok_or_else(|| ServiceError::UnknownTrack(track.clone()))?;
                    }
                    ConstraintOp::Forbid { track, detection } => {
                        if !known(track) {
                            return Err(ServiceError::UnknownTrack(track.clone()));
                        }
                        c.forbidden.insert((track.clone(), *detection));
                    }
                    ConstraintOp::Unforbid { track, detection } => {
                        if !c.forbidden.remove(&(track.clone(), *detection)) {
                            return Err(ServiceError::Invalid(format!(
                                "{track} is not forbidden at detection {detection}"
                            )));
                        }
                    }
                    ConstraintOp::Dim { track } => {
                        if !known(track) {
                            return Err(ServiceError::UnknownTrack(track.clone()));
                        }
                        c.dimmed.insert(track.clone());
                    }
                    ConstraintOp::Undim { track } => {
                        if !c.dimmed.remove(track) {
                            return Err(ServiceError::Invalid(format!("{track} is not dimmed")));
                        }
                    }
                    ConstraintOp::Clear => *c = Constraints::default(),
                }
                if let ConstraintOp::Pin { track, .. } = constraint {
                    if !known(track) && next.tracker.has_track(track) {
                        return Err(ServiceError::Invalid(format!(
                            "{track} is outside the reappearance window and cannot be matched"
                        )));
                    }
                }
                next.constraints
                    .resolve(&next.tracker.matchable(), next.frames[t].len())?;
            }
            Op::Configure { config } => {
                next.tracker.set_config(config.clone())?;
            }
            Op::Commit { .. } | Op::Undo | Op::Redo => unreachable!("handled by apply"),
        }
        Ok(next)
    }

    fn committed(&mut self, force: bool) -> Result<Editable, ServiceError> {
        let cfg = self.config().clone();
        let (result, names) = {
            let cached = self.predict_cached(&cfg)?;
            (cached.result.clone(), cached.names.clone())
        };
        let uncovered: Vec<usize> = result.new.iter().copied().filter(|j| !names.contains_key(j)).collect();
        if !uncovered.is_empty() && !force && !cfg.auto_name {
            return Err(ServiceError::UncoveredDetections { indices: uncovered });
        }
        let mut next = (*self.current).clone();
        let t = next.tracker.next_frame();
        let labeled = next.tracker.commit(&result, &names)?;
        next.frames[t] = labeled;
        next.constraints = Constraints::default();
        Ok(next)
    }

    fn predict_cached(&mut self, cfg: &TrackConfig) -> Result<&Cached, ServiceError> {
        let hit = self
            .cache
            .as_ref()
            .is_some_and(|c| c.revision == self.revision && &c.config == cfg);
        if !hit {
            self.cache = Some(self.compute(cfg)?);
        }
        Ok(self.cache.as_ref().expect("just filled"))
    }

    fn compute(&self, cfg: &TrackConfig) -> Result<Cached, ServiceError> {
        let t = self.committed_count();
        if t >= self.frame_count() {
            return Err(ServiceError::Finished);
        }
        let matchable = self.current.tracker.matchable();
        let curr = &self.current.frames[t];
        let (set, names) = self.current.constraints.resolve(&matchable, curr.len())?;
        let result = track_frame_pair(&matchable, curr, cfg, &set)?;
        let numbers = &self.init.sequence.frame_numbers;
        let matches = result
            .assignment
            .matched_pairs()
            .map(|(i, j)| MatchView {
                track: matchable[i].id.clone().expect("matchable tracks carry ids"),
                detection: j,
                cost: result.track_costs[i],
            })
            .collect();
        let dimmed = result
            .dimmed
            .iter()
            .map(|&i| matchable[i].id.clone().expect("matchable tracks carry ids"))
            .collect();
        let new = result
            .new
            .iter()
            .map(|&j| NewDetectionView {
                detection: j,
                name: names.get(&j).cloned(),
            })
            .collect();
        let total_cost = result.track_costs.iter().map(|&c| finite_or_zero(c)).sum();
        let view = Prediction {
            revision: self.revision,
            prev_frame: numbers[t - 1],
            frame: numbers[t],
            config: cfg.clone(),
            matches,
            dimmed,
            new,
            total_cost,
            score: result.hypothesis.as_ref().map(|h| h.score),
            graph_fallback: result.graph_fallback,
        };
        Ok(Cached {
            revision: self.revision,
            config: cfg.clone(),
            result,
            names,
            view,
        })
    }

    /// Predicts the active pair with `cfg` (the session config when `None`).
    /// Results are cached per revision and config.
    pub fn predict(&mut self, cfg: Option<&TrackConfig>) -> Result<Prediction, ServiceError> {
        let cfg = match cfg {
            Some(c) => {
                c.validate().map_err(ServiceError::Invalid)?;
                c.clone()
            }
            None => self.config().clone(),
        };
        Ok(self.predict_cached(&cfg)?.view.clone())
    }

    /// The full result behind the cached prediction, if it is current.
    pub fn cached_result(&self) -> Option<&PairResult> {
        self.cache
            .as_ref()
            .filter(|c| c.revision == self.revision)
            .map(|c| &c.result)
    }

    pub fn state(&self) -> StateView {
        let numbers = &self.init.sequence.frame_numbers;
        let committed = self.committed_count();
        let frames = self
            .current
            .frames
            .iter()
            .enumerate()
            .map(|(t, records)| FrameView {
                frame: numbers[t],
                committed: t < committed,
                detections: records
                    .iter()
                    .enumerate()
                    .map(|(index, r)| DetectionView {
                        index,
                        id: r.id.clone(),
                        position: r.position,
                        straightened: r.straightened.map(|c| c.as_vec3()),
                        origin: r.origin,
                    })
                    .collect(),
            })
            .collect();
        let prediction = self
            .cache
            .as_ref()
            .filter(|c| c.revision == self.revision && &c.config == self.config())
            .map(|c| c.view.clone());
        StateView {
            session_id: self.id.clone(),
            revision: self.revision,
            frame_numbers: numbers.clone(),
            committed_frames: committed,
            active_pair: (committed < numbers.len()).then(|| [numbers[committed - 1], numbers[committed]]),
            config: self.config().clone(),
            frames,
            matchable_tracks: self
                .current
                .tracker
                .matchable()
                .into_iter()
                .filter_map(|r| r.id)
                .collect(),
            constraints: self.current.constraints.clone(),
            can_undo: !self.undo.is_empty(),
            can_redo: !self.redo.is_empty(),
            prediction,
        }
    }

    /// Canonical JSON of the session state, without any cached prediction.
    pub fn state_json(&self) -> String {
        let mut view = self.state();
        view.prediction = None;
        serde_json::to_string(&view).expect("state serializes")
    }

    pub fn delta(&self, since: u64) -> Result<StateDelta, ServiceError> {
        if since > self.revision {
            return Err(ServiceError::Invalid(format!(
                "revision {since} is ahead of the session (at {})",
                self.revision
            )));
        }
        let ops: Vec<LogEntry> = self.log.iter().filter(|e| e.revision > since).cloned().collect();
        Ok(StateDelta {
            since,
            revision: self.revision,
            state: (!ops.is_empty()).then(|| self.state()),
            ops,
        })
    }

    /// Track table of the committed frames.
    pub fn export_csv(&self) -> String {
        let rows = track_rows(
            self.committed_frames(),
            &self.init.sequence.frame_numbers,
            self.current.tracker.track_set(),
        );
        format_tracks(&rows)
    }

    /// True when the active pair has user constraints.
    pub fn has_constraints(&self) -> bool {
        !self.current.constraints.is_empty()
    }
}

fn straighten(init: &SessionInit, t: usize, records: &mut [NucleusRecord]) -> Result<(), ServiceError> {
    let Some(seams) = &init.sequence.seams else {
        return Ok(());
    };
    if records.is_empty() {
        return Ok(());
    }
    let splines = fit_splines(&seams[t], &init.geometry).map_err(|e| ServiceError::Invalid(e.to_string()))?;
    for (index, r) in records.iter_mut().enumerate() {
        let c = splines.straighten_point(r.position).map_err(|e| {
            ServiceError::Invalid(format!("frame {}: detection {index}: {e}", init.sequence.frame_numbers[t]))
        })?;
        r.straightened = Some(c);
    }
    Ok(())
}
