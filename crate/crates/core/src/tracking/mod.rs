//! Frame-to-frame GNN tracking, track lifecycle, and sequence folding.

mod config;
mod trackset;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{solve_constrained, Assignment, AssignmentError, ConstraintSet, CostMatrix, Gate};
use crate::geometry::{straighten_frame, GeometryConfig, GeometryError, SeamCellFrame, StraightenedCoord};
use crate::graphs::{rescore_hypotheses, GraphError, Hypothesis};
use crate::{NucleusRecord, Vec3};

pub use config::{gate_serde, CoordinateSpace, Method, TrackConfig};
pub use trackset::{TrackSet, TrackStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("invalid tracking config: {0}")]
    InvalidConfig(String),
    #[error("frame {frame}: record {index} has no track id")]
    MissingId { frame: usize, index: usize },
    #[error("frame {frame}: duplicate track id {id}")]
    DuplicateId { frame: usize, id: String },
    #[error("frame {frame}: record {index} has no straightened coordinates")]
    MissingStraightened { frame: usize, index: usize },
    #[error("{frames} frames but {seams} seam frames")]
    SeamCountMismatch { frames: usize, seams: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("missing correspondence: {0}")]
    MissingCorrespondence(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// The position a record is tracked at in the given space.
pub fn space_position(rec: &NucleusRecord, space: CoordinateSpace, index: usize) -> Result<Vec3, TrackError> {
    match space {
        CoordinateSpace::Raw => Ok(rec.position),
        CoordinateSpace::Straightened => rec
            .straightened
            .map(|c| c.as_vec3())
            .ok_or(TrackError::MissingStraightened { frame: rec.frame, index }),
    }
}

fn positions(records: &[NucleusRecord], space: CoordinateSpace) -> Result<Vec<Vec3>, TrackError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| space_position(r, space, i))
        .collect()
}

/// Solution of one frame pair, indexed by previous-frame track position and
/// current-frame detection position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub assignment: Assignment,
    /// Current records carrying the id of the track they matched; unmatched
    /// detections have no id.
    pub curr: Vec<NucleusRecord>,
    /// Per-track cost of its selected entry (distance, or gate when dimmed).
    pub track_costs: Vec<f64>,
    /// Previous-frame indices whose gate won.
    pub dimmed: Vec<usize>,
    /// Current-frame indices matched to no track.
    pub new: Vec<usize>,
    /// The winning hypothesis when quadratic rescoring ran.
    pub hypothesis: Option<Hypothesis>,
    /// True when a degenerate Delaunay input fell back to the radius graph.
    pub graph_fallback: bool,
}

impl PairResult {
    /// Id inherited by each current detection.
    pub fn labels(&self) -> Vec<Option<String>> {
        self.curr.iter().map(|r| r.id.clone()).collect()
    }
}

fn check_ids(prev: &[NucleusRecord]) -> Result<(), TrackError> {
    let mut seen = HashSet::new();
    for (index, r) in prev.iter().enumerate() {
        let id = r.id().ok_or(TrackError::MissingId { frame: r.frame, index })?;
        if !seen.insert(id) {
            return Err(TrackError::DuplicateId {
                frame: r.frame,
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

/// Associates the current detections with the previous frame's tracks.
pub fn track_frame_pair(
    prev: &[NucleusRecord],
    curr: &[NucleusRecord],
    cfg: &TrackConfig,
    constraints: &ConstraintSet,
) -> Result<PairResult, TrackError> {
    cfg.validate().map_err(TrackError::InvalidConfig)?;
    check_ids(prev)?;
    let p = positions(prev, cfg.coordinate_space)?;
    let c = positions(curr, cfg.coordinate_space)?;
    let cost = CostMatrix::from_positions(&p, &c, &Gate::Uniform(cfg.gate_um))?;
    let (assignment, hypothesis, graph_fallback) = match cfg.method {
        Method::Gnn => (solve_constrained(&cost, constraints)?, None, false),
        Method::MurtyRescore => {
            let (gp, fp) = cfg.graph.build(&p)?;
            let (gc, fc) = cfg.graph.build(&c)?;
            let h = rescore_hypotheses(&cost, constraints, cfg.k, &gp, &gc, cfg.graph.lambda)?;
            (h.assignment.clone(), Some(h), fp || fc)
        }
    };
    let mut labeled: Vec<NucleusRecord> = curr
        .iter()
        .map(|r| NucleusRecord { id: None, ..r.clone() })
        .collect();
    let mut track_costs = Vec::with_capacity(prev.len());
    let mut dimmed = Vec::new();
    for (i, j) in assignment.track_to_detection.iter().enumerate() {
        match j {
            Some(j) => {
                labeled[*j].id = prev[i].id.clone();
                track_costs.push(cost.entry(i, *j));
            }
            None => {
                dimmed.push(i);
                track_costs.push(cost.gate(i));
            }
        }
    }
    Ok(PairResult {
        new: assignment.unassigned_detections.clone(),
        assignment,
        curr: labeled,
        track_costs,
        dimmed,
        hypothesis,
        graph_fallback,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrackEntry {
    id: String,
    /// Last matched record; dimmed tracks keep it.
    last: NucleusRecord,
    last_seen: usize,
}

/// Incremental tracker: the seed frame names the tracks, then each frame is
/// predicted against the matchable tracks and committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracker {
    cfg: TrackConfig,
    tracks: Vec<TrackEntry>,
    track_set: TrackSet,
}

impl Tracker {
    pub fn new(seed: &[NucleusRecord], cfg: TrackConfig) -> Result<Self, TrackError> {
        cfg.validate().map_err(TrackError::InvalidConfig)?;
        check_ids(seed)?;
        positions(seed, cfg.coordinate_space)?;
        let mut track_set = TrackSet::new();
        let mut statuses = BTreeMap::new();
        let tracks = seed
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let id = r.id.clone().expect("checked");
                statuses.insert(id.clone(), TrackStatus::Matched(j));
                TrackEntry {
                    id,
                    last: r.clone(),
                    last_seen: 0,
                }
            })
            .collect();
        track_set.push_frame(statuses);
        Ok(Self { cfg, tracks, track_set })
    }

    pub fn config(&self) -> &TrackConfig {
        &self.cfg
    }

    /// Replaces the configuration used for later frames.
    pub fn set_config(&mut self, cfg: TrackConfig) -> Result<(), TrackError> {
        cfg.validate().map_err(TrackError::InvalidConfig)?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn track_set(&self) -> &TrackSet {
        &self.track_set
    }

    /// Index of the next frame to commit.
    pub fn next_frame(&self) -> usize {
        self.track_set.frame_count()
    }

    /// Tracks that may match the next frame, as records at their last
    /// known coordinates. Constraint track indices refer to this order.
    pub fn matchable(&self) -> Vec<NucleusRecord> {
        let next = self.next_frame();
        self.tracks
            .iter()
            .filter(|t| self.cfg.reappearance_window.is_none_or(|w| next - t.last_seen <= w + 1))
            .map(|t| NucleusRecord {
                id: Some(t.id.clone()),
                ..t.last.clone()
            })
            .collect()
    }

    pub fn has_track(&self, id: &str) -> bool {
        self.tracks.iter().any(|t| t.id == id)
    }

    pub fn predict(&self, curr: &[NucleusRecord], constraints: &ConstraintSet) -> Result<PairResult, TrackError> {
        track_frame_pair(&self.matchable(), curr, &self.cfg, constraints)
    }

    /// Freezes `result` as the next frame. Unmatched detections take a name
    /// from `names` (keyed by detection index) or, with auto naming, a fresh
    /// one. Returns the labeled records.
    pub fn commit(
        &mut self,
        result: &PairResult,
        names: &BTreeMap<usize, String>,
    ) -> Result<Vec<NucleusRecord>, TrackError> {
        let frame = self.next_frame();
        let matchable = self.matchable();
        let mut labeled = result.curr.clone();
        let mut statuses = BTreeMap::new();
        for (i, j) in result.assignment.track_to_detection.iter().enumerate() {
            let id = matchable[i].id.clone().expect("matchable tracks carry ids");
            if let Some(j) = j {
                let t = self.tracks.iter_mut().find(|t| t.id == id).expect("track exists");
                t.last = labeled[*j].clone();
                t.last_seen = frame;
                statuses.insert(id, TrackStatus::Matched(*j));
            }
        }
        for &j in &result.new {
            let name = match names.get(&j) {
                Some(n) => Some(n.clone()),
                None if self.cfg.auto_name => Some(auto_name(frame, j)),
                None => None,
            };
            let Some(name) = name else { continue };
            if self.has_track(&name) || statuses.contains_key(&name) {
                return Err(TrackError::DuplicateId { frame, id: name });
            }
            labeled[j].id = Some(name.clone());
            self.tracks.push(TrackEntry {
                id: name.clone(),
                last: labeled[j].clone(),
                last_seen: frame,
            });
            statuses.insert(name, TrackStatus::Matched(j));
        }
        self.track_set.push_frame(statuses);
        Ok(labeled)
    }
}

pub fn auto_name(frame: usize, index: usize) -> String {
    format!("N{frame:04}_{index:03}")
}

/// Result of tracking a whole sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub track_set: TrackSet,
    /// Every frame's records with straightened coordinates (when computed)
    /// and inherited ids.
    pub frames: Vec<Vec<NucleusRecord>>,
    /// One result per consecutive frame pair.
    pub pairs: Vec<PairResult>,
}

/// Straightens each frame against its seam frame.
pub fn straighten_sequence(
    frames: &[Vec<NucleusRecord>],
    seams: &[SeamCellFrame],
    geometry: &GeometryConfig,
) -> Result<Vec<Vec<NucleusRecord>>, TrackError> {
    if frames.len() != seams.len() {
        return Err(TrackError::SeamCountMismatch {
            frames: frames.len(),
            seams: seams.len(),
        });
    }
    frames
        .iter()
        .zip(seams)
        .map(|(f, s)| Ok(straighten_frame(f, s, geometry)?.into_iter().map(|(r, _)| r).collect()))
        .collect()
}

/// Folds [`track_frame_pair`] over consecutive frames. The first frame must
/// carry ids. Seam frames are needed only in straightened space.
pub fn track_sequence(
    frames: &[Vec<NucleusRecord>],
    seams: Option<&[SeamCellFrame]>,
    cfg: &TrackConfig,
    geometry: &GeometryConfig,
) -> Result<SequenceResult, TrackError> {
    if frames.is_empty() {
        return Err(TrackError::EmptySequence);
    }
    let prepared;
    let frames = match (cfg.coordinate_space, seams) {
        (CoordinateSpace::Straightened, Some(seams)) => {
            prepared = straighten_sequence(frames, seams, geometry)?;
            &prepared[..]
        }
        _ => frames,
    };
    let mut tracker = Tracker::new(&frames[0], cfg.clone())?;
    let mut out_frames = vec![frames[0].clone()];
    let mut pairs = Vec::with_capacity(frames.len().saturating_sub(1));
    for curr in &frames[1..] {
        let result = tracker.predict(curr, &ConstraintSet::new())?;
        out_frames.push(tracker.commit(&result, &BTreeMap::new())?);
        pairs.push(result);
    }
    Ok(SequenceResult {
        track_set: tracker.track_set,
        frames: out_frames,
        pairs,
    })
}

/// Raw and straightened displacement of one nucleus between two frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub id: String,
    /// Raw-space displacement.
    pub total: Vec3,
    /// Straightened-space displacement, the estimate of internal motion.
    pub internal: Vec3,
    /// `total - internal`, attributed to whole-body repositioning. A
    /// diagnostic only.
    pub external: Vec3,
}

impl Displacement {
    pub fn total_norm(&self) -> f64 {
        self.total.norm()
    }

    pub fn internal_norm(&self) -> f64 {
        self.internal.norm()
    }
}

/// Splits each nucleus's displacement into a straightened-space part and the
/// remainder. Records are paired by id; every current record must have a
/// previous counterpart.
pub fn displacement_decomposition(
    prev: &[NucleusRecord],
    curr: &[NucleusRecord],
    seam_prev: &SeamCellFrame,
    seam_curr: &SeamCellFrame,
    geometry: &GeometryConfig,
) -> Result<Vec<Displacement>, TrackError> {
    let sp = straighten_frame(prev, seam_prev, geometry)?;
    let sc = straighten_frame(curr, seam_curr, geometry)?;
    let by_id: BTreeMap<&str, (&NucleusRecord, &StraightenedCoord)> = sp
        .iter()
        .filter_map(|(r, c)| r.id().map(|id| (id, (r, c))))
        .collect();
    sc.iter()
        .enumerate()
        .map(|(index, (r, c))| {
            let id = r
                .id()
                .ok_or_else(|| TrackError::MissingCorrespondence(format!("current record {index} has no id")))?;
            let (pr, pc) = by_id
                .get(id)
                .ok_or_else(|| TrackError::MissingCorrespondence(format!("{id} is absent from the previous frame")))?;
            let total = r.position - pr.position;
            let internal = c.as_vec3() - pc.as_vec3();
            Ok(Displacement {
                id: id.to_string(),
                total,
                internal,
                external: total - internal,
            })
        })
        .collect()
}
