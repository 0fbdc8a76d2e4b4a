//! Spatial graphs over nuclei and quadratic (edge-consistency) rescoring of
//! assignment hypotheses.

mod delaunay;

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{murty_k_best_constrained, Assignment, AssignmentError, ConstraintSet, CostMatrix};
use crate::Vec3;

pub use delaunay::delaunay_tetrahedra;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("non-finite point coordinate")]
    NonFinite,
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Radius,
    Delaunay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraphBuilder {
    Radius(f64),
    Delaunay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Undirected graph over a frame's points. Edges are stored once with
/// `a < b`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameGraph {
    positions: Vec<Vec3>,
    edges: Vec<GraphEdge>,
    builder: GraphBuilder,
}

impl FrameGraph {
    fn from_pairs(positions: &[Vec3], mut pairs: Vec<(usize, usize)>, builder: GraphBuilder) -> Self {
        for p in &mut pairs {
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let edges = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| GraphEdge {
                a,
                b,
                length: (positions[a] - positions[b]).norm(),
            })
            .collect();
        Self {
            positions: positions.to_vec(),
            edges,
            builder,
        }
    }

    /// A graph with vertices but no edges.
    pub fn empty(positions: &[Vec3]) -> Self {
        Self::from_pairs(positions, Vec::new(), GraphBuilder::Radius(f64::MIN_POSITIVE))
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn builder(&self) -> GraphBuilder {
        self.builder
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search_by(|e| (e.a, e.b).cmp(&key)).is_ok()
    }
}

/// Connects every pair of points at most `r` apart.
pub fn build_distance_graph(points: &[Vec3], r: f64) -> Result<FrameGraph, GraphError> {
    if !(r > 0.0) {
        return Err(GraphError::InvalidRadius(r));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(GraphError::NonFinite);
    }
    let mut pairs = Vec::new();
    for i in 0..points.len() {
        for k in i + 1..points.len() {
            if (points[i] - points[k]).norm() <= r {
                pairs.push((i, k));
            }
        }
    }
    Ok(FrameGraph::from_pairs(points, pairs, GraphBuilder::Radius(r)))
}

/// The edge skeleton of the 3D Delaunay tetrahedralization.
pub fn build_delaunay_graph(points: &[Vec3]) -> Result<FrameGraph, GraphError> {
    let tets = delaunay_tetrahedra(points)?;
    Ok(FrameGraph::from_pairs(points, tetra_edges(&tets), GraphBuilder::Delaunay))
}

/// Delaunay graph built on points nudged by at most `amplitude` per axis
/// (deterministic), with edge lengths measured on the original points.
pub fn build_delaunay_graph_jittered(points: &[Vec3], amplitude: f64, seed: u64) -> Result<FrameGraph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let moved: Vec<Vec3> = points
        .iter()
        .map(|p| p + Vec3::from_fn(|_, _| rng.random_range(-amplitude..=amplitude)))
        .collect();
    let tets = delaunay_tetrahedra(&moved)?;
    Ok(FrameGraph::from_pairs(points, tetra_edges(&tets), GraphBuilder::Delaunay))
}

fn tetra_edges(tets: &[[usize; 4]]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(tets.len() * 6);
    for t in tets {
        for i in 0..4 {
            for k in i + 1..4 {
                pairs.push((t[i], t[k]));
            }
        }
    }
    pairs
}

fn default_radius() -> f64 {
    7.5
}

fn default_lambda() -> f64 {
    1.0
}

fn default_jitter() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(default = "GraphConfig::default_kind")]
    pub kind: GraphKind,
    #[serde(default = "default_radius")]
    pub radius_um: f64,
    /// Weight of the LAP cost in the quadratic score.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Perturb points before Delaunay construction instead of failing on
    /// degenerate input.
    #[serde(default)]
    pub jitter: bool,
    #[serde(default = "default_jitter")]
    pub jitter_um: f64,
}

impl GraphConfig {
    fn default_kind() -> GraphKind {
        GraphKind::Radius
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.radius_um > 0.0) || !self.radius_um.is_finite() {
            return Err(format!("graph.radius_um must be positive and finite, got {}", self.radius_um));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(format!("graph.lambda must be non-negative and finite, got {}", self.lambda));
        }
        if !(self.jitter_um > 0.0) {
            return Err(format!("graph.jitter_um must be positive, got {}", self.jitter_um));
        }
        Ok(())
    }

    /// Builds the configured graph. A degenerate Delaunay input falls back to
    /// the radius graph; the returned flag reports whether that happened.
    pub fn build(&self, points: &[Vec3]) -> Result<(FrameGraph, bool), GraphError> {
        match self.kind {
            GraphKind::Radius => Ok((build_distance_graph(points, self.radius_um)?, false)),
            GraphKind::Delaunay => {
                let built = if self.jitter {
                    build_delaunay_graph_jittered(points, self.jitter_um, 0)
                } else {
                    build_delaunay_graph(points)
                };
                match built {
                    Ok(g) => Ok((g, false)),
                    Err(GraphError::DegenerateInput(_)) => Ok((build_distance_graph(points, self.radius_um)?, true)),
                    Err(e) => Err(e),
                }
            }
        }
    }
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            kind: GraphKind::Radius,
            radius_um: default_radius(),
            lambda: default_lambda(),
            jitter: false,
            jitter_um: default_jitter(),
        }
    }
}

/// Edge-length distortion of `a` over the previous frame's graph.
///
/// A previous edge with both endpoints matched costs the absolute difference
/// between its length and the distance between the two matched detections.
/// An edge with an unmatched endpoint costs the gate of each unmatched
/// endpoint.
pub fn quadratic_term(a: &Assignment, cost: &CostMatrix, prev: &FrameGraph, curr: &FrameGraph) -> Result<f64, GraphError> {
    if prev.len() != cost.n_tracks() || a.n_tracks() != cost.n_tracks() {
        return Err(GraphError::IndexMismatch(format!(
            "previous graph has {} vertices, cost matrix {} tracks, assignment {} tracks",
            prev.len(),
            cost.n_tracks(),
            a.n_tracks()
        )));
    }
    if curr.len() != cost.n_detections() {
        return Err(GraphError::IndexMismatch(format!(
            "current graph has {} vertices, cost matrix {} detections",
            curr.len(),
            cost.n_detections()
        )));
    }
    let mut total = 0.0;
    for e in prev.edges() {
        match (a.detection_of(e.a), a.detection_of(e.b)) {
            (Some(ja), Some(jb)) => {
                let d = (curr.positions[ja] - curr.positions[jb]).norm();
                total += (e.length - d).abs();
            }
            (ja, jb) => {
                if ja.is_none() {
                    total += cost.gate(e.a);
                }
                if jb.is_none() {
                    total += cost.gate(e.b);
                }
            }
        }
    }
    Ok(total)
}

/// Quadratic term plus `lambda` times the assignment's LAP cost.
pub fn qap_cost(
    a: &Assignment,
    cost: &CostMatrix,
    prev: &FrameGraph,
    curr: &FrameGraph,
    lambda: f64,
) -> Result<f64, GraphError> {
    Ok(quadratic_term(a, cost, prev, curr)? + weighted(lambda, a.total_cost))
}

// keeps an infinite LAP cost from turning a zero weight into NaN
fn weighted(lambda: f64, lap_cost: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        lambda * lap_cost
    }
}

/// A ranked LAP solution with its quadratic score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Zero-based position in the LAP ranking.
    pub rank: usize,
    pub assignment: Assignment,
    pub lap_cost: f64,
    pub quadratic: f64,
    pub score: f64,
}

fn hypothesis_order(x: &Hypothesis, y: &Hypothesis) -> Ordering {
    x.score
        .total_cmp(&y.score)
        .then(x.lap_cost.total_cmp(&y.lap_cost))
        .then_with(|| x.assignment.track_to_detection.cmp(&y.assignment.track_to_detection))
}

/// Scores the `k` best LAP solutions; output is in LAP rank order.
pub fn score_hypotheses(
    cost: &CostMatrix,
    constraints: &ConstraintSet,
    k: usize,
    prev: &FrameGraph,
    curr: &FrameGraph,
    lambda: f64,
) -> Result<Vec<Hypothesis>, GraphError> {
    murty_k_best_constrained(cost, constraints, k.max(1))?
        .into_iter()
        .enumerate()
        .map(|(rank, assignment)| {
            let quadratic = quadratic_term(&assignment, cost, prev, curr)?;
            let lap_cost = assignment.total_cost;
            Ok(Hypothesis {
                rank,
                score: quadratic + weighted(lambda, lap_cost),
                lap_cost,
                quadratic,
                assignment,
            })
        })
        .collect()
}

/// The hypothesis with the lowest quadratic score among the `k` best LAP
/// solutions. Ties go to the lower LAP cost, then the lexicographically
/// smaller assignment.
pub fn rescore_hypotheses(
    cost: &CostMatrix,
    constraints: &ConstraintSet,
    k: usize,
    prev: &FrameGraph,
    curr: &FrameGraph,
    lambda: f64,
) -> Result<Hypothesis, GraphError> {
    let scored = score_hypotheses(cost, constraints, k, prev, curr, lambda)?;
    Ok(scored
        .into_iter()
        .min_by(hypothesis_order)
        .expect("the optimum is always ranked"))
}
