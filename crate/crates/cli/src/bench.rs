//! Simulator scenarios shared by the `bench` subcommand and the acceptance
//! tests. Scenario builders return data and measurements; pass/fail checks
//! live with the callers.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seamtrack_core::assignment::{murty_k_best, ConstraintSet, CostMatrix, Gate};
use seamtrack_core::geometry::GeometryConfig;
use seamtrack_core::graphs::{build_distance_graph, rescore_hypotheses};
use seamtrack_core::metrics::frame_accuracy;
use seamtrack_core::synth::{generate, BandDrift, SynthConfig, SynthDataset};
use seamtrack_core::tracking::{
    space_position, straighten_sequence, track_frame_pair, CoordinateSpace, PairResult, TrackConfig, TrackError,
};
use seamtrack_core::{NucleusRecord, Vec3};

/// Simulator settings for the tracking suite: rigid repositioning, Brownian
/// internal motion, and 1% elongation per frame.
pub fn tracking_suite_config(seed: u64, n_frames: usize) -> SynthConfig {
    SynthConfig {
        seed,
        n_frames,
        brownian_sigma_um: 1.0,
        elongation_rate: 0.01,
        ..SynthConfig::default()
    }
}

/// The tracking suite with one band drifting coherently on odd frames.
pub fn drift_suite_config(seed: u64, n_frames: usize, drift: Vec3) -> SynthConfig {
    SynthConfig {
        band_drift: Some(BandDrift {
            band: 1,
            offset_um: [drift.x, drift.y, drift.z],
        }),
        ..tracking_suite_config(seed, n_frames)
    }
}

/// A generated dataset with every frame straightened.
pub struct Suite {
    pub data: SynthDataset,
    pub frames: Vec<Vec<NucleusRecord>>,
}

impl Suite {
    pub fn generate(cfg: &SynthConfig) -> Result<Self, String> {
        let data = generate(cfg).map_err(|e| e.to_string())?;
        let frames = straighten_sequence(&data.frames, &data.seams, &GeometryConfig::default()).map_err(|e| e.to_string())?;
        Ok(Self { data, frames })
    }

    pub fn pair_count(&self) -> usize {
        self.frames.len().saturating_sub(1)
    }

    /// Frame `t` with every record carrying its true id.
    pub fn labeled(&self, t: usize) -> Vec<NucleusRecord> {
        self.frames[t]
            .iter()
            .zip(self.data.truth_ids(t))
            .map(|(r, id)| NucleusRecord {
                id: Some(id),
                ..r.clone()
            })
            .collect()
    }

    /// Solves pair `t-1 → t` from the true labels of frame `t-1`.
    pub fn solve_pair(&self, t: usize, cfg: &TrackConfig, constraints: &ConstraintSet) -> Result<PairResult, TrackError> {
        track_frame_pair(&self.labeled(t - 1), &self.frames[t], cfg, constraints)
    }

    pub fn pair_accuracy(&self, t: usize, result: &PairResult) -> f64 {
        let prev: HashSet<String> = self.data.truth_ids(t - 1).into_iter().collect();
        frame_accuracy(&result.labels(), &self.data.truth_ids(t), &prev)
    }

    /// Per-pair accuracy of `cfg` over the whole suite.
    pub fn accuracies(&self, cfg: &TrackConfig) -> Result<Vec<f64>, TrackError> {
        (1..self.frames.len())
            .map(|t| Ok(self.pair_accuracy(t, &self.solve_pair(t, cfg, &ConstraintSet::new())?)))
            .collect()
    }

    /// The true assignment of pair `t-1 → t` (previous index → current index).
    pub fn true_assignment(&self, t: usize) -> Vec<Option<usize>> {
        let curr = self.data.truth_ids(t);
        self.data
            .truth_ids(t - 1)
            .iter()
            .map(|id| curr.iter().position(|c| c == id))
            .collect()
    }

    /// Largest true displacement over all pairs, in `space`.
    pub fn max_displacement(&self, space: CoordinateSpace) -> Result<f64, TrackError> {
        let mut max: f64 = 0.0;
        for t in 1..self.frames.len() {
            for (i, j) in self.true_assignment(t).into_iter().enumerate() {
                if let Some(j) = j {
                    let a = space_position(&self.frames[t - 1][i], space, i)?;
                    let b = space_position(&self.frames[t][j], space, j)?;
                    max = max.max((a - b).norm());
                }
            }
        }
        Ok(max)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    seamtrack_core::metrics::quantile(&v, 0.5)
}

/// One frame pair whose true matching is among the best few LAP solutions
/// without being the best.
#[derive(Debug, Clone)]
pub struct QapScenario {
    pub prev: Vec<Vec3>,
    pub curr: Vec<Vec3>,
    pub truth: Vec<Option<usize>>,
    /// Zero-based rank of the truth in the LAP ranking.
    pub truth_rank: usize,
}

/// Dense simulator settings for graph-based rescoring: a short body keeps
/// neighbouring nuclei within the graph radius.
pub fn qap_suite_config(seed: u64, drift: Vec3, band: usize) -> SynthConfig {
    SynthConfig {
        seed,
        n_frames: 2,
        body_length_um: 90.0,
        brownian_sigma_um: 0.6,
        band_drift: Some(BandDrift {
            band,
            offset_um: [drift.x, drift.y, drift.z],
        }),
        ..SynthConfig::default()
    }
}

/// Samples coordinated-drift pairs until `count` have their truth at LAP
/// rank 1..k (zero-based), or `max_attempts` pairs were tried.
pub fn qap_scenarios(count: usize, seed: u64, k: usize, max_attempts: usize) -> Vec<QapScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..max_attempts {
        if out.len() >= count {
            break;
        }
        let magnitude = rng.random_range(1.5..4.5);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let drift = Vec3::new(magnitude * angle.cos(), magnitude * angle.sin(), 0.0);
        let cfg = qap_suite_config(rng.random(), drift, rng.random_range(0..4));
        let Ok(suite) = Suite::generate(&cfg) else { continue };
        let space = CoordinateSpace::Straightened;
        let pos = |t: usize| -> Vec<Vec3> {
            suite.frames[t]
                .iter()
                .enumerate()
                .map(|(i, r)| space_position(r, space, i).expect("straightened"))
                .collect()
        };
        let (prev, curr) = (pos(0), pos(1));
        let truth = suite.true_assignment(1);
        let cost = CostMatrix::from_positions(&prev, &curr, &Gate::Uniform(f64::INFINITY)).expect("finite positions");
        let ranked = murty_k_best(&cost, k);
        let Some(rank) = ranked.iter().position(|a| a.track_to_detection == truth) else { continue };
        if rank >= 1 {
            out.push(QapScenario {
                prev,
                curr,
                truth,
                truth_rank: rank,
            });
        }
    }
    out
}

/// Whether quadratic rescoring of the top `k` LAP solutions picks the truth.
pub fn qap_recovers(s: &QapScenario, radius_um: f64, lambda: f64, k: usize) -> bool {
    let cost = CostMatrix::from_positions(&s.prev, &s.curr, &Gate::Uniform(f64::INFINITY)).expect("finite positions");
    let gp = build_distance_graph(&s.prev, radius_um).expect("valid radius");
    let gc = build_distance_graph(&s.curr, radius_um).expect("valid radius");
    let best = rescore_hypotheses(&cost, &ConstraintSet::new(), k, &gp, &gc, lambda).expect("unconstrained");
    best.assignment.track_to_detection == s.truth
}

/// Median time of `reps` predictions between two random frames of `n`
/// nuclei each.
pub fn predict_latency(n: usize, cfg: &TrackConfig, reps: usize, seed: u64) -> Duration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frame = |t: usize, ids: bool| -> Vec<NucleusRecord> {
        (0..n)
            .map(|i| {
                let p = Vec3::new(
                    rng.random_range(0.0..180.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                );
                NucleusRecord::new(t, ids.then(|| format!("T{i:03}")), p)
            })
            .collect()
    };
    let prev = frame(0, true);
    let curr = frame(1, false);
    let cfg = TrackConfig {
        coordinate_space: CoordinateSpace::Raw,
        ..cfg.clone()
    };
    let mut times: Vec<Duration> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            track_frame_pair(&prev, &curr, &cfg, &ConstraintSet::new()).expect("valid pair");
            start.elapsed()
        })
        .collect();
    times.sort();
    times[times.len() / 2]
}

/// Rigid repositioning only: no internal motion, no elongation.
pub fn rigid_suite_config(seed: u64, n_frames: usize) -> SynthConfig {
    SynthConfig {
        seed,
        n_frames,
        brownian_sigma_um: 0.0,
        elongation_rate: 0.0,
        ..SynthConfig::default()
    }
}

/// Displacement statistics of a rigid-only suite.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidReport {
    /// Largest change of any straightened coordinate relative to frame 0.
    pub max_straightened_change: f64,
    /// Median raw displacement between consecutive frames.
    pub median_raw_displacement: f64,
    /// Largest straightened displacement between consecutive frames.
    pub max_internal_displacement: f64,
}

pub fn rigid_report(suite: &Suite) -> Result<RigidReport, TrackError> {
    let geometry = GeometryConfig::default();
    let mut max_change: f64 = 0.0;
    for t in 1..suite.frames.len() {
        let curr = suite.data.truth_ids(t);
        for (r0, id) in suite.frames[0].iter().zip(suite.data.truth_ids(0)) {
            let j = curr.iter().position(|c| *c == id).expect("no dropouts");
            let a = r0.straightened.expect("straightened").as_vec3();
            let b = suite.frames[t][j].straightened.expect("straightened").as_vec3();
            max_change = max_change.max((a - b).amax());
        }
    }
    let mut raw = Vec::new();
    let mut internal: f64 = 0.0;
    for t in 1..suite.frames.len() {
        let d = seamtrack_core::tracking::displacement_decomposition(
            &suite.labeled(t - 1),
            &suite.labeled(t),
            &suite.data.seams[t - 1],
            &suite.data.seams[t],
            &geometry,
        )?;
        for x in d {
            raw.push(x.total_norm());
            internal = internal.max(x.internal_norm());
        }
    }
    Ok(RigidReport {
        max_straightened_change: max_change,
        median_raw_displacement: median(&raw),
        max_internal_displacement: internal,
    })
}

/// Runs every scenario and formats the measurements, one line each.
pub fn report(quick: bool, seed: u64) -> String {
    let mut out = String::new();
    let mut line = |name: &str, value: String| out.push_str(&format!("{name:<34} {value}\n"));
    let n_frames = if quick { 11 } else { 31 };

    let ungated = TrackConfig::default();
    let raw = TrackConfig {
        coordinate_space: CoordinateSpace::Raw,
        ..TrackConfig::default()
    };
    match Suite::generate(&tracking_suite_config(seed, n_frames)) {
        Ok(suite) => {
            let start = Instant::now();
            let s = suite.accuracies(&ungated).map(|a| median(&a));
            let r = suite.accuracies(&raw).map(|a| median(&a));
            line(
                "tracking median (straightened)",
                format!("{:.3} over {} pairs", s.unwrap_or(f64::NAN), suite.pair_count()),
            );
            line("tracking median (raw)", format!("{:.3}", r.unwrap_or(f64::NAN)));
            line("tracking suite time", format!("{:?}", start.elapsed()));
            if let Ok(max_d) = suite.max_displacement(CoordinateSpace::Straightened) {
                let gated = TrackConfig {
                    gate_um: 2.0 * max_d,
                    ..TrackConfig::default()
                };
                let same = (1..suite.frames.len())
                    .filter(|&t| {
                        let a = suite.solve_pair(t, &ungated, &ConstraintSet::new());
                        let b = suite.solve_pair(t, &gated, &ConstraintSet::new());
                        matches!((a, b), (Ok(a), Ok(b)) if a.assignment.track_to_detection == b.assignment.track_to_detection)
                    })
                    .count();
                line(
                    "gate 2x max displacement",
                    format!("{same}/{} pairs identical (gate {:.2} um)", suite.pair_count(), 2.0 * max_d),
                );
            }
        }
        Err(e) => line("tracking suite", format!("failed: {e}")),
    }

    match Suite::generate(&drift_suite_config(seed, n_frames, Vec3::new(0.0, 0.0, 15.0))) {
        Ok(suite) => {
            let gated = TrackConfig {
                gate_um: 10.0,
                ..TrackConfig::default()
            };
            let u = suite.accuracies(&ungated).map(|a| median(&a)).unwrap_or(f64::NAN);
            let g = suite.accuracies(&gated).map(|a| median(&a)).unwrap_or(f64::NAN);
            line("15 um drift: ungated / gate 10", format!("{u:.3} / {g:.3}"));
        }
        Err(e) => line("drift suite", format!("failed: {e}")),
    }

    let n_qap = if quick { 10 } else { 20 };
    let start = Instant::now();
    let scenarios = qap_scenarios(n_qap, seed, 5, 2000);
    let recovered = scenarios.iter().filter(|s| qap_recovers(s, 7.5, 1.0, 5)).count();
    line(
        "quadratic rescoring recovery",
        format!("{recovered}/{} ({:?})", scenarios.len(), start.elapsed()),
    );

    let rigid_frames = if quick { 10 } else { 50 };
    match Suite::generate(&rigid_suite_config(seed, rigid_frames)).map(|s| rigid_report(&s)) {
        Ok(Ok(r)) => {
            line("rigid: max straightened change", format!("{:.3e} um", r.max_straightened_change));
            line("rigid: median raw displacement", format!("{:.2} um", r.median_raw_displacement));
            line("rigid: max internal displacement", format!("{:.3e} um", r.max_internal_displacement));
        }
        Ok(Err(e)) => line("rigid suite", format!("failed: {e}")),
        Err(e) => line("rigid suite", format!("failed: {e}")),
    }

    let rescore = TrackConfig {
        method: seamtrack_core::tracking::Method::MurtyRescore,
        ..TrackConfig::default()
    };
    line("predict n=m=200 (gnn)", format!("{:?}", predict_latency(200, &ungated, 5, seed)));
    line("predict n=m=200 (murty k=5)", format!("{:?}", predict_latency(200, &rescore, 5, seed)));
    out
}
