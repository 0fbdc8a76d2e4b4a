//! Acceptance suite. Every criterion prints one `[PASS]`/`[FAIL]` line; the
//! process exits nonzero if any fail. Oracles here are deliberately naive
//! and share no code with the solvers they check.

use std::collections::{BTreeSet, HashMap};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seamtrack::bench::{
    drift_suite_config, median, qap_scenarios, rigid_suite_config, tracking_suite_config, QapScenario, Suite,
};
use seamtrack_core::assignment::{murty_k_best, solve_lap, Assignment, ConstraintSet, CostMatrix, Gate};
use seamtrack_core::geometry::GeometryConfig;
use seamtrack_core::graphs::{build_distance_graph, delaunay_tetrahedra, rescore_hypotheses};
use seamtrack_core::io::Sequence;
use seamtrack_core::metrics::{centroid_matching, match_centroids, DetectionScore};
use seamtrack_core::synth::generate;
use seamtrack_core::tracking::{displacement_decomposition, CoordinateSpace, Method, PairResult, TrackConfig};
use seamtrack_core::{NucleusRecord, Vec3};
use seamtrack_service::{ConstraintOp, Defaults, EditAction, LogEntry, Op, Session, SessionInit, SessionManager};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("lap oracle equivalence", lap_oracle),
        ("murty oracle equivalence", murty_oracle),
        ("rigid invariance of untwisting", rigid_invariance),
        ("straightened vs raw tracking", straightened_vs_raw),
        ("gate convergence", gate_convergence),
        ("delaunay correctness", delaunay_correctness),
        ("qap rescoring value", qap_rescoring),
        ("constrained re-solve", constrained_resolve),
        ("detection metrics", detection_metrics),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- assignment

/// Cost under lexicographic infinity: (number of infinite terms, finite sum).
fn lex_cost(cost: &CostMatrix, map: &[Option<usize>]) -> (usize, f64) {
    let mut inf = 0;
    let mut sum = 0.0;
    for (i, j) in map.iter().enumerate() {
        let c = match j {
            Some(j) => cost.entry(i, *j),
            None => cost.gate(i),
        };
        if c.is_finite() {
            sum += c;
        } else {
            inf += 1;
        }
    }
    (inf, sum)
}

/// Every one-to-one partial map from tracks to detections.
fn all_maps(n: usize, m: usize) -> Vec<Vec<Option<usize>>> {
    fn go(i: usize, n: usize, m: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        go(i + 1, n, m, used, cur, out);
        cur.pop();
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur.push(Some(j));
                go(i + 1, n, m, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, n, m, &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

/// Integer-valued costs keep every sum exact, so equality can be exact.
fn random_integer_matrix(rng: &mut ChaCha8Rng, max_side: usize) -> CostMatrix {
    let n = rng.random_range(1..=max_side);
    let m = rng.random_range(0..=max_side);
    let p_inf = rng.random_range(0.0..0.6);
    let block = (0..n * m)
        .map(|_| {
            if rng.random_bool(p_inf) {
                f64::INFINITY
            } else {
                rng.random_range(0..=20) as f64
            }
        })
        .collect();
    let gates = (0..n)
        .map(|_| {
            if rng.random_bool(0.4) {
                f64::INFINITY
            } else {
                rng.random_range(1..=25) as f64
            }
        })
        .collect();
    CostMatrix::new(n, m, block, gates).expect("valid matrix")
}

fn check_well_formed(cost: &CostMatrix, a: &Assignment) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for j in a.track_to_detection.iter().flatten() {
        ensure(*j < cost.n_detections() && seen.insert(*j), || format!("detection {j} reused or out of range"))?;
    }
    let free: Vec<usize> = (0..cost.n_detections()).filter(|j| !seen.contains(j)).collect();
    ensure(free == a.unassigned_detections, || "unassigned detections disagree".into())
}

fn lap_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    for case in 0..500 {
        let cost = random_integer_matrix(&mut rng, 7);
        let a = solve_lap(&cost);
        check_well_formed(&cost, &a).map_err(|e| format!("instance {case}: {e}"))?;
        let best = all_maps(cost.n_tracks(), cost.n_detections())
            .iter()
            .map(|map| lex_cost(&cost, map))
            .min_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)))
            .expect("the all-gate map always exists");
        let got = lex_cost(&cost, &a.track_to_detection);
        ensure(got == best, || format!("instance {case}: solver {got:?}, brute force {best:?}"))?;
        let reported = if got.0 == 0 { got.1 } else { f64::INFINITY };
        ensure(a.total_cost == reported, || {
            format!("instance {case}: reported cost {} for {got:?}", a.total_cost)
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("500 instances took {elapsed:?}"))?;
    Ok(format!("500/500 instances optimal in {elapsed:.2?}"))
}

fn random_float_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CostMatrix {
    let block = (0..n * m)
        .map(|_| {
            if rng.random_bool(0.15) {
                f64::INFINITY
            } else {
                rng.random_range(0.0..30.0)
            }
        })
        .collect();
    let gates = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                f64::INFINITY
            } else {
                rng.random_range(5.0..40.0)
            }
        })
        .collect();
    CostMatrix::new(n, m, block, gates).expect("valid matrix")
}

fn murty_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut enumerated = 0;
    for case in 0..200 {
        let cost = random_integer_matrix(&mut rng, 5);
        let mut finite: Vec<f64> = all_maps(cost.n_tracks(), cost.n_detections())
            .iter()
            .map(|map| lex_cost(&cost, map))
            .filter(|c| c.0 == 0)
            .map(|c| c.1)
            .collect();
        finite.sort_by(f64::total_cmp);
        let ranked = murty_k_best(&cost, finite.len() + 10);
        for a in &ranked {
            check_well_formed(&cost, a).map_err(|e| format!("instance {case}: {e}"))?;
        }
        let distinct: BTreeSet<&Vec<Option<usize>>> = ranked.iter().map(|a| &a.track_to_detection).collect();
        ensure(distinct.len() == ranked.len(), || format!("instance {case}: repeated assignment"))?;
        if finite.is_empty() {
            ensure(ranked.len() == 1 && ranked[0].total_cost.is_infinite(), || {
                format!("instance {case}: infeasible problem returned {} solutions", ranked.len())
            })?;
            continue;
        }
        let costs: Vec<f64> = ranked.iter().map(|a| a.total_cost).collect();
        ensure(costs == finite, || {
            format!(
                "instance {case}: {} ranked costs vs {} by enumeration",
                costs.len(),
                finite.len()
            )
        })?;
        for a in &ranked {
            ensure(lex_cost(&cost, &a.track_to_detection) == (0, a.total_cost), || {
                format!("instance {case}: reported cost does not match its assignment")
            })?;
        }
        enumerated += finite.len();
    }
    for case in 0..100 {
        let n = rng.random_range(6..=14);
        let m = rng.random_range(6..=14);
        let cost = random_float_matrix(&mut rng, n, m);
        let five = murty_k_best(&cost, 5);
        let thirty = murty_k_best(&cost, 30);
        ensure(five.len() <= thirty.len() && five[..] == thirty[..five.len()], || {
            format!("larger instance {case}: K=5 is not a prefix of K=30")
        })?;
        ensure(thirty.windows(2).all(|w| w[0].total_cost <= w[1].total_cost), || {
            format!("larger instance {case}: K=30 list is not sorted")
        })?;
    }
    Ok(format!(
        "200 instances, {enumerated} ranked assignments matched enumeration; prefix held on 100 larger instances"
    ))
}

// ------------------------------------------------------------------ geometry

fn rigid_invariance() -> Check {
    let suite = Suite::generate(&rigid_suite_config(3, 50))?;
    let index_of = |t: usize| -> HashMap<String, usize> {
        suite.data.truth_ids(t).into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    };
    let first = index_of(0);
    let mut max_change: f64 = 0.0;
    let mut raw = Vec::new();
    for t in 1..suite.frames.len() {
        let now = index_of(t);
        let before = index_of(t - 1);
        for (id, &j) in &now {
            let s0 = suite.frames[0][first[id]].straightened.ok_or("frame 0 not straightened")?;
            let st = suite.frames[t][j].straightened.ok_or("frame not straightened")?;
            max_change = max_change.max((st.as_vec3() - s0.as_vec3()).amax());
            raw.push((suite.frames[t][j].position - suite.frames[t - 1][before[id]].position).norm());
        }
    }
    let mut internal: f64 = 0.0;
    for t in 1..suite.frames.len() {
        let d = displacement_decomposition(
            &suite.labeled(t - 1),
            &suite.labeled(t),
            &suite.data.seams[t - 1],
            &suite.data.seams[t],
            &GeometryConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        internal = d.iter().fold(internal, |acc, x| acc.max(x.internal_norm()));
    }
    let raw_median = median(&raw);
    let detail = format!(
        "max straightened change {max_change:.2e} um, median raw displacement {raw_median:.1} um, max internal {internal:.2e} um over {} frames",
        suite.frames.len()
    );
    ensure(max_change < 1e-6 && raw_median > 10.0 && internal < 1e-6, || detail.clone())?;
    Ok(detail)
}

// ------------------------------------------------------------------ tracking

/// Fraction of current detections labeled with their true id.
fn accuracy(suite: &Suite, t: usize, result: &PairResult) -> f64 {
    let truth = suite.data.truth_ids(t);
    let correct = result
        .labels()
        .iter()
        .zip(&truth)
        .filter(|(label, id)| label.as_deref() == Some(id.as_str()))
        .count();
    correct as f64 / truth.len() as f64
}

fn suite_median(suite: &Suite, cfg: &TrackConfig) -> Result<f64, String> {
    let mut acc = Vec::new();
    for t in 1..suite.frames.len() {
        let r = suite.solve_pair(t, cfg, &ConstraintSet::new()).map_err(|e| e.to_string())?;
        acc.push(accuracy(suite, t, &r));
    }
    Ok(median(&acc))
}

fn ungated() -> TrackConfig {
    TrackConfig::default()
}

fn straightened_vs_raw() -> Check {
    let start = Instant::now();
    let suite = Suite::generate(&tracking_suite_config(11, 31))?;
    let nuclei = suite.frames[0].len();
    ensure(nuclei == 85 && suite.pair_count() == 30, || {
        format!("suite has {nuclei} nuclei and {} pairs", suite.pair_count())
    })?;
    let straight = suite_median(&suite, &ungated())?;
    let raw = suite_median(
        &suite,
        &TrackConfig {
            coordinate_space: CoordinateSpace::Raw,
            ..ungated()
        },
    )?;
    let elapsed = start.elapsed();
    let detail = format!("median accuracy straightened {straight:.3}, raw {raw:.3} over 30 pairs in {elapsed:.2?}");
    ensure(straight >= 0.95 && raw <= 0.5 && elapsed < Duration::from_secs(60), || detail.clone())?;
    Ok(detail)
}

fn gate_convergence() -> Check {
    let suite = Suite::generate(&tracking_suite_config(11, 31))?;
    let mut max_d: f64 = 0.0;
    for t in 1..suite.frames.len() {
        let curr = suite.data.truth_ids(t);
        for (i, id) in suite.data.truth_ids(t - 1).iter().enumerate() {
            if let Some(j) = curr.iter().position(|c| c == id) {
                let a = suite.frames[t - 1][i].straightened.ok_or("not straightened")?.as_vec3();
                let b = suite.frames[t][j].straightened.ok_or("not straightened")?.as_vec3();
                max_d = max_d.max((a - b).norm());
            }
        }
    }
    let gated = TrackConfig {
        gate_um: 2.0 * max_d,
        ..ungated()
    };
    for t in 1..suite.frames.len() {
        let a = suite.solve_pair(t, &ungated(), &ConstraintSet::new()).map_err(|e| e.to_string())?;
        let b = suite.solve_pair(t, &gated, &ConstraintSet::new()).map_err(|e| e.to_string())?;
        ensure(a.assignment.track_to_detection == b.assignment.track_to_detection, || {
            format!("pair {t} differs at gate {:.2} um", 2.0 * max_d)
        })?;
    }

    let drift = Suite::generate(&drift_suite_config(11, 31, Vec3::new(0.0, 0.0, 15.0)))?;
    let free = suite_median(&drift, &ungated())?;
    let tight = suite_median(
        &drift,
        &TrackConfig {
            gate_um: 10.0,
            ..ungated()
        },
    )?;
    let detail = format!(
        "30/30 pairs identical at gate {:.2} um; 15 um drift median ungated {free:.3} vs gate 10 um {tight:.3}",
        2.0 * max_d
    );
    ensure(tight < free, || detail.clone())?;
    Ok(detail)
}

// -------------------------------------------------------------------- graphs

fn det3(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    a.x * (b.y * c.z - b.z * c.y) - a.y * (b.x * c.z - b.z * c.x) + a.z * (b.x * c.y - b.y * c.x)
}

/// Center of the sphere through four points, by Cramer's rule.
fn circumcenter(p: [Vec3; 4]) -> Option<Vec3> {
    let rows: Vec<Vec3> = (1..4).map(|k| 2.0 * (p[k] - p[0])).collect();
    let rhs: Vec<f64> = (1..4).map(|k| p[k].norm_squared() - p[0].norm_squared()).collect();
    let col = |k: usize| Vec3::new(rows[0][k], rows[1][k], rows[2][k]);
    let r = Vec3::new(rhs[0], rhs[1], rhs[2]);
    let d = det3(col(0), col(1), col(2));
    if d.abs() < 1e-12 {
        return None;
    }
    Some(Vec3::new(
        det3(r, col(1), col(2)) / d,
        det3(col(0), r, col(2)) / d,
        det3(col(0), col(1), r) / d,
    ))
}

fn orient(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    det3(b - a, c - a, d - a)
}

fn delaunay_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tets_checked = 0;
    for cloud in 0..100 {
        let pts: Vec<Vec3> = (0..30)
            .map(|_| Vec3::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)))
            .collect();
        let tets = delaunay_tetrahedra(&pts).map_err(|e| format!("cloud {cloud}: {e}"))?;
        let mut faces: HashMap<[usize; 3], usize> = HashMap::new();
        let mut covered = vec![false; pts.len()];
        for tet in &tets {
            let p = tet.map(|i| pts[i]);
            let c = circumcenter(p).ok_or_else(|| format!("cloud {cloud}: degenerate tetrahedron {tet:?}"))?;
            let r = (p[0] - c).norm();
            for (k, q) in pts.iter().enumerate() {
                if !tet.contains(&k) {
                    let d = (q - c).norm();
                    ensure(d >= r - 1e-9 * r.max(1.0), || {
                        format!("cloud {cloud}: point {k} inside circumsphere of {tet:?} ({d} < {r})")
                    })?;
                }
            }
            for skip in 0..4 {
                let mut f: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| tet[k]).collect();
                f.sort_unstable();
                *faces.entry([f[0], f[1], f[2]]).or_default() += 1;
            }
            for &i in tet {
                covered[i] = true;
            }
            tets_checked += 1;
        }
        ensure(covered.iter().all(|&c| c), || format!("cloud {cloud}: a point is in no tetrahedron"))?;
        // Interior faces are shared by two tetrahedra; a face used once must
        // lie on the convex hull, so the tetrahedra fill the hull.
        for (f, count) in &faces {
            ensure(*count <= 2, || format!("cloud {cloud}: face {f:?} shared by {count}"))?;
            if *count == 1 {
                let signs: Vec<f64> = (0..pts.len())
                    .filter(|k| !f.contains(k))
                    .map(|k| orient(pts[f[0]], pts[f[1]], pts[f[2]], pts[k]))
                    .collect();
                let one_side = signs.iter().all(|&s| s >= -1e-9) || signs.iter().all(|&s| s <= 1e-9);
                ensure(one_side, || format!("cloud {cloud}: boundary face {f:?} is not on the hull"))?;
            }
        }

        let radii = [5.0, 7.5, 10.0, 12.5];
        let mut previous: Option<BTreeSet<(usize, usize)>> = None;
        for r in radii {
            let g = build_distance_graph(&pts, r).map_err(|e| e.to_string())?;
            let edges: BTreeSet<(usize, usize)> = g.edges().iter().map(|e| (e.a, e.b)).collect();
            let brute: BTreeSet<(usize, usize)> = (0..pts.len())
                .flat_map(|i| (i + 1..pts.len()).map(move |k| (i, k)))
                .filter(|&(i, k)| (pts[i] - pts[k]).norm() <= r)
                .collect();
            ensure(edges == brute, || format!("cloud {cloud}: radius {r} graph differs from brute force"))?;
            if let Some(prev) = &previous {
                ensure(prev.is_subset(&edges), || format!("cloud {cloud}: E at radius {r} misses smaller-radius edges"))?;
            }
            previous = Some(edges);
        }
    }
    Ok(format!("{tets_checked} tetrahedra over 100 clouds empty and hull-filling; radius graphs nested"))
}

/// Edge-length distortion of `map` over the radius graph of `prev`.
fn distortion(s: &QapScenario, map: &[Option<usize>], radius: f64) -> f64 {
    let mut total = 0.0;
    for a in 0..s.prev.len() {
        for b in a + 1..s.prev.len() {
            let len = (s.prev[a] - s.prev[b]).norm();
            if len <= radius {
                let (ja, jb) = (map[a].expect("ungated"), map[b].expect("ungated"));
                total += (len - (s.curr[ja] - s.curr[jb]).norm()).abs();
            }
        }
    }
    total
}

fn qap_rescoring() -> Check {
    let (radius, lambda, k) = (7.5, 1.0, 5);
    let scenarios = qap_scenarios(20, 7, k, 4000);
    ensure(scenarios.len() == 20, || format!("only {} scenarios constructed", scenarios.len()))?;
    let mut recovered = 0;
    for (n, s) in scenarios.iter().enumerate() {
        let cost = CostMatrix::from_positions(&s.prev, &s.curr, &Gate::ungated()).map_err(|e| e.to_string())?;
        let truth_cost = lex_cost(&cost, &s.truth);
        let optimum = solve_lap(&cost);
        ensure(truth_cost.0 == 0 && truth_cost.1 > optimum.total_cost, || {
            format!("scenario {n}: truth is LAP optimal")
        })?;
        let top = murty_k_best(&cost, k);
        ensure(top.iter().any(|a| a.track_to_detection == s.truth), || {
            format!("scenario {n}: truth is outside the top {k}")
        })?;
        let score = |a: &Assignment| distortion(s, &a.track_to_detection, radius) + lambda * a.total_cost;
        let best = top
            .iter()
            .min_by(|x, y| score(x).total_cmp(&score(y)))
            .expect("nonempty");
        let gp = build_distance_graph(&s.prev, radius).map_err(|e| e.to_string())?;
        let gc = build_distance_graph(&s.curr, radius).map_err(|e| e.to_string())?;
        let chosen = rescore_hypotheses(&cost, &ConstraintSet::new(), k, &gp, &gc, lambda).map_err(|e| e.to_string())?;
        ensure((score(best) - chosen.score).abs() <= 1e-9 * score(best).max(1.0), || {
            format!("scenario {n}: rescoring chose score {} but {} is attainable", chosen.score, score(best))
        })?;
        if chosen.assignment.track_to_detection == s.truth {
            recovered += 1;
        }
    }
    let detail = format!("{recovered}/20 true matchings recovered (radius {radius} um, lambda {lambda}, k {k})");
    ensure(recovered >= 16, || detail.clone())?;
    Ok(detail)
}

// ------------------------------------------------------------------- service

fn constrained_resolve() -> Check {
    let suite = Suite::generate(&tracking_suite_config(11, 31))?;
    let rescore = TrackConfig {
        method: Method::MurtyRescore,
        ..ungated()
    };
    for cfg in [ungated(), rescore] {
        for t in 1..suite.frames.len() {
            let truth = suite.true_assignment(t);
            let pinned = ConstraintSet::pin_all(&truth);
            let once = suite.solve_pair(t, &cfg, &pinned).map_err(|e| e.to_string())?;
            ensure(once.assignment.track_to_detection == truth, || {
                format!("pair {t}: pinning the truth did not return it ({:?})", cfg.method)
            })?;
            let again = suite
                .solve_pair(t, &cfg, &ConstraintSet::pin_all(&once.assignment.track_to_detection))
                .map_err(|e| e.to_string())?;
            ensure(again.assignment == once.assignment, || format!("pair {t}: re-solve is not a fixpoint"))?;
            let free = suite.solve_pair(t, &cfg, &ConstraintSet::new()).map_err(|e| e.to_string())?;
            let repinned = suite
                .solve_pair(t, &cfg, &ConstraintSet::pin_all(&free.assignment.track_to_detection))
                .map_err(|e| e.to_string())?;
            ensure(repinned.assignment == free.assignment, || {
                format!("pair {t}: pinning the prediction changed it")
            })?;
        }
    }

    let replay = replay_check()?;
    let gnn = predict_latency(TrackConfig {
        coordinate_space: CoordinateSpace::Raw,
        ..ungated()
    })?;
    let murty = predict_latency(TrackConfig {
        coordinate_space: CoordinateSpace::Raw,
        method: Method::MurtyRescore,
        ..ungated()
    })?;
    let detail = format!(
        "pins idempotent on 30 pairs; {replay}; predict n=m=200 gnn {gnn:.1?}, murty k=5 {murty:.1?}"
    );
    ensure(gnn <= Duration::from_millis(200) && murty <= Duration::from_millis(200), || detail.clone())?;
    Ok(detail)
}

fn session_init(seed: u64, n_frames: usize) -> Result<SessionInit, String> {
    let data = generate(&seamtrack_core::synth::SynthConfig {
        seed,
        n_frames,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    Ok(SessionInit {
        sequence: Sequence {
            frame_numbers: (0..n_frames).collect(),
            frames: data.frames,
            seams: Some(data.seams),
        },
        config: TrackConfig::default(),
        geometry: GeometryConfig::default(),
    })
}

fn scripted_ops(s: &Session) -> Vec<Op> {
    let pin = |track: &str, detection| Op::Constrain {
        constraint: ConstraintOp::Pin {
            track: track.into(),
            detection,
        },
    };
    let edit = |frame, edit| Op::Edit { frame, edit };
    let first = s.tracker().matchable()[0].id.clone().expect("seed ids");
    vec![
        pin(&first, 2),
        edit(1, EditAction::Move { index: 4, position: Vec3::new(12.5, -3.25, 7.125) }),
        edit(1, EditAction::Remove { index: 7 }),
        Op::Undo,
        edit(1, EditAction::Add { position: Vec3::new(40.0, 1.0, -2.0) }),
        Op::Redo,
        Op::Configure {
            config: TrackConfig {
                gate_um: 12.0,
                ..TrackConfig::default()
            },
        },
        Op::Commit { force: true },
        edit(
            2,
            EditAction::Split {
                index: 3,
                a: Vec3::new(1.0, 2.0, 3.0),
                b: Vec3::new(1.5, 2.5, 3.5),
            },
        ),
        Op::Constrain {
            constraint: ConstraintOp::Clear,
        },
        Op::Commit { force: true },
    ]
}

/// Replays the log in memory and from disk and compares serialized state.
fn replay_check() -> Result<String, String> {
    let init = session_init(21, 4)?;
    let mut live = Session::create("acceptance", init.clone()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manager = Arc::new(SessionManager::new(Some(dir.path().to_path_buf()), Defaults::default()));
    manager
        .create_with_id("acceptance".into(), init.clone())
        .map_err(|e| e.to_string())?;
    let mut applied = 0;
    for op in scripted_ops(&live) {
        // rejected ops are not logged; both copies must agree on which those are
        let a = live.apply(op.clone(), None).is_ok();
        let b = manager.apply("acceptance", op, None).is_ok();
        ensure(a == b, || "live session and manager disagree on an op".into())?;
        applied += usize::from(a);
    }
    ensure(applied >= 8, || format!("only {applied} scripted ops applied"))?;
    let lines: Vec<String> = live.log().iter().map(|e| serde_json::to_string(e).expect("serializes")).collect();
    let log: Vec<LogEntry> = lines
        .iter()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let replayed = Session::replay("acceptance", init, &log).map_err(|e| e.to_string())?;
    let from_disk = seamtrack_service::manager::read_log(&dir.path().join("acceptance.jsonl")).map_err(|e| e.to_string())?;
    for (what, other) in [("in-memory", &replayed), ("on-disk", &from_disk)] {
        ensure(other.state_json() == live.state_json(), || format!("{what} replay state differs"))?;
        ensure(other.export_csv() == live.export_csv(), || format!("{what} replay export differs"))?;
    }
    Ok(format!("{applied}-op log replays byte-identically from memory and disk"))
}

fn random_frame(rng: &mut ChaCha8Rng, frame: usize, n: usize, ids: bool) -> Vec<NucleusRecord> {
    (0..n)
        .map(|i| {
            let p = Vec3::new(rng.random_range(0.0..180.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            NucleusRecord::new(frame, ids.then(|| format!("N{i:03}")), p)
        })
        .collect()
}

fn predict_latency(cfg: TrackConfig) -> Result<Duration, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let frames = vec![random_frame(&mut rng, 0, 200, true), random_frame(&mut rng, 1, 200, false)];
    let init = SessionInit {
        sequence: Sequence {
            frame_numbers: vec![0, 1],
            frames,
            seams: None,
        },
        config: cfg.clone(),
        geometry: GeometryConfig::default(),
    };
    let mut s = Session::create("latency", init).map_err(|e| e.to_string())?;
    let mut times = Vec::new();
    for rep in 0..9 {
        // a fresh config each time so the prediction cache never answers
        let c = TrackConfig {
            gate_um: 500.0 + rep as f64,
            ..cfg.clone()
        };
        let start = Instant::now();
        let p = s.predict(Some(&c)).map_err(|e| e.to_string())?;
        times.push(start.elapsed());
        ensure(p.matches.len() == 200, || format!("{} matches", p.matches.len()))?;
    }
    times.sort();
    Ok(times[times.len() / 2])
}

// ------------------------------------------------------------------- metrics

/// Smallest matched distance plus `radius` per unmatched truth point, with
/// pairs farther than `radius` disallowed. Returns (objective, matches).
fn brute_matching(det: &[Vec3], truth: &[Vec3], radius: f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for map in all_maps(truth.len(), det.len()) {
        let mut total = 0.0;
        let mut matched = 0;
        let mut ok = true;
        for (i, j) in map.iter().enumerate() {
            match j {
                Some(j) => {
                    let d = (truth[i] - det[*j]).norm();
                    ok &= d <= radius;
                    total += d;
                    matched += 1;
                }
                None => total += radius,
            }
        }
        if ok && total < best.0 {
            best = (total, matched);
        }
    }
    best
}

fn f1_identity(s: &DetectionScore) -> Result<(), String> {
    let (tp, fp, fn_) = (s.true_positives as f64, s.false_positives as f64, s.false_negatives as f64);
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let hm = if s.precision + s.recall > 0.0 {
        2.0 * s.precision * s.recall / (s.precision + s.recall)
    } else {
        0.0
    };
    ensure((s.precision - p).abs() <= 1e-12 && (s.recall - r).abs() <= 1e-12, || format!("{s:?}: P/R off"))?;
    ensure((s.f1 - hm).abs() <= 1e-12, || format!("{s:?}: F1 is not the harmonic mean"))
}

fn detection_metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let radius = 3.0;
    let mut instances = 0;
    for case in 0..1000 {
        let n_truth = rng.random_range(0..=7);
        let n_det = rng.random_range(0..=7);
        let mut cloud = |n: usize| -> Vec<Vec3> {
            (0..n)
                .map(|_| Vec3::new(rng.random_range(0.0..8.0), rng.random_range(0.0..8.0), rng.random_range(0.0..8.0)))
                .collect()
        };
        let truth = cloud(n_truth);
        let det = cloud(n_det);
        let pairs = centroid_matching(&det, &truth, radius);
        let objective: f64 =
            pairs.iter().map(|&(t, d)| (truth[t] - det[d]).norm()).sum::<f64>() + radius * (truth.len() - pairs.len()) as f64;
        let (best, matched) = brute_matching(&det, &truth, radius);
        ensure((objective - best).abs() <= 1e-9, || {
            format!("instance {case}: matching objective {objective}, brute force {best}")
        })?;
        let score = match_centroids(&det, &truth, radius);
        ensure(
            score.true_positives == matched
                && score.false_positives == det.len() - matched
                && score.false_negatives == truth.len() - matched,
            || format!("instance {case}: counts {score:?}, brute force matched {matched}"),
        )?;
        f1_identity(&score).map_err(|e| format!("instance {case}: {e}"))?;
        instances += 1;
    }
    // two detections near one truth point, the other truth point near nothing
    let truth = [Vec3::zeros(), Vec3::new(50.0, 0.0, 0.0)];
    let det = [Vec3::new(0.5, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)];
    let s = match_centroids(&det, &truth, radius);
    ensure((s.true_positives, s.false_positives, s.false_negatives) == (1, 1, 1), || {
        format!("ambiguous layout scored {s:?}")
    })?;
    for _ in 0..10_000 {
        let s = DetectionScore::from_counts(rng.random_range(0..500), rng.random_range(0..500), rng.random_range(0..500));
        f1_identity(&s)?;
    }
    Ok(format!("{instances} instances match brute force; F1 identity held on {} scores", instances + 10_000))
}
