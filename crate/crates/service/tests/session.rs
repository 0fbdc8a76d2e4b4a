mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seamtrack_core::geometry::GeometryConfig;
use seamtrack_core::io::{format_tracks, track_rows, Sequence};
use seamtrack_core::tracking::{track_sequence, CoordinateSpace, Method, TrackConfig};
use seamtrack_core::{NucleusRecord, Vec3};
use seamtrack_service::{ConstraintOp, EditAction, Op, ServiceError, Session, SessionInit};

use common::{dataset, init_from, session};

fn pin(track: &str, detection: usize) -> Op {
    Op::Constrain {
        constraint: ConstraintOp::Pin {
            track: track.into(),
            detection,
        },
    }
}

fn edit(frame: usize, edit: EditAction) -> Op {
    Op::Edit { frame, edit }
}

#[test]
fn session_without_edits_matches_batch_tracking() {
    let data = dataset(3, 10);
    let cfg = TrackConfig::default();
    let mut s = Session::create("s", init_from(&data, cfg.clone())).unwrap();
    while !s.is_finished() {
        s.apply(Op::Commit { force: true }, None).unwrap();
    }
    let batch = track_sequence(&data.frames, Some(&data.seams), &cfg, &GeometryConfig::default()).unwrap();
    let numbers: Vec<usize> = (0..10).collect();
    let expected = format_tracks(&track_rows(&batch.frames, &numbers, &batch.track_set));
    assert_eq!(s.export_csv(), expected);
    assert_eq!(s.tracker().track_set(), &batch.track_set);
    assert_eq!(s.revision(), 9);
}

#[test]
fn revision_counts_mutations_only() {
    let mut s = session(1, 3);
    assert_eq!(s.revision(), 0);
    s.predict(None).unwrap();
    assert_eq!(s.revision(), 0);
    s.apply(edit(1, EditAction::Add { position: Vec3::new(1.0, 2.0, 3.0) }), None).unwrap();
    s.apply(Op::Undo, None).unwrap();
    s.apply(Op::Redo, None).unwrap();
    assert_eq!(s.revision(), 3);
    let failed = s.apply(Op::Redo, None);
    assert_eq!(failed, Err(ServiceError::NothingTo("redo")));
    assert_eq!(s.revision(), 3);
    assert_eq!(s.log().iter().map(|e| e.revision).collect::<Vec<_>>(), vec![1, 2, 3]);
}

#[test]
fn remove_then_undo_restores_the_detection_list_exactly() {
    let mut s = session(2, 3);
    let before = serde_json::to_string(s.frame(1)).unwrap();
    let n = s.frame(1).len();
    s.apply(edit(1, EditAction::Remove { index: 4 }), None).unwrap();
    assert_eq!(s.frame(1).len(), n - 1);
    s.apply(Op::Undo, None).unwrap();
    assert_eq!(serde_json::to_string(s.frame(1)).unwrap(), before);
    s.apply(Op::Redo, None).unwrap();
    assert_eq!(s.frame(1).len(), n - 1);
}

#[test]
fn add_move_and_split_change_counts_and_origins() {
    let mut s = session(4, 3);
    let n = s.frame(2).len();
    let p = s.frame(2)[0].position;
    s.apply(edit(2, EditAction::Split { index: 0, a: p, b: p + Vec3::new(1.0, 0.0, 0.0) }), None)
        .unwrap();
    assert_eq!(s.frame(2).len(), n + 1);
    s.apply(edit(2, EditAction::Move { index: 1, position: p + Vec3::new(0.0, 1.0, 0.0) }), None)
        .unwrap();
    s.apply(edit(2, EditAction::Add { position: p }), None).unwrap();
    let origins: Vec<_> = s.frame(2).iter().map(|r| r.origin).collect();
    use seamtrack_core::OriginTag::*;
    assert_eq!(origins[0], UserEdited);
    assert_eq!(origins[1], UserEdited);
    assert_eq!(origins[n], UserAdded);
    assert_eq!(origins[n + 1], UserAdded);
    // edited detections are straightened again
    assert!(s.frame(2).iter().all(|r| r.straightened.is_some()));
}

#[test]
fn committed_frames_and_bad_indices_are_rejected() {
    let mut s = session(5, 3);
    let r = s.apply(edit(0, EditAction::Remove { index: 0 }), None);
    assert_eq!(r, Err(ServiceError::FrameCommitted { frame: 0 }));
    let len = s.frame(1).len();
    let r = s.apply(edit(1, EditAction::Remove { index: len }), None);
    assert_eq!(r, Err(ServiceError::IndexOutOfRange { index: len, len }));
    let r = s.apply(edit(7, EditAction::Remove { index: 0 }), None);
    assert_eq!(r, Err(ServiceError::UnknownFrame { frame: 7 }));
    s.apply(Op::Commit { force: true }, None).unwrap();
    let r = s.apply(edit(1, EditAction::Remove { index: 0 }), None);
    assert_eq!(r, Err(ServiceError::FrameCommitted { frame: 1 }));
    assert_eq!(s.revision(), 1);
}

#[test]
fn stale_expected_revision_is_a_conflict() {
    let mut s = session(6, 3);
    s.apply(edit(1, EditAction::Add { position: Vec3::zeros() }), Some(0)).unwrap();
    let r = s.apply(edit(1, EditAction::Add { position: Vec3::zeros() }), Some(0));
    assert_eq!(r, Err(ServiceError::Conflict { expected: 0, actual: 1 }));
    assert_eq!(s.revision(), 1);
}

#[test]
fn contradictory_pins_are_infeasible() {
    let mut s = session(7, 3);
    s.apply(pin("A01", 0), None).unwrap();
    let r = s.apply(pin("A02", 0), None);
    assert!(matches!(r, Err(ServiceError::InfeasibleConstraints(_))), "{r:?}");
    assert_eq!(r.unwrap_err().status(), 409);
    // the rejected pin left the constraints untouched
    assert_eq!(s.constraints().pins.len(), 1);
}

#[test]
fn pinning_the_prediction_leaves_it_unchanged() {
    let mut s = session(8, 3);
    let p = s.predict(None).unwrap();
    for m in &p.matches {
        s.apply(pin(&m.track, m.detection), None).unwrap();
    }
    let q = s.predict(None).unwrap();
    assert_eq!(p.matches, q.matches);
    assert_eq!(p.dimmed, q.dimmed);
}

#[test]
fn pin_overrides_the_solver_and_moves_the_displaced_track() {
    let mut s = session(9, 3);
    let p = s.predict(None).unwrap();
    let a = &p.matches[0];
    let b = &p.matches[1];
    s.apply(pin(&a.track, b.detection), None).unwrap();
    let q = s.predict(None).unwrap();
    let got = q.matches.iter().find(|m| m.track == a.track).unwrap();
    assert_eq!(got.detection, b.detection);
    let other = q.matches.iter().find(|m| m.track == b.track).map(|m| m.detection);
    assert_ne!(other, Some(b.detection));
}

#[test]
fn uncovered_detections_need_a_name_or_force() {
    let mut s = session(10, 3);
    let far = s.frame(1)[0].position + Vec3::new(0.0, 0.0, 0.5);
    s.apply(edit(1, EditAction::Add { position: far }), None).unwrap();
    let gated = serde_json::json!({"gate_um": 4.0});
    let cfg = seamtrack_service::patch_config(s.config(), &gated).unwrap();
    s.apply(Op::Configure { config: cfg }, None).unwrap();
    let p = s.predict(None).unwrap();
    assert!(!p.new.is_empty());
    let new = p.new[0].detection;
    let r = s.apply(Op::Commit { force: false }, None);
    assert!(matches!(r, Err(ServiceError::UncoveredDetections { .. })), "{r:?}");
    for n in &p.new {
        let name = if n.detection == new { "X99".to_string() } else { format!("Y{:02}", n.detection) };
        s.apply(pin(&name, n.detection), None).unwrap();
    }
    s.apply(Op::Commit { force: false }, None).unwrap();
    assert!(s.tracker().has_track("X99"));
    assert_eq!(s.frame(1)[new].id.as_deref(), Some("X99"));
    assert!(s.export_csv().contains(",X99,matched,"));
}

#[test]
fn forced_commit_leaves_new_detections_unnamed() {
    let mut s = session(11, 3);
    s.apply(edit(1, EditAction::Add { position: Vec3::new(500.0, 500.0, 500.0) }), None)
        .unwrap();
    let cfg = seamtrack_service::patch_config(s.config(), &serde_json::json!({"gate_um": 5.0})).unwrap();
    s.apply(Op::Configure { config: cfg }, None).unwrap();
    s.apply(Op::Commit { force: true }, None).unwrap();
    let last = s.frame(1).last().unwrap();
    assert_eq!(last.id, None);
    assert!(s.export_csv().contains(",,new,"));
}

#[test]
fn forbid_and_dim_shape_the_prediction() {
    let mut s = session(12, 3);
    let p = s.predict(None).unwrap();
    let m = p.matches[3].clone();
    s.apply(
        Op::Constrain {
            constraint: ConstraintOp::Forbid {
                track: m.track.clone(),
                detection: m.detection,
            },
        },
        None,
    )
    .unwrap();
    let q = s.predict(None).unwrap();
    assert!(!q.matches.iter().any(|x| x.track == m.track && x.detection == m.detection));
    let other = p.matches[5].track.clone();
    s.apply(Op::Constrain { constraint: ConstraintOp::Dim { track: other.clone() } }, None)
        .unwrap();
    let q = s.predict(None).unwrap();
    assert!(q.dimmed.contains(&other));
    let r = s.apply(Op::Constrain { constraint: ConstraintOp::Dim { track: "nope".into() } }, None);
    assert_eq!(r, Err(ServiceError::UnknownTrack("nope".into())));
    s.apply(Op::Constrain { constraint: ConstraintOp::Clear }, None).unwrap();
    assert_eq!(s.predict(None).unwrap().matches, p.matches);
}

#[test]
fn removing_a_detection_shifts_pins_on_later_ones() {
    let mut s = session(13, 3);
    let p = s.predict(None).unwrap();
    let target = p.matches.iter().find(|m| m.detection == 10).unwrap().track.clone();
    s.apply(pin(&target, 10), None).unwrap();
    s.apply(edit(1, EditAction::Remove { index: 2 }), None).unwrap();
    assert_eq!(s.constraints().pins.get(&target), Some(&9));
    s.apply(edit(1, EditAction::Remove { index: 9 }), None).unwrap();
    assert!(s.constraints().pins.is_empty());
}

#[test]
fn prediction_is_only_visible_at_its_revision() {
    let mut s = session(14, 3);
    let p = s.predict(None).unwrap();
    let st = s.state();
    assert_eq!(st.prediction.as_ref().map(|q| q.revision), Some(st.revision));
    assert_eq!(p.revision, 0);
    s.apply(edit(1, EditAction::Add { position: Vec3::zeros() }), None).unwrap();
    assert!(s.state().prediction.is_none());
    assert!(s.cached_result().is_none());
}

#[test]
fn replaying_the_log_reproduces_the_state_byte_for_byte() {
    let data = dataset(15, 5);
    let init = init_from(&data, TrackConfig::default());
    let mut s = Session::create("replay", init.clone()).unwrap();
    let p = s.predict(None).unwrap();
    s.apply(pin(&p.matches[0].track, p.matches[0].detection), None).unwrap();
    s.apply(edit(1, EditAction::Remove { index: 5 }), None).unwrap();
    s.apply(Op::Undo, None).unwrap();
    s.apply(edit(2, EditAction::Add { position: Vec3::new(3.0, 4.0, 5.0) }), None).unwrap();
    s.apply(Op::Commit { force: true }, None).unwrap();
    s.apply(edit(2, EditAction::Move { index: 0, position: Vec3::new(1.0, 1.0, 1.0) }), None)
        .unwrap();
    s.apply(Op::Undo, None).unwrap();
    s.apply(Op::Redo, None).unwrap();
    s.apply(Op::Commit { force: true }, None).unwrap();
    let log_json: Vec<String> = s.log().iter().map(|e| serde_json::to_string(e).unwrap()).collect();
    let log = log_json.iter().map(|l| serde_json::from_str(l).unwrap()).collect::<Vec<_>>();
    let r = Session::replay("replay", init, &log).unwrap();
    assert_eq!(r.state_json(), s.state_json());
    assert_eq!(r.export_csv(), s.export_csv());
}

#[test]
fn delta_reports_ops_since_a_revision() {
    let mut s = session(16, 3);
    s.apply(edit(1, EditAction::Add { position: Vec3::zeros() }), None).unwrap();
    s.apply(edit(1, EditAction::Add { position: Vec3::zeros() }), None).unwrap();
    let d = s.delta(1).unwrap();
    assert_eq!(d.ops.len(), 1);
    assert_eq!(d.ops[0].revision, 2);
    assert!(d.state.is_some());
    let d = s.delta(2).unwrap();
    assert!(d.ops.is_empty() && d.state.is_none());
    assert!(s.delta(3).is_err());
}

#[test]
fn commit_clears_history_and_constraints() {
    let mut s = session(17, 3);
    s.apply(pin("A01", 0), None).unwrap();
    s.apply(Op::Commit { force: true }, None).unwrap();
    assert!(s.constraints().pins.is_empty());
    assert_eq!(s.apply(Op::Undo, None), Err(ServiceError::NothingTo("undo")));
    s.apply(Op::Commit { force: true }, None).unwrap();
    assert!(s.is_finished());
    assert_eq!(s.predict(None), Err(ServiceError::Finished));
    assert_eq!(s.apply(Op::Commit { force: true }, None), Err(ServiceError::Finished));
}

#[test]
fn seed_ids_are_required() {
    let mut data = dataset(18, 2);
    data.frames[0][3].id = None;
    let r = Session::create("s", init_from(&data, TrackConfig::default()));
    assert!(matches!(r, Err(ServiceError::Invalid(_))), "{r:?}");
}

fn random_frame(rng: &mut ChaCha8Rng, frame: usize, n: usize, ids: bool) -> Vec<NucleusRecord> {
    (0..n)
        .map(|i| {
            let p = Vec3::new(
                rng.random_range(0.0..180.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            );
            NucleusRecord::new(frame, ids.then(|| format!("T{i:03}")), p)
        })
        .collect()
}

fn median_predict_time(cfg: TrackConfig) -> Duration {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
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
    let mut s = Session::create("big", init).unwrap();
    let mut times = Vec::new();
    for rep in 0..7 {
        // a distinct config per call defeats the cache
        let c = TrackConfig {
            gate_um: 1000.0 + rep as f64,
            ..cfg.clone()
        };
        let start = Instant::now();
        let p = s.predict(Some(&c)).unwrap();
        times.push(start.elapsed());
        assert_eq!(p.matches.len(), 200);
    }
    times.sort();
    times[times.len() / 2]
}

#[test]
fn prediction_latency_at_two_hundred_nuclei() {
    let gnn = TrackConfig {
        coordinate_space: CoordinateSpace::Raw,
        ..TrackConfig::default()
    };
    let rescore = TrackConfig {
        method: Method::MurtyRescore,
        k: 5,
        ..gnn.clone()
    };
    for (name, cfg) in [("gnn", gnn), ("murty_rescore", rescore)] {
        let t = median_predict_time(cfg);
        println!("predict {name} n=m=200: {t:?}");
        assert!(t <= Duration::from_millis(200), "{name}: {t:?}");
    }
}

#[test]
fn a_named_detection_cannot_also_be_pinned_to_a_track() {
    let mut s = session(19, 3);
    s.apply(pin("NEW1", 4), None).unwrap();
    let r = s.apply(pin("A01", 4), None);
    assert!(matches!(r, Err(ServiceError::InfeasibleConstraints(_))));
}
