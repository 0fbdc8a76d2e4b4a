mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use seamtrack_core::io::{format_nuclei, format_seams, TRACK_HEADER};
use seamtrack_service::{router, Defaults, SessionManager};

use common::dataset;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

fn app() -> Router {
    router(Arc::new(SessionManager::new(None, Defaults::default())))
}

async fn create(app: &Router, n_frames: usize) -> (String, Value) {
    let data = dataset(31, n_frames);
    let nuclei: Vec<_> = data.frames.iter().flatten().cloned().collect();
    let body = json!({
        "nuclei_csv": format_nuclei(&nuclei),
        "seams_csv": format_seams(&data.seams),
    });
    let (status, v) = json_call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    (v["session_id"].as_str().unwrap().to_string(), v)
}

#[tokio::test]
async fn full_curation_round_trip() {
    let app = app();
    let (id, state) = create(&app, 3).await;
    assert_eq!(state["revision"], 0);
    assert_eq!(state["active_pair"], json!([0, 1]));

    let (status, p) = json_call(&app, "POST", &format!("/sessions/{id}/predict"), None).await;
    assert_eq!(status, StatusCode::OK, "{p}");
    assert_eq!(p["revision"], 0);
    let track = p["matches"][0]["track"].as_str().unwrap().to_string();
    let det = p["matches"][0]["detection"].as_u64().unwrap();

    let pin = json!({"expected_revision": 0, "constraint": {"op": "pin", "track": track, "detection": det}});
    let (status, s) = json_call(&app, "POST", &format!("/sessions/{id}/constraints"), Some(pin)).await;
    assert_eq!(status, StatusCode::OK, "{s}");
    assert_eq!(s["revision"], 1);

    let edit = json!({"expected_revision": 1, "edit": {"action": "remove", "index": 30}});
    let uri = format!("/sessions/{id}/frames/1/detections:edit");
    let (status, s) = json_call(&app, "POST", &uri, Some(edit)).await;
    assert_eq!(status, StatusCode::OK, "{s}");
    assert_eq!(s["revision"], 2);

    let (status, s) = json_call(&app, "POST", &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["can_redo"], true);

    let (status, s) = json_call(&app, "POST", &format!("/sessions/{id}/commit"), Some(json!({"force": true}))).await;
    assert_eq!(status, StatusCode::OK, "{s}");
    assert_eq!(s["committed_frames"], 2);

    let (status, d) = json_call(&app, "GET", &format!("/sessions/{id}/state?since=3"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["ops"].as_array().unwrap().len(), 1);
    assert_eq!(d["ops"][0]["op"]["type"], "commit");
    let (_, d) = json_call(&app, "GET", &format!("/sessions/{id}/state?since=4"), None).await;
    assert_eq!(d["state"], Value::Null);

    let (status, csv) = call(&app, "GET", &format!("/sessions/{id}/export"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(csv.starts_with(&TRACK_HEADER.join(",")), "{csv}");
    assert!(csv.contains(&format!("1,{track},matched,{det},")));
}

#[tokio::test]
async fn errors_carry_code_and_status() {
    let app = app();
    let (id, _) = create(&app, 3).await;

    let (status, e) = json_call(&app, "GET", "/sessions/missing/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(e["code"], "session_not_found");

    let edit = json!({"edit": {"action": "remove", "index": 0}});
    let (status, e) = json_call(&app, "POST", &format!("/sessions/{id}/frames/0/detections:edit"), Some(edit)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(e["code"], "frame_committed");

    let edit = json!({"edit": {"action": "remove", "index": 10_000}});
    let (status, e) = json_call(&app, "POST", &format!("/sessions/{id}/frames/1/detections:edit"), Some(edit)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["code"], "index_out_of_range");

    let pin = |t: &str| json!({"constraint": {"op": "pin", "track": t, "detection": 0}});
    let (status, _) = json_call(&app, "POST", &format!("/sessions/{id}/constraints"), Some(pin("A01"))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, e) = json_call(&app, "POST", &format!("/sessions/{id}/constraints"), Some(pin("A02"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(e["code"], "infeasible_constraints");

    let stale = json!({"expected_revision": 0});
    let (status, e) = json_call(&app, "POST", &format!("/sessions/{id}/undo"), Some(stale)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(e["code"], "conflict");

    let (status, e) = json_call(&app, "POST", &format!("/sessions/{id}/commit"), Some(json!({"bogus": 1}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["code"], "invalid_request");
    assert!(e["message"].as_str().unwrap().contains("bogus"));

    let (status, e) = json_call(&app, "POST", "/sessions", Some(json!({"nuclei_csv": "frame,id,x,y,z\n"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["code"], "invalid_request");
}

#[tokio::test]
async fn uncovered_detections_block_commit() {
    let app = app();
    let (id, _) = create(&app, 2).await;
    let cfg = json!({"config": {"gate_um": 2.0}});
    let (status, s) = json_call(&app, "POST", &format!("/sessions/{id}/config"), Some(cfg)).await;
    assert_eq!(status, StatusCode::OK, "{s}");
    assert_eq!(s["config"]["gate_um"], 2.0);
    let far = json!({"edit": {"action": "add", "position": [900.0, 900.0, 900.0]}});
    let (status, _) = json_call(&app, "POST", &format!("/sessions/{id}/frames/1/detections:edit"), Some(far)).await;
    assert_eq!(status, StatusCode::OK);
    let (status, e) = json_call(&app, "POST", &format!("/sessions/{id}/commit"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(e["code"], "uncovered_detections");
}

#[tokio::test]
async fn predict_overrides_do_not_change_the_session() {
    let app = app();
    let (id, _) = create(&app, 2).await;
    let body = json!({"config": {"method": "murty_rescore", "k": 3, "graph": {"kind": "delaunay"}}});
    let (status, p) = json_call(&app, "POST", &format!("/sessions/{id}/predict"), Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{p}");
    assert_eq!(p["config"]["method"], "murty_rescore");
    assert!(p["score"].is_number());
    let (_, s) = json_call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(s["config"]["method"], "gnn");
    assert_eq!(s["revision"], 0);
    // an override-only prediction is not the session's prediction
    assert_eq!(s["prediction"], Value::Null);
    let bad = json!({"config": {"k": 0}});
    let (status, _) = json_call(&app, "POST", &format!("/sessions/{id}/predict"), Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn sessions_can_be_listed() {
    let app = app();
    let (id, _) = create(&app, 2).await;
    let (status, v) = json_call(&app, "GET", "/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!([id]));
    let (status, _) = json_call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
}
