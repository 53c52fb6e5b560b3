use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use relaytrail_core::formats::{read_json, ConfigFile};
use relaytrail_core::store::ResultStore;
use relaytrail_core::trail::VirtualTrail;
use relaytrail_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn config() -> Value {
    serde_json::to_value(ConfigFile::load(&data("calibrated.json")).unwrap()).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, policy: Value) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({"config": config(), "policy": policy}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

fn row(q: f64) -> Value {
    json!({"-25": q, "-15": q, "-10": q, "-5": q, "0": q})
}

#[tokio::test]
async fn exploration_decision_waits_for_all_measurements() {
    let app = router(AppState::new(None), None);
    let id = create(&app, json!({"kind": "opt_explore_lim", "lambda": 0.055})).await;
    for r in 1..=3 {
        let (s, b) = call(&app, "POST", &format!("/sessions/{id}/measurements"), Some(json!({"r": r, "outage_by_dbm": row(0.01)}))).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(b["accepted"], json!(true));
        assert_eq!(b["awaiting"], json!(5 - r));
    }
    let (s, b) = call(&app, "POST", &format!("/sessions/{id}/decision"), Some(json!({}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(b["code"], "out_of_order");
    assert_eq!(b["message"], "awaiting 2 more");
    assert_eq!(b["expected_phase"], "awaiting_measurement");

    let (_, view) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(view["awaiting"], json!(2));
    assert_eq!(view["lambda_k"], json!(0.055));
}

#[tokio::test]
async fn malformed_measurements_are_validation_errors() {
    let app = router(AppState::new(None), None);
    let id = create(&app, json!("OEL")).await;
    let uri = format!("/sessions/{id}/measurements");
    let (s, b) = call(&app, "POST", &uri, Some(json!({"r": 1, "outage_by_dbm": row(1.2)}))).await;
    assert_eq!((s, b["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("validation")));
    let mut bad = row(0.1);
    bad["3"] = json!(0.1);
    let (s, _) = call(&app, "POST", &uri, Some(json!({"r": 1, "outage_by_dbm": bad}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, b) = call(&app, "POST", &uri, Some(json!({"r": "one"}))).await;
    assert_eq!((s, b["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("validation")));
    let (_, view) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(view["measurements"], json!(0));
    let (s, b) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!((s, b["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
    let (s, b) = call(&app, "POST", "/sessions", Some(json!({"config": config(), "policy": "bogus"}))).await;
    assert_eq!((s, b["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("validation")));
}

#[tokio::test]
async fn as_you_go_places_at_first_step_below_threshold() {
    let app = router(AppState::new(None), None);
    let thresholds = json!({"c_th": [0.5, 0.6, 0.7, 0.8], "lambda": 0.1});
    let id = create(&app, json!({"kind": "opt_as_you_go", "thresholds": thresholds})).await;
    let (_, b) = call(&app, "POST", &format!("/sessions/{id}/measurements"), Some(json!({"r": 1, "outage_by_dbm": row(0.0)}))).await;
    assert_eq!(b["awaiting"], json!(0));
    let (s, d) = call(&app, "POST", &format!("/sessions/{id}/decision"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(d["action"], "place");
    assert_eq!(d["u"], json!(1));
    assert_eq!(d["gamma_dbm"], json!(-25.0));
    let (s, b) = call(&app, "POST", &format!("/sessions/{id}/place"), Some(json!({"confirmed_position": 3}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{b}");
    let (s, v) = call(&app, "POST", &format!("/sessions/{id}/place"), Some(json!({"confirmed_position": 2}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["last_position"], json!(2));
    assert_eq!(v["placed"].as_array().unwrap().len(), 1);
    let (s, b) = call(&app, "POST", &format!("/sessions/{id}/place"), None).await;
    assert_eq!((s, b["code"].as_str()), (StatusCode::CONFLICT, Some("out_of_order")));
}

#[tokio::test]
async fn reference_walk_over_http_is_stored_when_finished() {
    let dir = tempfile::tempdir().unwrap();
    let store = ResultStore::open(dir.path()).unwrap();
    let app = router(AppState::new(Some(store.clone())), None);
    let trail = VirtualTrail::from_file(&read_json(&data("reference_trail.json")).unwrap()).unwrap();
    let id = create(&app, json!({"kind": "opt_explore_lim", "lambda": 0.055173387330723925})).await;
    let key = |from: usize, to: usize| -> Value {
        let q = trail.require(from, to).unwrap();
        json!({"-25": q[0], "-15": q[1], "-10": q[2], "-5": q[3], "0": q[4]})
    };
    loop {
        let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
        let last = v["last_position"].as_u64().unwrap() as usize;
        match v["phase"].as_str().unwrap() {
            "finished" => break,
            "awaiting_placement_confirm" => {
                call(&app, "POST", &format!("/sessions/{id}/place"), None).await;
            }
            "ready_to_decide" => {
                call(&app, "POST", &format!("/sessions/{id}/decision"), None).await;
            }
            _ => {
                if v["source"].is_null() && 11 - last <= 5 {
                    call(&app, "POST", &format!("/sessions/{id}/source"), Some(json!({"r": 11 - last}))).await;
                    continue;
                }
                for pair in v["expected"].as_array().unwrap() {
                    let (from, to) = (pair[0].as_u64().unwrap() as usize, pair[1].as_u64().unwrap() as usize);
                    let body = json!({"r": from - last, "peer": to, "outage_by_dbm": key(from, to)});
                    let (s, b) = call(&app, "POST", &format!("/sessions/{id}/measurements"), Some(body)).await;
                    assert_eq!(s, StatusCode::OK, "{b}");
                }
            }
        }
    }
    let (_, net) = call(&app, "GET", &format!("/sessions/{id}/network"), None).await;
    assert_eq!(net["relay_locations"], json!([5, 7, 9]));
    assert_eq!(net["measurements"], json!(17));
    let (_, events) = call(&app, "GET", &format!("/sessions/{id}/events"), None).await;
    assert!(events.as_array().unwrap().len() > 17);
    let runs = store.list().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(store.get(&runs[0].id).unwrap().result["relay_locations"], json!([5, 7, 9]));
}

#[tokio::test]
async fn sessions_are_isolated() {
    let state = AppState::new(None);
    let app = router(Arc::clone(&state), None);
    let a = create(&app, json!("heu_explore_lim")).await;
    let b = create(&app, json!("heu_explore_lim")).await;
    assert_ne!(a, b);
    call(&app, "POST", &format!("/sessions/{a}/measurements"), Some(json!({"r": 1, "outage_by_dbm": row(0.2)}))).await;
    let (_, va) = call(&app, "GET", &format!("/sessions/{a}"), None).await;
    let (_, vb) = call(&app, "GET", &format!("/sessions/{b}"), None).await;
    assert_eq!(va["measurements"], json!(1));
    assert_eq!(vb["measurements"], json!(0));
}
