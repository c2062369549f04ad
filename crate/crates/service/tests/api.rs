use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use voxvid_core::cloud::{write_kitti, write_xyzrgb};
use voxvid_core::synthetic::golden_scene;
use voxvid_core::{Point, PointCloud, PropagationParams, ReferencePropagator, SourceKind, VideoSegmenter};
use voxvid_remote::wire::{decode_request, encode_response};
use voxvid_remote::{WireErrorBody, WireRequest};
use voxvid_service::{router, ServiceConfig, Store};

const SCALE: f64 = 4.0;
const SHIFT: [f64; 3] = [8.0, -2.0, 16.0];

fn to_original(p: [f64; 3]) -> [f64; 3] {
    [p[0] * SCALE + SHIFT[0], p[1] * SCALE + SHIFT[1], p[2] * SCALE + SHIFT[2]]
}

/// The three-block scene moved out of the unit cube, as xyzrgb text, plus
/// the block label of every point.
fn golden_payload() -> (Vec<u8>, Vec<usize>) {
    let (cloud, labels) = golden_scene::<f64>();
    let moved = PointCloud::new(
        cloud.points().iter().map(|p| Point::new(to_original(p.position), p.color)).collect(),
        SourceKind::Synthetic,
    )
    .unwrap();
    let mut buf = Vec::new();
    write_xyzrgb(&moved, &mut buf).unwrap();
    (buf, labels)
}

fn app_with(config: ServiceConfig) -> Router {
    router(Arc::new(Store::open(config).unwrap()))
}

fn app() -> Router {
    app_with(ServiceConfig::default())
}

async fn call(app: &Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Value) -> (StatusCode, Value) {
    let payload = if body.is_null() { Vec::new() } else { serde_json::to_vec(&body).unwrap() };
    let (status, bytes) = call(app, method, uri, payload).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn upload(app: &Router, bytes: Vec<u8>, query: &str) -> (StatusCode, Value) {
    let (status, body) = call(app, "POST", &format!("/clouds{query}"), bytes).await;
    (status, serde_json::from_slice(&body).unwrap())
}

async fn golden_session(app: &Router, backend: Option<&str>) -> (String, Vec<usize>) {
    let (payload, labels) = golden_payload();
    let (status, cloud) = upload(app, payload, "").await;
    assert_eq!(status, StatusCode::CREATED, "{cloud}");
    let mut req = json!({"cloud_id": cloud["cloud_id"], "resolution": 32});
    if let Some(b) = backend {
        req["backend"] = json!(b);
    }
    let (status, session) = call_json(app, "POST", "/sessions", req).await;
    assert_eq!(status, StatusCode::CREATED, "{session}");
    (session["session_id"].as_str().unwrap().to_string(), labels)
}

fn indices_of(labels: &[usize], block: usize) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == block).collect()
}

#[tokio::test]
async fn healthz_answers() {
    let (status, body) = call_json(&app(), "GET", "/healthz", Value::Null).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn uploads_are_hash_keyed() {
    let app = app();
    let (payload, _) = golden_payload();
    let (s1, a) = upload(&app, payload.clone(), "").await;
    let (s2, b) = upload(&app, payload, "?format=xyzrgb_text").await;
    assert_eq!(s1, StatusCode::CREATED);
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(a["cloud_id"], b["cloud_id"]);
    assert_eq!(a["points"], 3 * 17 * 17 * 17);
    assert_eq!(a["bbox_min"], json!(SHIFT));
}

#[tokio::test]
async fn malformed_line_is_located() {
    let mut text = String::new();
    for i in 0..6 {
        text.push_str(&format!("{i} 0 0 1 0 0\n"));
    }
    text.push_str("1 2 oops 0 0 0\n");
    let (status, body) = upload(&app(), text.into_bytes(), "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "MalformedRecord");
    assert_eq!(body["location"], json!({"line": 7}));
}

#[tokio::test]
async fn kitti_upload_needs_format() {
    let cloud = PointCloud::new(
        vec![Point::gray([1.0f32, 2.0, 3.0], 0.25), Point::gray([-1.0, 0.5, 8.0], 1.0)],
        SourceKind::Lidar,
    )
    .unwrap();
    let mut bytes = Vec::new();
    write_kitti(&cloud, &mut bytes).unwrap();
    let app = app();
    let (status, body) = upload(&app, bytes, "?format=kitti_bin").await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["cloud_id"].as_str().unwrap();
    let (_, points) = call_json(&app, "GET", &format!("/clouds/{id}/points"), Value::Null).await;
    assert_eq!(points["points"][1], json!([-1.0, 0.5, 8.0, 1.0, 1.0, 1.0]));
    let (status, _) = upload(&app, vec![0; 5], "?format=bogus").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn session_creation_errors() {
    let app = app();
    let (status, body) = call_json(&app, "POST", "/sessions", json!({"cloud_id": "nope"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "UnknownCloud");

    let (payload, _) = golden_payload();
    let (_, cloud) = upload(&app, payload, "").await;
    let (status, body) =
        call_json(&app, "POST", "/sessions", json!({"cloud_id": cloud["cloud_id"], "resolution": 4096})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "ResolutionOutOfRange");
    let (status, body) =
        call_json(&app, "POST", "/sessions", json!({"cloud_id": cloud["cloud_id"], "backend": "sam"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    assert_eq!(body["code"], "InvalidBody");
}

#[tokio::test]
async fn prompts_in_original_coordinates_select_blocks() {
    let app = app();
    let (sid, labels) = golden_session(&app, None).await;
    let uri = format!("/sessions/{sid}/prompts");

    let (status, r) = call_json(&app, "POST", &uri, json!({"type": "point", "point": to_original([0.5; 3])})).await;
    assert_eq!(status, StatusCode::CREATED, "{r}");
    assert_eq!(r["result_id"], "r0");
    let (_, mask) = call_json(&app, "GET", &format!("/sessions/{sid}/results/r0/mask"), Value::Null).await;
    assert_eq!(mask["n"], labels.len());
    assert_eq!(mask["indices"], json!(indices_of(&labels, 1)));

    let boxed = json!({
        "type": "box",
        "center": to_original([0.875; 3]),
        "dims": [0.25 * SCALE, 0.25 * SCALE, 0.25 * SCALE],
    });
    let (status, r) = call_json(&app, "POST", &uri, boxed).await;
    assert_eq!(status, StatusCode::CREATED, "{r}");
    let (_, mask) = call_json(&app, "GET", &format!("/sessions/{sid}/results/r1/mask"), Value::Null).await;
    assert_eq!(mask["indices"], json!(indices_of(&labels, 2)));

    let some_red: Vec<usize> = indices_of(&labels, 0).into_iter().step_by(11).collect();
    let (status, r) = call_json(&app, "POST", &uri, json!({"type": "mask", "indices": some_red})).await;
    assert_eq!(status, StatusCode::CREATED, "{r}");
    assert_eq!(r["selected"], 17 * 17 * 17);

    let (_, session) = call_json(&app, "GET", &format!("/sessions/{sid}"), Value::Null).await;
    let kinds: Vec<&str> = session["history"].as_array().unwrap().iter().map(|h| h["prompt_type"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["point", "box", "mask"]);
}

#[tokio::test]
async fn prompt_errors_carry_codes() {
    let app = app();
    let (sid, labels) = golden_session(&app, None).await;
    let uri = format!("/sessions/{sid}/prompts");
    let (status, body) = call_json(&app, "POST", &uri, json!({"type": "point", "point": [0.0, 0.0, 0.0]})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "PromptOutsideGrid");
    let (status, body) = call_json(&app, "POST", &uri, json!({"type": "mask", "indices": []})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "EmptyMaskPrompt");
    let (status, body) = call_json(&app, "POST", &uri, json!({"type": "mask", "indices": [labels.len()]})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "MaskIndexOutOfRange");
    let (status, body) =
        call_json(&app, "POST", &uri, json!({"type": "point", "point": to_original([0.5; 3]), "color_tolerance": 2.0}))
            .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "InvalidParams");
    let (status, _) = call_json(&app, "POST", "/sessions/missing/prompts", json!({"type": "point", "point": [0, 0, 0]})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn mask_formats() {
    let text = "0 0 0 1 0 0\n1 1 1 0 0 1\n0.01 0 0 1 0 0\n";
    let app = app();
    let (_, cloud) = upload(&app, text.as_bytes().to_vec(), "").await;
    let (_, session) =
        call_json(&app, "POST", "/sessions", json!({"cloud_id": cloud["cloud_id"], "resolution": 4})).await;
    let sid = session["session_id"].as_str().unwrap();
    let (status, _) =
        call_json(&app, "POST", &format!("/sessions/{sid}/prompts"), json!({"type": "point", "point": [0, 0, 0]})).await;
    assert_eq!(status, StatusCode::CREATED);
    let base = format!("/sessions/{sid}/results/r0/mask");
    let (_, indices) = call(&app, "GET", &format!("{base}?format=indices_json"), Vec::new()).await;
    assert_eq!(indices, br#"{"n":3,"indices":[0,2]}"#);
    let (_, rle) = call(&app, "GET", &format!("{base}?format=rle_json"), Vec::new()).await;
    assert_eq!(rle, br#"{"n":3,"rle":[0,1,1,1]}"#);
    let (status, _) = call(&app, "GET", &format!("{base}?format=png"), Vec::new()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", &format!("/sessions/{sid}/results/r9/mask"), Vec::new()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn identical_prompts_give_identical_masks() {
    let app = app();
    let (sid, _) = golden_session(&app, None).await;
    let prompt = json!({"type": "box", "center": to_original([0.125; 3]), "dims": [1.0, 1.0, 1.0], "rotation": [0.1, 0.2, 0.3]});
    for _ in 0..2 {
        let (status, _) = call_json(&app, "POST", &format!("/sessions/{sid}/prompts"), prompt.clone()).await;
        assert_eq!(status, StatusCode::CREATED);
    }
    for format in ["indices_json", "rle_json"] {
        let (_, a) = call(&app, "GET", &format!("/sessions/{sid}/results/r0/mask?format={format}"), Vec::new()).await;
        let (_, b) = call(&app, "GET", &format!("/sessions/{sid}/results/r1/mask?format={format}"), Vec::new()).await;
        assert_eq!(a, b);
    }
}

#[tokio::test]
async fn decimated_points_keep_original_coordinates() {
    let app = app();
    let (payload, _) = golden_payload();
    let (_, cloud) = upload(&app, payload, "").await;
    let id = cloud["cloud_id"].as_str().unwrap();
    let (status, body) = call_json(&app, "GET", &format!("/clouds/{id}/points?stride=1000"), Value::Null).await;
    assert_eq!(status, StatusCode::OK);
    let points = body["points"].as_array().unwrap();
    assert_eq!(points.len(), (3 * 17 * 17 * 17 + 999) / 1000);
    let (golden, _) = golden_scene::<f64>();
    let p = golden.points()[1000];
    let expected: Vec<f64> = to_original(p.position).into_iter().chain(p.color).collect();
    assert_eq!(points[1], json!(expected));
    let (status, _) = call_json(&app, "GET", &format!("/clouds/{id}/points?stride=0"), Value::Null).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

async fn slow_reference(Json(wire): Json<WireRequest>) -> axum::response::Response {
    use axum::response::IntoResponse;
    tokio::time::sleep(Duration::from_millis(600)).await;
    let request = match decode_request::<f64>(&wire, PropagationParams::default()) {
        Ok(r) => r,
        Err(e) => return (StatusCode::BAD_REQUEST, Json(WireErrorBody { error: e.to_string() })).into_response(),
    };
    match ReferencePropagator.segment_video(&request) {
        Ok(resp) => Json(encode_response(&resp)).into_response(),
        Err(e) => (StatusCode::UNPROCESSABLE_ENTITY, Json(WireErrorBody { error: e.to_string() })).into_response(),
    }
}

async fn spawn_slow_backend() -> String {
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, Router::new().route("/v1/segment_video", post(slow_reference))).await.unwrap();
    });
    format!("remote:http://{addr}")
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_prompts_on_one_session_conflict() {
    let backend = spawn_slow_backend().await;
    let app = app();
    let (sid, labels) = golden_session(&app, Some(&backend)).await;
    let uri = format!("/sessions/{sid}/prompts");
    let prompt = json!({"type": "point", "point": to_original([0.1; 3])});
    let first = call_json(&app, "POST", &uri, prompt.clone());
    let second = async {
        tokio::time::sleep(Duration::from_millis(150)).await;
        call_json(&app, "POST", &uri, prompt.clone()).await
    };
    let ((s1, b1), (s2, b2)) = tokio::join!(first, second);
    assert_eq!(s1, StatusCode::CREATED, "{b1}");
    assert_eq!(s2, StatusCode::CONFLICT, "{b2}");
    assert_eq!(b2["code"], "SessionBusy");
    assert_eq!(b1["selected"], indices_of(&labels, 0).len());

    // Once the first finishes the session accepts prompts again.
    let (s3, _) = call_json(&app, "POST", &uri, prompt).await;
    assert_eq!(s3, StatusCode::CREATED);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unreachable_backend_is_bad_gateway() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut config = ServiceConfig::default();
    config.deadline_ms = 2_000;
    let app = app_with(config);
    let (sid, _) = golden_session(&app, Some(&format!("remote:http://127.0.0.1:{port}"))).await;
    let (status, body) = call_json(
        &app,
        "POST",
        &format!("/sessions/{sid}/prompts"),
        json!({"type": "point", "point": to_original([0.5; 3])}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_GATEWAY, "{body}");
    assert_eq!(body["code"], "BackendUnavailable");
}

#[tokio::test]
async fn persisted_results_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        persistence_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let app = app_with(config.clone());
    let (sid, labels) = golden_session(&app, None).await;
    let (status, _) = call_json(
        &app,
        "POST",
        &format!("/sessions/{sid}/prompts"),
        json!({"type": "point", "point": to_original([0.9; 3])}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let uri = format!("/sessions/{sid}/results/r0/mask");
    let (_, before) = call(&app, "GET", &uri, Vec::new()).await;

    let reopened = tokio::task::spawn_blocking(move || app_with(config)).await.unwrap();
    let (status, after) = call(&reopened, "GET", &uri, Vec::new()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after, before);
    let parsed: Value = serde_json::from_slice(&after).unwrap();
    assert_eq!(parsed["indices"], json!(indices_of(&labels, 2)));

    let (status, _) = call(&app_with(ServiceConfig::default()), "GET", &uri, Vec::new()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
