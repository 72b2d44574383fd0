use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qbrush_core::brushes::{CanvasImage, Region};
use qbrush_core::family_store::{precompute, GridSpec};
use qbrush_core::vqe::VqeConfig;
use qbrush_service::{router, AppState, Config, UNDO_DEPTH};
use serde_json::{json, Value};
use tower::ServiceExt;

fn full_store() -> PathBuf {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        precompute(
            dir.path(),
            &GridSpec::default(),
            &VqeConfig::default(),
            true,
            &|_| {},
        )
        .unwrap();
        dir
    })
    .path()
    .to_path_buf()
}

fn app_with(data_dir: PathBuf, max_dim: u32) -> Router {
    router(
        AppState::new(Config {
            data_dir,
            max_dim,
            workers: 2,
            ..Config::default()
        })
        .unwrap(),
    )
}

fn app() -> Router {
    app_with(full_store(), 4096)
}

fn fixture(w: u32, h: u32) -> CanvasImage {
    let mut rgba = Vec::new();
    for y in 0..h {
        for x in 0..w {
            rgba.extend([
                (x * 7 + 20) as u8,
                (y * 5 + 40) as u8,
                ((x * y) % 200 + 30) as u8,
                255,
            ]);
        }
    }
    CanvasImage::new(w, h, rgba).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Bytes) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.into())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

fn as_json(b: &Bytes) -> Value {
    serde_json::from_slice(b)
        .unwrap_or_else(|_| panic!("not JSON: {:?}", String::from_utf8_lossy(b)))
}

async fn post_json(app: &Router, uri: &str, v: Value) -> (StatusCode, Value) {
    let (s, b) = call(app, "POST", uri, v.to_string()).await;
    let body = if b.is_empty() {
        Value::Null
    } else {
        as_json(&b)
    };
    (s, body)
}

async fn new_session(app: &Router, image: &CanvasImage) -> String {
    let (s, b) = call(app, "POST", "/sessions", image.to_png()).await;
    assert_eq!(s, StatusCode::CREATED);
    as_json(&b)["session_id"].as_str().unwrap().to_string()
}

async fn canvas(app: &Router, id: &str) -> CanvasImage {
    let (s, b) = call(app, "GET", &format!("/sessions/{id}/canvas"), Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    CanvasImage::from_png(&b).unwrap()
}

/// Polls until terminal; returns every observed job document.
async fn wait_job(app: &Router, job: &str) -> Vec<Value> {
    let mut seen = Vec::new();
    for _ in 0..6000 {
        let (s, b) = call(app, "GET", &format!("/jobs/{job}"), Body::empty()).await;
        assert_eq!(s, StatusCode::OK);
        let v = as_json(&b);
        let done = matches!(v["status"].as_str(), Some("done" | "failed"));
        seen.push(v);
        if done {
            return seen;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("job {job} did not finish");
}

fn circle(x: f64, y: f64, r: f64) -> Value {
    json!({ "kind": "circle", "center": [x, y], "radius": r })
}

fn steer_body(max_iters: usize) -> Value {
    json!({
        "source": circle(8.0, 8.0, 5.0),
        "target": circle(24.0, 24.0, 5.0),
        "paste": circle(8.0, 24.0, 5.0),
        "params": { "t": 1.0, "seed": 3, "max_iters": max_iters },
    })
}

async fn train(app: &Router, id: &str, max_iters: usize) -> (String, Vec<Value>) {
    let (s, v) = post_json(
        app,
        &format!("/sessions/{id}/effects/steerable"),
        steer_body(max_iters),
    )
    .await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let job = v["job_id"].as_str().unwrap().to_string();
    let history = wait_job(app, &job).await;
    (v["train_id"].as_str().unwrap().to_string(), history)
}

fn assert_error(status: StatusCode, body: &Value, want: StatusCode) {
    assert_eq!(status, want, "{body}");
    assert!(
        body["code"].is_string() && body["message"].is_string(),
        "{body}"
    );
    assert!(body.get("detail").is_some(), "{body}");
}

#[tokio::test]
async fn session_roundtrip_and_upload_errors() {
    let app = app_with(PathBuf::from("/nonexistent"), 48);
    let img = fixture(40, 40);
    let id = new_session(&app, &img).await;
    let (s, bytes) = call(
        &app,
        "GET",
        &format!("/sessions/{id}/canvas"),
        Body::empty(),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(bytes.as_ref(), img.to_png().as_slice());

    new_session(&app, &fixture(1, 1)).await;

    let (s, b) = call(&app, "GET", "/sessions/nope/canvas", Body::empty()).await;
    assert_error(s, &as_json(&b), StatusCode::NOT_FOUND);

    let (s, b) = call(&app, "POST", "/sessions", "GIF89a not a png").await;
    assert_error(s, &as_json(&b), StatusCode::UNSUPPORTED_MEDIA_TYPE);

    let (s, b) = call(&app, "POST", "/sessions", fixture(49, 10).to_png()).await;
    let v = as_json(&b);
    assert_error(s, &v, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(v["detail"]["max_dim"], 48);

    let (s, b) = call(&app, "GET", "/jobs/unknown", Body::empty()).await;
    assert_error(s, &as_json(&b), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn steerable_job_is_monotone_and_evaluates_without_retraining() {
    let app = app();
    let img = fixture(32, 32);
    let id = new_session(&app, &img).await;
    let (train_id, history) = train(&app, &id, 60).await;

    let rank = |s: &str| {
        ["queued", "running", "done", "failed"]
            .iter()
            .position(|x| *x == s)
            .unwrap()
    };
    let statuses: Vec<usize> = history
        .iter()
        .map(|v| rank(v["status"].as_str().unwrap()))
        .collect();
    assert!(statuses.windows(2).all(|w| w[0] <= w[1]), "{statuses:?}");
    let progress: Vec<f64> = history
        .iter()
        .map(|v| v["progress"].as_f64().unwrap())
        .collect();
    assert!(progress.windows(2).all(|w| w[0] <= w[1]), "{progress:?}");
    let last = history.last().unwrap();
    assert_eq!(last["status"], "done", "{last}");
    assert_eq!(last["kind"], "steerable-train");
    assert_eq!(last["progress"], 1.0);
    assert_eq!(last["result"]["loss_history"].as_array().unwrap().len(), 60);

    let eval = format!("/sessions/{id}/effects/steerable/{train_id}/evaluate");
    let (s, b) = call(&app, "POST", &eval, json!({ "t": 0.0 }).to_string()).await;
    assert_eq!(s, StatusCode::OK);
    let at_zero = CanvasImage::from_png(&b).unwrap();
    assert_eq!(at_zero, canvas(&app, &id).await);
    let paste: Vec<(u32, u32)> = Region::Circle {
        center: [8.0, 24.0],
        radius: 5.0,
    }
    .pixels(32, 32);
    for y in 0..32 {
        for x in 0..32 {
            let (a, b) = (img.pixel((x, y)), at_zero.pixel((x, y)));
            if paste.contains(&(x, y)) {
                assert!(a
                    .iter()
                    .zip(b)
                    .all(|(p, q)| (*p as i32 - q as i32).abs() <= 1));
            } else {
                assert_eq!(a, b, "outside pixel ({x},{y}) changed");
            }
        }
    }

    let (s, _) = call(&app, "POST", &eval, json!({ "t": 1.2 }).to_string()).await;
    assert_eq!(s, StatusCode::OK);
    assert_ne!(canvas(&app, &id).await, at_zero);

    let (s, v) = post_json(&app, &eval, json!({ "t": -1.0 })).await;
    assert_error(s, &v, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, v) = post_json(
        &app,
        &format!("/sessions/{id}/effects/steerable/missing/evaluate"),
        json!({ "t": 1.0 }),
    )
    .await;
    assert_error(s, &v, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn undo_restores_exact_bytes() {
    let app = app();
    let img = fixture(32, 32);
    let id = new_session(&app, &img).await;
    let (s, v) = post_json(&app, &format!("/sessions/{id}/undo"), json!({})).await;
    assert_error(s, &v, StatusCode::CONFLICT);

    let before = call(
        &app,
        "GET",
        &format!("/sessions/{id}/canvas"),
        Body::empty(),
    )
    .await
    .1;
    train(&app, &id, 20).await;
    let after = call(
        &app,
        "GET",
        &format!("/sessions/{id}/canvas"),
        Body::empty(),
    )
    .await
    .1;
    assert_ne!(before, after);
    let (s, undone) = call(&app, "POST", &format!("/sessions/{id}/undo"), Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(undone, before);
    assert_eq!(
        call(
            &app,
            "GET",
            &format!("/sessions/{id}/canvas"),
            Body::empty()
        )
        .await
        .1,
        before
    );
}

#[tokio::test]
async fn undo_history_is_bounded() {
    let app = app();
    let id = new_session(&app, &fixture(40, 12)).await;
    let body = json!({
        "stroke": { "polyline": [[2.0, 6.0], [38.0, 6.0]], "radius": 2.0 },
        "params": { "bond_distance": 1.0, "repetitions": 1 },
    });
    for _ in 0..UNDO_DEPTH + 1 {
        let (s, v) = post_json(
            &app,
            &format!("/sessions/{id}/effects/chemical"),
            body.clone(),
        )
        .await;
        assert_eq!(s, StatusCode::ACCEPTED, "{v}");
        assert_eq!(
            wait_job(&app, v["job_id"].as_str().unwrap())
                .await
                .last()
                .unwrap()["status"],
            "done"
        );
    }
    for _ in 0..UNDO_DEPTH {
        let (s, _) = call(&app, "POST", &format!("/sessions/{id}/undo"), Body::empty()).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/undo"), Body::empty()).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn steerable_request_errors() {
    let app = app();
    let id = new_session(&app, &fixture(32, 32)).await;
    let uri = format!("/sessions/{id}/effects/steerable");
    let bowtie =
        json!({ "kind": "lasso-polygon", "vertices": [[2, 2], [12, 12], [12, 2], [2, 12]] });
    let mut cases = Vec::new();
    let mut b = steer_body(5);
    b["source"] = bowtie;
    cases.push((b, "source"));
    let mut b = steer_body(5);
    b["params"]["controls"] = json!(5);
    cases.push((b, "controls"));
    let mut b = steer_body(5);
    b.as_object_mut().unwrap().remove("paste");
    cases.push((b, "paste"));
    let mut b = steer_body(5);
    b["target"] = circle(-50.0, -50.0, 3.0);
    cases.push((b, "target"));
    for (body, field) in cases {
        let (s, v) = post_json(&app, &uri, body).await;
        assert_error(s, &v, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(v["detail"]["field"], field, "{v}");
    }
    let mut b = steer_body(5);
    b["params"]["colour"] = json!(1);
    let (s, v) = post_json(&app, &uri, b).await;
    assert_error(s, &v, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["message"].as_str().unwrap().contains("colour"));

    let (s, v) = post_json(&app, "/sessions/nope/effects/steerable", steer_body(5)).await;
    assert_error(s, &v, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn trained_steerings_are_capped_per_session() {
    let app = app();
    let id = new_session(&app, &fixture(32, 32)).await;
    let mut ids = Vec::new();
    for _ in 0..5 {
        ids.push(train(&app, &id, 2).await.0);
    }
    let eval = |t: &str| format!("/sessions/{id}/effects/steerable/{t}/evaluate");
    let (s, _) = post_json(&app, &eval(&ids[0]), json!({ "t": 0.5 })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    for t in &ids[1..] {
        let (s, _) = call(&app, "POST", &eval(t), json!({ "t": 0.5 }).to_string()).await;
        assert_eq!(s, StatusCode::OK);
    }
}

#[tokio::test]
async fn chemical_reports_used_distance_and_is_deterministic() {
    let app = app();
    let img = fixture(48, 16);
    let body = json!({
        "stroke": { "polyline": [[2.0, 8.0], [46.0, 8.0]], "radius": 2.0 },
        "params": { "bond_distance": 0.735, "repetitions": 2 },
    });
    let spacing = (2.5 - 0.725) / 999.0;
    let mut canvases = Vec::new();
    for _ in 0..2 {
        let id = new_session(&app, &img).await;
        let (s, v) = post_json(
            &app,
            &format!("/sessions/{id}/effects/chemical"),
            body.clone(),
        )
        .await;
        assert_eq!(s, StatusCode::ACCEPTED, "{v}");
        let used = v["used_distance"].as_f64().unwrap();
        assert!((used - 0.735).abs() <= spacing / 2.0);
        let last = wait_job(&app, v["job_id"].as_str().unwrap())
            .await
            .pop()
            .unwrap();
        assert_eq!(last["status"], "done", "{last}");
        assert_eq!(last["kind"], "chemical-apply");
        assert_eq!(last["result"]["used_distance"].as_f64().unwrap(), used);
        canvases.push(
            call(
                &app,
                "GET",
                &format!("/sessions/{id}/canvas"),
                Body::empty(),
            )
            .await
            .1,
        );
    }
    assert_eq!(canvases[0], canvases[1]);
    assert_ne!(canvases[0].as_ref(), img.to_png().as_slice());

    let id = new_session(&app, &img).await;
    let mut low = body.clone();
    low["params"]["bond_distance"] = json!(0.7249);
    let (s, v) = post_json(&app, &format!("/sessions/{id}/effects/chemical"), low).await;
    assert_error(s, &v, StatusCode::UNPROCESSABLE_ENTITY);
    let mut reps = body.clone();
    reps["params"]["repetitions"] = json!(101);
    let (s, v) = post_json(&app, &format!("/sessions/{id}/effects/chemical"), reps).await;
    assert_error(s, &v, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn empty_store_is_a_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(dir.path().to_path_buf(), 4096);
    let id = new_session(&app, &fixture(16, 16)).await;
    let body = json!({
        "stroke": { "polyline": [[2.0, 8.0], [14.0, 8.0]], "radius": 1.0 },
        "params": { "bond_distance": 1.0 },
    });
    let (s, v) = post_json(&app, &format!("/sessions/{id}/effects/chemical"), body).await;
    assert_error(s, &v, StatusCode::CONFLICT);
    assert_eq!(v["code"], "family_store_empty");
    for uri in ["/families/index", "/families?distance=1.0"] {
        let (s, b) = call(&app, "GET", uri, Body::empty()).await;
        assert_error(s, &as_json(&b), StatusCode::CONFLICT);
    }

    // a store filled after startup is picked up
    precompute(
        dir.path(),
        &GridSpec {
            n: 3,
            ..GridSpec::default()
        },
        &VqeConfig::default(),
        false,
        &|_| {},
    )
    .unwrap();
    let (s, b) = call(&app, "GET", "/families/index", Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(as_json(&b)["count"], 3);
}

#[tokio::test]
async fn family_endpoints() {
    let app = app();
    let (s, b) = call(&app, "GET", "/families/index", Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    let v = as_json(&b);
    let d = v["distances"].as_array().unwrap();
    assert_eq!(d.len(), 1000);
    assert_eq!(d[0].as_f64().unwrap(), 0.725);
    assert_eq!(d[999].as_f64().unwrap(), 2.5);

    let (s, b) = call(&app, "GET", "/families?distance=1.6", Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    let v = as_json(&b);
    assert!((v["distance"].as_f64().unwrap() - 1.6).abs() <= (2.5 - 0.725) / 999.0 / 2.0);
    assert!(v["m"].as_u64().unwrap() >= 2);
    assert!((v["energies"][0].as_f64().unwrap() - v["hf_energy"].as_f64().unwrap()).abs() < 1e-10);
    assert!(v["energies"][1].as_f64().unwrap() >= v["exact_e0"].as_f64().unwrap() - 1e-9);

    for q in [
        "/families?distance=2.6",
        "/families?distance=abc",
        "/families",
    ] {
        let (s, b) = call(&app, "GET", q, Body::empty()).await;
        assert_error(s, &as_json(&b), StatusCode::UNPROCESSABLE_ENTITY);
    }
}

#[tokio::test]
async fn concurrent_sessions_do_not_interfere() {
    let app = app();
    let img = fixture(32, 32);
    let a = new_session(&app, &img).await;
    let b = new_session(&app, &img).await;
    let (ra, rb) = tokio::join!(train(&app, &a, 30), train(&app, &b, 30));
    assert_eq!(ra.1.last().unwrap()["status"], "done");
    assert_eq!(rb.1.last().unwrap()["status"], "done");
    assert_eq!(canvas(&app, &a).await, canvas(&app, &b).await);
}
