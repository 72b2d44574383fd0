use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qbrush_core::brushes::{
    apply_chemical, render_steerable, train_steerable, CanvasImage, ChemicalParams, Region,
    SteerableParams, Stroke,
};
use qbrush_core::colorsvd::MIN_PIXELS;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::state::{AppState, Job, JobKind, JobStatus, Session, TrainedEntry};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];
const BODY_LIMIT: usize = 256 << 20;

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/canvas", get(get_canvas))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/effects/steerable", post(submit_steerable))
        .route(
            "/sessions/{id}/effects/steerable/{train_id}/evaluate",
            post(evaluate),
        )
        .route("/sessions/{id}/effects/chemical", post(submit_chemical))
        .route("/jobs/{id}", get(get_job))
        .route("/families", get(family_meta))
        .route("/families/index", get(family_index))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

fn png_response(image: &CanvasImage) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], image.to_png()).into_response()
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::invalid(format!("malformed request body: {e}"))
            .with_detail(json!({ "line": e.line(), "column": e.column() }))
    })
}

fn session_or_404(state: &AppState, id: &str) -> ApiResult<Arc<Session>> {
    state
        .session(id)
        .ok_or_else(|| ApiError::not_found("session", id))
}

/// Width and height from the IHDR chunk, or `None` if this is not a PNG.
fn png_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    if bytes.len() < 24 || bytes[..8] != PNG_SIGNATURE || &bytes[12..16] != b"IHDR" {
        return None;
    }
    let be = |i: usize| u32::from_be_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    Some((be(16), be(20)))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let unsupported = || {
        ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_media_type",
            "request body must be a PNG image",
        )
    };
    let (w, h) = png_dimensions(&body).ok_or_else(unsupported)?;
    let max = state.0.config.max_dim;
    if w > max || h > max {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "image_too_large",
            format!("{w}x{h} exceeds the {max}x{max} limit"),
        )
        .with_detail(json!({ "width": w, "height": h, "max_dim": max })));
    }
    let image = tokio::task::spawn_blocking(move || CanvasImage::from_png(&body))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| unsupported().with_detail(json!({ "decoder": e.to_string() })))?;
    let (width, height) = (image.width, image.height);
    let id = state.add_session(image);
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": id, "width": width, "height": height })),
    )
        .into_response())
}

async fn get_canvas(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = session_or_404(&state, &id)?;
    let canvas = session.canvas.lock().await;
    Ok(png_response(&canvas.image))
}

async fn undo(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = session_or_404(&state, &id)?;
    let mut canvas = session.canvas.lock().await;
    let prior = canvas.undo.pop_back().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "nothing_to_undo",
            "undo history is empty",
        )
    })?;
    canvas.image = prior;
    canvas.last_evaluate = None;
    Ok(png_response(&canvas.image))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    state
        .0
        .jobs
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found("job", &id))
}

fn new_job(state: &AppState, session_id: &str, kind: JobKind) -> String {
    let job_id = uuid::Uuid::new_v4().simple().to_string();
    state.0.jobs.insert(Job {
        job_id: job_id.clone(),
        session_id: session_id.to_string(),
        kind,
        status: JobStatus::Queued,
        progress: 0.0,
        result: None,
        error: None,
    });
    job_id
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker panicked: {e}")))?
}

// ---- Steerable ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SteerableRequest {
    source: Region,
    target: Region,
    #[serde(default)]
    paste: Option<Region>,
    params: SteerableParams,
}

fn check_steerable(req: &SteerableRequest, width: u32, height: u32) -> ApiResult<()> {
    req.params.validate()?;
    for (role, region) in [("source", &req.source), ("target", &req.target)] {
        region.validate(role)?;
        let n = region.pixels(width, height).len();
        if n < MIN_PIXELS {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_region",
                format!(
                    "invalid {role} region: covers {n} pixels; at least {MIN_PIXELS} are required"
                ),
            )
            .with_detail(json!({ "field": role, "pixels": n })));
        }
    }
    match &req.paste {
        Some(p) => p.validate("paste")?,
        None if !req.params.source_equals_paste => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_region",
                "invalid paste region: missing; supply one or set source_equals_paste",
            )
            .with_detail(json!({ "field": "paste" })))
        }
        None => {}
    }
    Ok(())
}

async fn submit_steerable(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = session_or_404(&state, &id)?;
    let req: SteerableRequest = parse_json(&body)?;
    let (w, h) = {
        let c = session.canvas.lock().await;
        (c.image.width, c.image.height)
    };
    check_steerable(&req, w, h)?;
    let job_id = new_job(&state, &id, JobKind::SteerableTrain);
    tokio::spawn(run_steerable(state, session, job_id.clone(), req));
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": job_id, "train_id": job_id })),
    )
        .into_response())
}

async fn run_steerable(
    state: AppState,
    session: Arc<Session>,
    job_id: String,
    req: SteerableRequest,
) {
    let outcome = steerable_job(&state, &session, &job_id, req).await;
    state.0.jobs.finish(&job_id, outcome.map_err(|e| e.body()));
}

async fn steerable_job(
    state: &AppState,
    session: &Arc<Session>,
    job_id: &str,
    req: SteerableRequest,
) -> ApiResult<Value> {
    let _permit = state
        .0
        .workers
        .clone()
        .acquire_owned()
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    state.0.jobs.start(job_id);
    let snapshot = session.canvas.lock().await.image.clone();

    let (st, id) = (state.clone(), job_id.to_string());
    let req_for_training = req.clone();
    let model = blocking(move || {
        let max = req_for_training.params.max_iters.max(1) as f64;
        train_steerable(
            &snapshot,
            &req_for_training.source,
            &req_for_training.target,
            &req_for_training.params,
            |iter, _| st.0.jobs.progress(&id, iter as f64 / max),
        )
        .map_err(|e| {
            let mut err = ApiError::from(e);
            err.code = "training_failed";
            err
        })
    })
    .await?;

    let mut canvas = session.canvas.lock().await;
    let base = canvas.image.clone();
    let (model, rendered, base, req) = blocking(move || {
        let out = render_steerable(&base, &model, req.paste.as_ref(), &req.params)?;
        Ok((model, out, base, req))
    })
    .await?;
    canvas.commit(rendered);
    let result = json!({
        "train_id": job_id,
        "final_fidelity": model.trained.final_fidelity,
        "loss_history": model.trained.loss_history,
    });
    session.remember(
        job_id.to_string(),
        TrainedEntry {
            model,
            paste: req.paste,
            params: req.params,
            base,
        },
    );
    Ok(result)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    t: f64,
}

async fn evaluate(
    State(state): State<AppState>,
    Path((id, train_id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = session_or_404(&state, &id)?;
    let req: EvaluateRequest = parse_json(&body)?;
    let Some(entry) = session.trained(&train_id) else {
        return Err(match state.0.jobs.get(&train_id) {
            Some(job) if job.session_id == id && !job.status.is_terminal() => ApiError::new(
                StatusCode::CONFLICT,
                "training_in_progress",
                "training has not finished yet",
            )
            .with_detail(json!({ "job_id": train_id, "progress": job.progress })),
            _ => ApiError::not_found("trained steering", &train_id),
        });
    };
    let params = SteerableParams {
        t: req.t,
        ..entry.params.clone()
    };
    params.validate()?;

    let mut canvas = session.canvas.lock().await;
    let rendered = blocking(move || {
        Ok(render_steerable(
            &entry.base,
            &entry.model,
            entry.paste.as_ref(),
            &params,
        )?)
    })
    .await?;
    if canvas.last_evaluate.as_deref() == Some(train_id.as_str()) {
        canvas.image = rendered;
    } else {
        canvas.commit(rendered);
    }
    canvas.last_evaluate = Some(train_id);
    Ok(png_response(&canvas.image))
}

// ---- Chemical ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChemicalRequest {
    stroke: Stroke,
    params: ChemicalParams,
}

async fn submit_chemical(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = session_or_404(&state, &id)?;
    let req: ChemicalRequest = parse_json(&body)?;
    req.stroke.validate()?;
    let store = state.store()?;
    let index = store.nearest_index(req.params.bond_distance)?;
    req.params.validate()?;
    let used = store.distances()[index];

    let job_id = new_job(&state, &id, JobKind::ChemicalApply);
    let (st, jid) = (state.clone(), job_id.clone());
    tokio::spawn(async move {
        let outcome = chemical_job(&st, &session, &jid, req, store, index).await;
        st.0.jobs.finish(&jid, outcome.map_err(|e| e.body()));
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": job_id, "used_distance": used })),
    )
        .into_response())
}

async fn chemical_job(
    state: &AppState,
    session: &Arc<Session>,
    job_id: &str,
    req: ChemicalRequest,
    store: Arc<qbrush_core::family_store::FamilyStore>,
    index: usize,
) -> ApiResult<Value> {
    let _permit = state
        .0
        .workers
        .clone()
        .acquire_owned()
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    state.0.jobs.start(job_id);
    let mut canvas = session.canvas.lock().await;
    let image = canvas.image.clone();
    let requested = req.params.bond_distance;
    let (outcome, used) = blocking(move || {
        let family = store.load_at(index)?;
        let out = apply_chemical(&image, &req.stroke, &req.params, &family)?;
        Ok((out, family.distance))
    })
    .await?;
    let result = json!({
        "requested_distance": requested,
        "used_distance": used,
        "samples": outcome.samples.len(),
        "groups": outcome.groups.len(),
        "leftover_samples": outcome.leftover_samples(),
    });
    canvas.commit(outcome.image);
    Ok(result)
}

// ---- Families ----

async fn family_meta(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let raw = q
        .get("distance")
        .ok_or_else(|| ApiError::invalid("missing query parameter `distance`"))?;
    let distance: f64 = raw
        .parse()
        .map_err(|_| ApiError::invalid(format!("`distance` is not a number: `{raw}`")))?;
    let store = state.store()?;
    let i = store.nearest_index(distance)?;
    let family = tokio::task::spawn_blocking(move || store.load_at(i))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(json!({
        "requested_distance": distance,
        "distance": family.distance,
        "molecule": family.molecule,
        "basis": family.basis,
        "n_qubits": family.n_qubits,
        "m": family.len(),
        "energies": [family.energies[0], family.final_energy()],
        "hf_energy": family.hf_energy,
        "exact_e0": family.exact_e0,
    })))
}

async fn family_index(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let store = state.store()?;
    if store.is_empty() {
        return Err(qbrush_core::family_store::StoreError::Empty(
            store.dir().display().to_string(),
        )
        .into());
    }
    Ok(Json(json!({
        "count": store.len(),
        "distances": store.distances(),
    })))
}
