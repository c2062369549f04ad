use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use voxvid_core::cloud::RecordLocation;
use voxvid_core::{
    rle, BackendError, BoxPrompt, CloudError, CloudFormat, FusionMode, PipelineError, PointMask, Prompt3D64,
    PromptError, PropagationParams, RunParams64,
};

use crate::config::BackendSpec;
use crate::store::{ResultSummary, SegmentError, Store, StoreError};

const MAX_UPLOAD_BYTES: usize = 1 << 30;

/// JSON error reply: `{"error": message, "code": code, ...extra}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub extra: Option<(&'static str, Value)>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            extra: None,
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        let code = match what {
            "cloud" => "UnknownCloud",
            "session" => "UnknownSession",
            _ => "UnknownResult",
        };
        Self::new(StatusCode::NOT_FOUND, code, format!("unknown {what} {id}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.message, "code": self.code});
        if let Some((key, value)) = self.extra {
            body[key] = value;
        }
        (self.status, Json(body)).into_response()
    }
}

fn cloud_error(e: CloudError) -> ApiError {
    let code = match &e {
        CloudError::UnreadableFile { .. } | CloudError::Io(_) => "UnreadableFile",
        CloudError::MalformedRecord { .. } => "MalformedRecord",
        CloudError::UnsupportedPlyFeature(_) => "UnsupportedPlyFeature",
        CloudError::EmptyCloud => "EmptyCloud",
        CloudError::DegenerateCloud => "DegenerateCloud",
        CloudError::InvalidPoint { .. } => "InvalidPoint",
        CloudError::UnknownFormat(_) => "UnknownFormat",
    };
    let mut err = ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string());
    if let CloudError::MalformedRecord { location, .. } = e {
        err.extra = Some((
            "location",
            match location {
                RecordLocation::Line(line) => json!({ "line": line }),
                RecordLocation::Offset(offset) => json!({ "offset": offset }),
            },
        ));
    }
    err
}

fn store_error(e: StoreError) -> ApiError {
    match e {
        StoreError::UnknownCloud(id) => ApiError::not_found("cloud", &id),
        StoreError::ResolutionOutOfRange(_) => {
            ApiError::new(StatusCode::BAD_REQUEST, "ResolutionOutOfRange", e.to_string())
        }
        StoreError::Cloud(c) => cloud_error(c),
        StoreError::Backend(_) => ApiError::new(StatusCode::BAD_REQUEST, "InvalidBackend", e.to_string()),
        StoreError::Voxel(_) | StoreError::Persistence { .. } => {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
        }
    }
}

fn backend_code(e: &BackendError) -> &'static str {
    match e {
        BackendError::BackendUnavailable { .. } => "BackendUnavailable",
        BackendError::InvalidPrompt(_) => "InvalidPrompt",
        BackendError::InvalidRequest(_) => "InvalidRequest",
        BackendError::ProtocolError(_) => "ProtocolError",
        BackendError::RemoteFailure { .. } => "RemoteFailure",
    }
}

fn pipeline_error(e: PipelineError) -> ApiError {
    let unprocessable = |code| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string());
    match &e {
        PipelineError::Prompt(p) => unprocessable(match p {
            PromptError::EmptyMaskPrompt => "EmptyMaskPrompt",
            PromptError::MaskLengthMismatch { .. } => "MaskLengthMismatch",
            PromptError::PromptOutsideGrid(_) => "PromptOutsideGrid",
            PromptError::InvalidBox(_) => "InvalidBox",
        }),
        PipelineError::Backend { error, .. } => match error {
            BackendError::BackendUnavailable { .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "BackendUnavailable", e.to_string())
            }
            other => unprocessable(backend_code(other)),
        },
        PipelineError::PartialBackendFailure { .. } => unprocessable("PartialBackendFailure"),
        PipelineError::DimensionMismatch(_) | PipelineError::GridCloudMismatch { .. } => {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
        }
    }
}

/// Parses a JSON body, answering schema errors in the service's own format.
fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidBody", e.to_string()))
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/clouds", post(create_cloud))
        .route("/clouds/{id}", get(get_cloud))
        .route("/clouds/{id}/points", get(get_points))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/prompts", post(add_prompt))
        .route("/sessions/{id}/results/{rid}/mask", get(get_mask))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(store)
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Debug, Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

async fn create_cloud(
    State(store): State<Arc<Store>>,
    Query(q): Query<FormatQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let format = match q.format.as_deref() {
        None => CloudFormat::Auto,
        Some(f) => f
            .parse()
            .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "UnknownFormat", e))?,
    };
    let (cloud, created) = tokio::task::spawn_blocking(move || store.add_cloud(&body, format))
        .await
        .map_err(join_error)?
        .map_err(store_error)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(cloud_summary(&cloud))).into_response())
}

fn cloud_summary(cloud: &crate::store::StoredCloud) -> Value {
    let (lo, hi) = cloud.original.bounds();
    json!({
        "cloud_id": cloud.id,
        "points": cloud.original.len(),
        "bbox_min": lo,
        "bbox_max": hi,
    })
}

async fn get_cloud(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let cloud = store.cloud(&id).ok_or_else(|| ApiError::not_found("cloud", &id))?;
    Ok(Json(cloud_summary(&cloud)))
}

#[derive(Debug, Deserialize)]
struct StrideQuery {
    stride: Option<usize>,
}

/// Every `stride`-th point in original coordinates as `[x,y,z,r,g,b]`.
async fn get_points(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<StrideQuery>,
) -> Result<Json<Value>, ApiError> {
    let cloud = store.cloud(&id).ok_or_else(|| ApiError::not_found("cloud", &id))?;
    let stride = q.stride.unwrap_or(1);
    if stride == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "InvalidStride", "stride must be at least 1"));
    }
    let points: Vec<[f64; 6]> = cloud
        .original
        .points()
        .iter()
        .step_by(stride)
        .map(|p| {
            let [x, y, z] = p.position;
            let [r, g, b] = p.color;
            [x, y, z, r, g, b]
        })
        .collect();
    Ok(Json(json!({
        "cloud_id": cloud.id,
        "n": cloud.original.len(),
        "stride": stride,
        "points": points,
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    cloud_id: String,
    resolution: Option<usize>,
    backend: Option<BackendSpec>,
}

async fn create_session(
    State(store): State<Arc<Store>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    if store.cloud(&req.cloud_id).is_none() {
        return Err(ApiError::not_found("cloud", &req.cloud_id));
    }
    let session = tokio::task::spawn_blocking(move || store.create_session(&req.cloud_id, req.resolution, req.backend))
        .await
        .map_err(join_error)?
        .map_err(store_error)?;
    let body = json!({
        "session_id": session.id,
        "cloud_id": session.cloud.id,
        "resolution": session.resolution,
        "backend": session.backend.to_string(),
        "occupied_voxels": session.grid.occupied_count(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let session = store.session(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
    let history: Vec<ResultSummary> = session.history().iter().map(|r| r.summary.clone()).collect();
    Ok(Json(json!({
        "session_id": session.id,
        "cloud_id": session.cloud.id,
        "resolution": session.resolution,
        "backend": session.backend.to_string(),
        "history": history,
    })))
}

/// A prompt in the cloud's original coordinates.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PromptBody {
    Point {
        point: [f64; 3],
    },
    Box {
        center: [f64; 3],
        dims: [f64; 3],
        #[serde(default)]
        rotation: [f64; 3],
    },
    Mask {
        indices: Vec<usize>,
    },
}

#[derive(Debug, Deserialize)]
struct AddPrompt {
    #[serde(flatten)]
    prompt: PromptBody,
    color_tolerance: Option<f64>,
    seed_search_radius: Option<usize>,
    /// `union` or `vote:<k>`.
    fusion: Option<String>,
}

fn parse_fusion(s: &str) -> Option<FusionMode> {
    if s == "union" {
        return Some(FusionMode::Union);
    }
    let k: usize = s.strip_prefix("vote:")?.parse().ok()?;
    (1..=6).contains(&k).then_some(FusionMode::Vote { min_views: k })
}

fn invalid_params(message: String) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidParams", message)
}

async fn add_prompt(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: AddPrompt = parse_body(&body)?;
    let session = store.session(&id).ok_or_else(|| ApiError::not_found("session", &id))?;

    let tau = req.color_tolerance.unwrap_or(store.config.color_tolerance);
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid_params(format!("color_tolerance {tau} outside [0, 1]")));
    }
    let fusion = match req.fusion.as_deref() {
        None => FusionMode::Union,
        Some(f) => parse_fusion(f).ok_or_else(|| invalid_params(format!("unknown fusion mode `{f}`")))?,
    };
    let params = RunParams64 {
        propagation: PropagationParams {
            color_tolerance: tau,
            seed_search_radius: req.seed_search_radius.unwrap_or(store.config.seed_search_radius),
        },
        fusion,
        parallel: true,
    };

    let cloud = &session.cloud;
    let t = &cloud.transform;
    let prompt = match req.prompt {
        PromptBody::Point { point } => Prompt3D64::Point(t.apply(point)),
        PromptBody::Box { center, dims, rotation } => Prompt3D64::Box(BoxPrompt {
            center: t.apply(center),
            dims: dims.map(|d| t.apply_length(d)),
            rotation,
        }),
        PromptBody::Mask { indices } => {
            let n = cloud.normalized.len();
            if let Some(bad) = indices.iter().find(|&&i| i >= n) {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "MaskIndexOutOfRange",
                    format!("mask index {bad} out of range for {n} points"),
                ));
            }
            Prompt3D64::Mask(PointMask::from_indices(n, indices))
        }
    };

    let guard = session.try_begin().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "SessionBusy",
            format!("session {id} is already running a prompt"),
        )
    })?;
    let stored = tokio::task::spawn_blocking(move || {
        let session = Arc::clone(&session);
        store.segment(&guard, &session, &prompt, &params)
    })
    .await
    .map_err(join_error)?
    .map_err(|e| match e {
        SegmentError::Pipeline(p) => pipeline_error(p),
        SegmentError::Store(s) => store_error(s),
    })?;
    Ok((StatusCode::CREATED, Json(&stored.summary)).into_response())
}

#[derive(Debug, Deserialize)]
struct MaskQuery {
    format: Option<String>,
}

#[derive(Serialize)]
struct IndicesPayload<'a> {
    n: usize,
    indices: &'a [usize],
}

#[derive(Serialize)]
struct RlePayload {
    n: usize,
    rle: Vec<u32>,
}

async fn get_mask(
    State(store): State<Arc<Store>>,
    Path((id, rid)): Path<(String, String)>,
    Query(q): Query<MaskQuery>,
) -> Result<Response, ApiError> {
    let session = store.session(&id).ok_or_else(|| ApiError::not_found("session", &id))?;
    let result = session.result(&rid).ok_or_else(|| ApiError::not_found("result", &rid))?;
    let mask = &result.mask;
    let body = match q.format.as_deref().unwrap_or("indices_json") {
        "indices_json" => serde_json::to_vec(&IndicesPayload {
            n: mask.len(),
            indices: &mask.indices(),
        }),
        "rle_json" => serde_json::to_vec(&RlePayload {
            n: mask.len(),
            rle: rle::encode(mask.bits()),
        }),
        other => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "UnknownFormat",
                format!("unknown mask format `{other}` (expected indices_json or rle_json)"),
            ))
        }
    }
    .expect("mask payload serializes");
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response())
}
