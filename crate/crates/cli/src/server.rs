//! HTTP API over a workspace. Files under the workspace are the store;
//! label writes are serialized and atomically replace the labels file.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::Mutex;

use scenewatch_core::manifest::load_manifest;
use scenewatch_core::scene::LabelsFile;
use scenewatch_core::workspace::Workspace;
use scenewatch_core::{Error, RgbImage};

const INDEX_HTML: &str = include_str!("ui/index.html");

struct AppState {
    root: PathBuf,
    ui_dir: Option<PathBuf>,
    label_writes: Mutex<()>,
}

type Shared = Arc<AppState>;

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn not_found(what: impl Into<String>) -> Self {
        Self { status: StatusCode::NOT_FOUND, code: "NotFound", message: what.into(), field: None }
    }

    fn bad_request(code: &'static str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, code, message: message.into(), field: Some(field.into()) }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownScene(_) | Error::ManifestNotFound(_) => StatusCode::NOT_FOUND,
            Error::LabelsSchemaError { .. } | Error::DanglingLabel { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let field = match &e {
            Error::LabelsSchemaError { field, .. } => Some(field.clone()),
            _ => None,
        };
        Self { status, code: e.code(), message: e.to_string(), field }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut err = json!({"code": self.code, "message": self.message});
        if let Some(f) = self.field {
            err["field"] = Value::String(f);
        }
        (self.status, Json(json!({ "error": err }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn workspace(state: &AppState) -> ApiResult<Workspace> {
    Ok(Workspace::open(&state.root)?)
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn list_scenes(State(state): State<Shared>) -> ApiResult<Json<Value>> {
    let ws = workspace(&state)?;
    let pairs: Vec<Value> = ws
        .config
        .pairs
        .iter()
        .map(|p| {
            json!({
                "id": p.id,
                "reference": p.reference,
                "query": p.query,
                "has_report": ws.report_path(&p.id).is_file(),
                "has_labels": ws.labels_path(&p.query).is_file(),
            })
        })
        .collect();
    Ok(Json(json!({ "scenes": ws.config.scenes, "pairs": pairs })))
}

async fn scene_image(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let ws = workspace(&state)?;
    let scene = ws.scene(&id)?;
    let path = ws.root().join(&scene.image_path);
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png {
        std::fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?
    } else {
        RgbImage::open(&path)?.encode_png()?
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn scene_segments(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let ws = workspace(&state)?;
    ws.scene(&id)?;
    let manifest = load_manifest(&ws.manifest_path(&id))?;
    Ok(json_text(manifest.to_json()))
}

fn empty_labels(ws: &Workspace, scene_id: &str) -> LabelsFile {
    let reference = ws.pair_for_query(scene_id).map(|p| p.reference.clone()).unwrap_or_default();
    LabelsFile::new(scene_id, reference)
}

async fn get_labels(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let ws = workspace(&state)?;
    ws.scene(&id)?;
    let labels = ws.labels(&id)?.unwrap_or_else(|| empty_labels(&ws, &id));
    Ok(json_text(labels.to_json()))
}

async fn post_labels(State(state): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    let value: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("LabelsSchemaError", "$", format!("invalid JSON: {e}")))?;
    let incoming = LabelsFile::from_value(value)?;
    if incoming.scene_id != id {
        return Err(ApiError::bad_request(
            "LabelsSchemaError",
            "scene_id",
            format!("body is for `{}` but the URL names `{id}`", incoming.scene_id),
        ));
    }
    let _guard = state.label_writes.lock().await;
    let ws = workspace(&state)?;
    ws.scene(&id)?;
    if let Ok(manifest) = ws.manifest(&id) {
        for (i, rec) in incoming.labels.iter().enumerate() {
            if manifest.segment(&rec.segment_id).is_none() {
                return Err(ApiError::bad_request(
                    "DanglingLabel",
                    format!("labels[{i}].segment_id"),
                    format!("scene `{id}` has no segment `{}`", rec.segment_id),
                ));
            }
        }
    }
    let mut current = ws.labels(&id)?.unwrap_or_else(|| LabelsFile::new(&id, &incoming.reference_id));
    current.reference_id = incoming.reference_id.clone();
    current.merge(incoming.labels);
    ws.save_labels(&current)?;
    Ok(json_text(current.to_json()))
}

async fn get_report(State(state): State<Shared>, UrlPath(pair): UrlPath<String>) -> ApiResult<Response> {
    let ws = workspace(&state)?;
    let path = ws.report_path(&pair);
    match std::fs::read_to_string(&path) {
        Ok(text) => Ok(json_text(text)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError::not_found(format!("no report for `{pair}`"))),
        Err(e) => Err(Error::Io { path, source: e }.into()),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or_default() {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "wasm" => "application/wasm",
        _ => "application/octet-stream",
    }
}

async fn static_asset(State(state): State<Shared>, uri: Uri) -> ApiResult<Response> {
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    if rel.starts_with("api/") {
        return Err(ApiError::not_found(format!("no route {}", uri.path())));
    }
    let Some(dir) = &state.ui_dir else {
        return if rel == "index.html" {
            Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], INDEX_HTML).into_response())
        } else {
            Err(ApiError::not_found(uri.path().to_string()))
        };
    };
    let rel_path = Path::new(rel);
    if rel_path.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(ApiError::not_found(uri.path().to_string()));
    }
    let path = dir.join(rel_path);
    match std::fs::read(&path) {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response()),
        Err(_) => Err(ApiError::not_found(uri.path().to_string())),
    }
}

pub fn router(root: PathBuf, ui_dir: Option<PathBuf>) -> Router {
    let state = Arc::new(AppState { root, ui_dir, label_writes: Mutex::new(()) });
    Router::new()
        .route("/api/scenes", get(list_scenes))
        .route("/api/scenes/{id}/image", get(scene_image))
        .route("/api/scenes/{id}/segments", get(scene_segments))
        .route("/api/labels/{scene_id}", get(get_labels).post(post_labels))
        .route("/api/reports/{pair_id}", get(get_report))
        .fallback(static_asset)
        .with_state(state)
}

/// Binds and serves until the process ends. Prints the bound address.
pub fn serve_blocking(ws: Workspace, host: &str, port: u16, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        let addr: SocketAddr = listener.local_addr()?;
        println!("listening on http://{addr}");
        axum::serve(listener, router(ws.root().to_path_buf(), ui_dir)).await
    })
}
