use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use anyhow::{Context, Result};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use luxappraise::annotation::{AnnotationService, Response, ServiceConfig, Task, TaskKind};
use luxappraise::embedding::AnchorRecord;
use luxappraise::io::read_records;
use luxappraise::model::{Dataset, RoomCategory};
use luxappraise::Error;

#[derive(clap::Args)]
pub struct ServeArgs {
    /// Dataset directory; photo requests are checked against it.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    /// Append-only response log; created when missing, replayed when present.
    /// LUXAPPRAISE_LOG takes precedence when set.
    #[arg(long, env = "LUXAPPRAISE_LOG")]
    log: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Directory of photo files named `<photo id>.<ext>`.
    #[arg(long)]
    assets: Option<PathBuf>,
    /// Anchor file served by /api/anchors.
    #[arg(long)]
    anchors: Option<PathBuf>,
    #[arg(long, default_value_t = ServiceConfig::default().required_responses)]
    required: usize,
    #[arg(long, default_value_t = ServiceConfig::default().catch_fraction)]
    catch_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the latent luxury on placeholder photos.
    #[arg(long)]
    show_latent: bool,
}

struct AppState {
    service: Mutex<AnnotationService>,
    dataset: Dataset,
    assets: Option<PathBuf>,
    show_latent: bool,
}

type Shared = Arc<AppState>;

impl AppState {
    fn service(&self) -> MutexGuard<'_, AnnotationService> {
        // A panic while holding the lock leaves the in-memory state possibly
        // ahead of the log; the log stays authoritative on restart.
        self.service.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Protocol(_) => StatusCode::BAD_REQUEST,
            Error::Invalid(_) | Error::InsufficientStratum { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Io { .. } | Error::Parse { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn parse_room(room: Option<&str>) -> Result<Option<RoomCategory>, ApiError> {
    room.filter(|r| !r.is_empty())
        .map(|r| r.parse().map_err(|e: Error| bad_request(e.to_string())))
        .transpose()
}

#[derive(Deserialize)]
struct TaskQuery {
    worker: Option<String>,
    kind: Option<String>,
    room: Option<String>,
}

async fn next_task(State(app): State<Shared>, Query(q): Query<TaskQuery>) -> Result<HttpResponse, ApiError> {
    let worker = q.worker.filter(|w| !w.is_empty()).ok_or_else(|| bad_request("missing worker"))?;
    let kind: TaskKind = q.kind.as_deref().unwrap_or("grid").parse()?;
    let room = parse_room(q.room.as_deref())?;
    let task: Option<Task> = app.service().next_task(&worker, kind, room)?;
    Ok(match task {
        Some(t) => Json(t).into_response(),
        None => Json(json!({ "empty": true })).into_response(),
    })
}

async fn submit(
    State(app): State<Shared>,
    body: Result<Json<Response>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(response) = body.map_err(|e| bad_request(e.body_text()))?;
    if response.worker_id().is_empty() {
        return Err(bad_request("missing worker_id"));
    }
    let seq = app.service().submit(response)?;
    Ok(Json(json!({ "seq": seq })))
}

async fn progress(State(app): State<Shared>) -> Json<luxappraise::annotation::Progress> {
    Json(app.service().progress())
}

#[derive(Deserialize)]
struct RoomQuery {
    room: Option<String>,
}

async fn anchors(State(app): State<Shared>, Query(q): Query<RoomQuery>) -> Result<Json<serde_json::Value>, ApiError> {
    let room = parse_room(q.room.as_deref())?.ok_or_else(|| bad_request("missing room"))?;
    let service = app.service();
    let ids = service
        .anchors(room)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no anchors for room {room}")))?;
    Ok(Json(json!({ "room": room, "anchors": ids })))
}

async fn worker(State(app): State<Shared>, Path(id): Path<String>) -> Result<HttpResponse, ApiError> {
    Ok(Json(app.service().worker_report(&id)?).into_response())
}

fn content_type(ext: &str) -> Option<&'static str> {
    match ext.to_ascii_lowercase().as_str() {
        "jpg" | "jpeg" => Some("image/jpeg"),
        "png" => Some("image/png"),
        "webp" => Some("image/webp"),
        "svg" => Some("image/svg+xml"),
        _ => None,
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn placeholder_svg(id: &str, room: Option<RoomCategory>, latent: Option<f64>) -> String {
    let room = room.map_or("unknown room".to_string(), |r| r.to_string());
    let latent = latent.map_or(String::new(), |l| {
        format!(r#"<text x="160" y="150" font-size="14" text-anchor="middle">latent {l:.2}</text>"#)
    });
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="320" height="240" viewBox="0 0 320 240">"#,
            r##"<rect width="320" height="240" fill="#ddd"/>"##,
            r#"<text x="160" y="105" font-size="16" text-anchor="middle">{}</text>"#,
            r#"<text x="160" y="128" font-size="13" text-anchor="middle">{}</text>{}</svg>"#
        ),
        escape_xml(id),
        escape_xml(&room),
        latent
    )
}

async fn photo(State(app): State<Shared>, Path(id): Path<String>) -> Result<HttpResponse, ApiError> {
    let record = app
        .dataset
        .photo(&id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("photo {id}")))?;
    if let Some(dir) = &app.assets {
        for ext in ["jpg", "jpeg", "png", "webp", "svg"] {
            let path = dir.join(format!("{id}.{ext}"));
            if let Ok(bytes) = tokio::fs::read(&path).await {
                let ct = content_type(ext).expect("listed extension");
                return Ok(([(header::CONTENT_TYPE, ct)], bytes).into_response());
            }
        }
    }
    let latent = if app.show_latent { record.latent_luxury } else { None };
    let svg = placeholder_svg(&id, record.room_true, latent);
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

async fn cors(req: Request, next: Next) -> HttpResponse {
    let mut resp = if req.method() == Method::OPTIONS {
        StatusCode::NO_CONTENT.into_response()
    } else {
        next.run(req).await
    };
    let h = resp.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, OPTIONS"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("content-type"));
    resp
}

fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/task", get(next_task))
        .route("/api/response", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/anchors", get(anchors))
        .route("/api/worker/{id}", get(worker))
        .route("/api/photo/{id}", get(photo))
        .layer(middleware::from_fn(cors))
        .with_state(state)
}

fn load_anchor_ids(path: &std::path::Path) -> Result<BTreeMap<RoomCategory, Vec<String>>> {
    let records: Vec<AnchorRecord> = read_records(path)?;
    let sets = luxappraise::embedding::AnchorSet::from_records(&records)?;
    Ok(sets.into_iter().map(|(room, set)| (room, set.anchors)).collect())
}

/// The LUXAPPRAISE_LOG variable, when set and non-empty, overrides `--log`.
pub fn log_path(flag: PathBuf) -> PathBuf {
    std::env::var_os("LUXAPPRAISE_LOG")
        .filter(|v| !v.is_empty())
        .map_or(flag, PathBuf::from)
}

pub fn run(args: ServeArgs) -> Result<()> {
    let dataset = luxappraise::io::load_dataset_dir(&args.data)
        .with_context(|| format!("loading dataset from {}", args.data.display()))?;
    let tasks: Vec<Task> = read_records(&args.tasks)?;
    let config = ServiceConfig {
        required_responses: args.required,
        catch_fraction: args.catch_fraction,
        seed: args.seed,
    };
    let mut service = AnnotationService::open(tasks, &log_path(args.log), config)?;
    if let Some(path) = &args.anchors {
        service = service.with_anchors(load_anchor_ids(path)?);
    }
    let state = Arc::new(AppState {
        service: Mutex::new(service),
        dataset,
        assets: args.assets,
        show_latent: args.show_latent,
    });
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .with_context(|| format!("binding {}:{}", args.host, args.port))?;
        let addr: SocketAddr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
