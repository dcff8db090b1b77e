//! HTTP service over [`lpwp_core::session`]: describe a problem, review the
//! suggested declarations one at a time, solve the accepted model.
//!
//! Every response body is JSON; errors are `{code, message, ...}`.

pub mod error;
pub mod store;

use std::net::IpAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lpwp_core::evaluator::{evaluate_predictions, GoldEntry, Prediction};
use lpwp_core::ir::ConstraintKind;
use lpwp_core::lexicon::Lexicon;
use lpwp_core::session::{Action, FieldPatch, Session};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use error::ApiError;
pub use store::Store;

type AppState = Arc<Store>;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub host: IpAddr,
    pub port: u16,
    /// Lexicon file replacing the bundled one.
    pub lexicon: Option<PathBuf>,
    /// Directory for per-session action logs; in-memory only when unset.
    pub persist_dir: Option<PathBuf>,
    /// Origin allowed to call the API from a browser (`*` for any).
    pub cors_origin: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: IpAddr::from([127, 0, 0, 1]),
            port: 8080,
            lexicon: None,
            persist_dir: None,
            cors_origin: None,
        }
    }
}

pub fn open_store(config: &ServerConfig) -> std::io::Result<Store> {
    let lexicon = match &config.lexicon {
        Some(p) => Lexicon::load(p).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?,
        None => Lexicon::shared().clone(),
    };
    Store::open(Arc::new(lexicon), config.persist_dir.clone())
}

pub async fn serve(config: ServerConfig) -> std::io::Result<()> {
    let store = open_store(&config)?;
    let app = router(Arc::new(store), config.cors_origin.as_deref());
    let listener = tokio::net::TcpListener::bind((config.host, config.port)).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}

pub fn router(store: AppState, cors_origin: Option<&str>) -> Router {
    let r = Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/entities", post(set_entities))
        .route("/sessions/{id}/suggestions/next", get(next_suggestion))
        .route("/sessions/{id}/declarations/{i}/accept", post(accept))
        .route("/sessions/{id}/declarations/{i}/reject", post(reject))
        .route("/sessions/{id}/declarations/{i}/edit", post(edit))
        .route("/sessions/{id}/declarations/{i}/retype", post(retype))
        .route("/sessions/{id}/canonical", get(canonical))
        .route("/sessions/{id}/solve", post(solve))
        .route("/evaluate", post(evaluate))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(store);
    match cors_origin {
        None => r,
        Some(origin) => {
            let allow = if origin == "*" {
                AllowOrigin::any()
            } else {
                match HeaderValue::from_str(origin) {
                    Ok(v) => AllowOrigin::exact(v),
                    Err(_) => return r,
                }
            };
            r.layer(
                CorsLayer::new()
                    .allow_origin(allow)
                    .allow_methods([Method::GET, Method::POST])
                    .allow_headers([header::CONTENT_TYPE]),
            )
        }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "empty_body",
            "request body is empty",
        ));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn index(raw: &str) -> Result<usize, ApiError> {
    raw.parse().map_err(|_| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_declaration",
            format!("no declaration {raw}"),
        )
    })
}

fn declaration_view(s: &Session, i: usize) -> Value {
    let d = &s.declarations[i];
    json!({
        "index": d.index,
        "status": d.status,
        "declaration_ir": d.ir,
        "rendered": d.rendered,
        "declaration": d.declaration,
        "source": d.source,
        "source_span": d.source_span,
        "prompt": d.prompt,
        "error": d.error.as_ref().map(|m| json!({"code": "suggestion_failed", "message": m})),
        "canonical_row": s.row_preview(i).ok().flatten(),
    })
}

fn session_view(s: &Session) -> Value {
    json!({
        "session_id": s.id,
        "description": s.description,
        "entities": s.entities,
        "cursor": s.cursor,
        "prompt_count": s.prompt_count(),
        "declarations": (0..s.declarations.len()).map(|i| declaration_view(s, i)).collect::<Vec<_>>(),
        "model_ir": s.model_ir(),
    })
}

/// Applies one action under the session's lock and persists the log tail.
async fn act(
    store: &Store,
    id: &str,
    build: impl FnOnce(&Session) -> Result<Action, ApiError>,
) -> Result<Response, ApiError> {
    let handle = store.get(id)?;
    let mut s = handle.lock().await;
    let action = build(&s)?;
    let from = s.log.len();
    let touched = s.apply(action, &store.generator)?;
    store.persist(&s, from)?;
    Ok(match touched {
        Some(i) => Json(declaration_view(&s, i)).into_response(),
        None => Json(session_view(&s)).into_response(),
    })
}

#[derive(Deserialize)]
struct CreateRequest {
    description: String,
}

async fn create_session(State(store): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let s = Session::create(id, &req.description, store.generator.lexicon())?;
    let out = json!({"session_id": s.id, "entities": s.entities});
    store.insert(s)?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn get_session(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let handle = store.get(&id)?;
    let s = handle.lock().await;
    Ok(Json(session_view(&s)))
}

async fn get_log(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let handle = store.get(&id)?;
    let s = handle.lock().await;
    Ok(Json(json!({ "log": s.log })))
}

#[derive(Deserialize)]
struct EntitiesRequest {
    entities: Vec<lpwp_core::ir::EntitySpan>,
}

async fn set_entities(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: EntitiesRequest = parse_body(&body)?;
    act(&store, &id, |_| Ok(Action::SetEntities { entities: req.entities })).await
}

async fn next_suggestion(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = store.get(&id)?;
    let mut s = handle.lock().await;
    let from = s.log.len();
    let touched = s.apply(Action::Next, &store.generator)?;
    store.persist(&s, from)?;
    Ok(match touched {
        Some(i) => Json(declaration_view(&s, i)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn accept(State(store): State<AppState>, Path((id, i)): Path<(String, String)>) -> Result<Response, ApiError> {
    let index = index(&i)?;
    act(&store, &id, |_| Ok(Action::Accept { index })).await
}

async fn reject(State(store): State<AppState>, Path((id, i)): Path<(String, String)>) -> Result<Response, ApiError> {
    let index = index(&i)?;
    act(&store, &id, |_| Ok(Action::Reject { index })).await
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EditRequest {
    Ir { ir: String },
    Patch(FieldPatch),
}

/// Body is `{"ir": ...}`, a field patch, or raw IR text.
async fn edit(
    State(store): State<AppState>,
    Path((id, i)): Path<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let index = index(&i)?;
    let text = String::from_utf8_lossy(&body);
    let req = if text.trim_start().starts_with('{') {
        parse_body::<EditRequest>(&body)?
    } else if text.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "empty_body",
            "request body is empty",
        ));
    } else {
        EditRequest::Ir { ir: text.into_owned() }
    };
    act(&store, &id, |s| {
        let ir = match req {
            EditRequest::Ir { ir } => ir,
            EditRequest::Patch(p) => s.patch_ir(index, &p)?,
        };
        Ok(Action::Edit { index, ir })
    })
    .await
}

#[derive(Deserialize)]
struct RetypeRequest {
    const_type: String,
}

async fn retype(
    State(store): State<AppState>,
    Path((id, i)): Path<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let index = index(&i)?;
    let req: RetypeRequest = parse_body(&body)?;
    let kind: ConstraintKind = req.const_type.parse().map_err(|e: lpwp_core::ir::UnknownKind| {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_kind", e.to_string())
    })?;
    act(&store, &id, |_| Ok(Action::Retype { index, kind })).await
}

async fn canonical(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let handle = store.get(&id)?;
    let s = handle.lock().await;
    let form = s.canonical()?;
    Ok(Json(json!({ "table": form.table(), "form": form })))
}

async fn solve(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let handle = store.get(&id)?;
    let s = handle.lock().await;
    let report = s.solve()?;
    Ok(Json(
        serde_json::to_value(report).map_err(|e| ApiError::internal(e.to_string()))?,
    ))
}

#[derive(Deserialize)]
struct EvaluateRequest {
    pred_corpus: Vec<Prediction>,
    gold_corpus: Vec<GoldEntry>,
}

async fn evaluate(body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: EvaluateRequest = parse_body(&body)?;
    let report = evaluate_predictions(&req.pred_corpus, &req.gold_corpus)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus", e.to_string()))?;
    Ok(Json(
        serde_json::to_value(report).map_err(|e| ApiError::internal(e.to_string()))?,
    ))
}
