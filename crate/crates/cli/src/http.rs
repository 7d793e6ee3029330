//! HTTP surface of the conversation service.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/v1/sessions` | none | `{"session_id"}` |
//! | POST | `/v1/sessions/{id}/utterance` | multipart `text`, `audio`, `frames` | `{"response_text", "description_text", "audio_url", "parse_ok"}` |
//! | GET | `/v1/sessions/{id}/history` | | turn array |
//! | GET | `/v1/audio/{name}` | | `audio/wav` |
//! | GET | `/v1/health` | | `{"status":"ok"}` |
//!
//! An `Idempotency-Key` header on the utterance post makes retries safe.

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use msense_core::serve::{ConversationService, ServeError, TurnRequest, MAX_FRAMES};
use serde_json::json;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
const BODY_LIMIT: usize = 64 * 1024 * 1024;

pub struct ApiError(ServeError);

impl From<ServeError> for ApiError {
    fn from(e: ServeError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self.0 {
            ServeError::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "error": self.0.to_string() })),
            ServeError::BadRequest(_) => (StatusCode::BAD_REQUEST, json!({ "error": self.0.to_string() })),
            ServeError::Conflict(_) => (StatusCode::CONFLICT, json!({ "error": self.0.to_string() })),
            ServeError::Backend { diagnostic_id, .. } => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "error": "internal error", "diagnostic_id": diagnostic_id }),
            ),
        };
        (status, Json(body)).into_response()
    }
}

type AppState = Arc<ConversationService>;

pub fn router(service: Arc<ConversationService>) -> Router {
    Router::new()
        .route("/v1/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/utterance", post(post_utterance))
        .route("/v1/sessions/{id}/history", get(history))
        .route("/v1/audio/{name}", get(audio))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(service)
}

async fn create_session(State(svc): State<AppState>) -> impl IntoResponse {
    (StatusCode::CREATED, Json(json!({ "session_id": svc.create_session() })))
}

async fn history(State(svc): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(svc.history(&id)?).into_response())
}

async fn audio(State(svc): State<AppState>, Path(name): Path<String>) -> Response {
    let Some(path) = svc.audio_file(&name) else {
        return (StatusCode::NOT_FOUND, Json(json!({ "error": "no such audio" }))).into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response(),
        Err(e) => ApiError(ServeError::Backend { diagnostic_id: "audio-read".into(), message: e.to_string() }).into_response(),
    }
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError(ServeError::BadRequest(msg.into()))
}

async fn read_turn(mut form: Multipart) -> Result<TurnRequest, ApiError> {
    let mut req = TurnRequest::default();
    while let Some(field) = form.next_field().await.map_err(|e| bad(format!("multipart: {e}")))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| bad(format!("multipart field `{name}`: {e}")))?;
        match name.as_str() {
            "text" => {
                let text = String::from_utf8(bytes.to_vec()).map_err(|_| bad("text must be UTF-8"))?;
                req.text = Some(text);
            }
            "audio" => {
                if req.audio.is_some() {
                    return Err(bad("only one audio part is allowed"));
                }
                req.audio = Some(bytes.to_vec());
            }
            "frames" => {
                if req.frames.len() == MAX_FRAMES {
                    return Err(bad(format!("at most {MAX_FRAMES} frames")));
                }
                req.frames.push(bytes.to_vec());
            }
            other => return Err(bad(format!("unexpected multipart field `{other}`"))),
        }
    }
    Ok(req)
}

async fn post_utterance(
    State(svc): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    form: Multipart,
) -> Result<Response, ApiError> {
    let mut req = read_turn(form).await?;
    req.idempotency_key = headers
        .get(IDEMPOTENCY_HEADER)
        .map(|v| v.to_str().map(str::to_string).map_err(|_| bad("idempotency key must be ASCII")))
        .transpose()?;
    let reply = tokio::task::spawn_blocking(move || svc.post_utterance(&id, req))
        .await
        .map_err(|e| ApiError(ServeError::Backend { diagnostic_id: "join".into(), message: e.to_string() }))??;
    Ok(Json(reply).into_response())
}
