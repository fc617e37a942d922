//! HTTP scoring API and feedback collector.
//!
//! * `POST /v1/score`: `{"headline", "body"}`, `{"html"}` or `{"url"}`
//! * `POST /v1/feedback`: a verdict on a shown score; answers `{"id"}`
//! * `GET /v1/health`
//!
//! Requests score against an immutable snapshot of the model, which
//! [`AppState::replace`] swaps atomically between requests.

mod extract;
mod feedback;

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Map, Value};

use crate::predict::{Prediction, Scorer};
use incongruity_core::Error as CoreError;

pub use extract::{decode_entities, extract_article, ExtractionError, Extracted, MIN_PARAGRAPH_TOKENS};
pub use feedback::{read_feedback_log, FeedbackLog, FeedbackRecord, FeedbackSubmission, FEEDBACK_LABELS};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Allow `{"url": ...}` requests to fetch pages.
    pub fetch_enabled: bool,
    pub fetch_timeout: Duration,
    pub feedback_log: PathBuf,
}

impl ServiceConfig {
    pub fn new(feedback_log: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            fetch_enabled: false,
            fetch_timeout: Duration::from_secs(10),
            feedback_log: feedback_log.into(),
        }
    }
}

pub struct AppState {
    scorer: RwLock<Arc<Scorer>>,
    feedback: Arc<Mutex<FeedbackLog>>,
    config: ServiceConfig,
    http: Option<reqwest::Client>,
    started: Instant,
}

impl AppState {
    pub fn new(scorer: Scorer, config: ServiceConfig) -> std::io::Result<Self> {
        let feedback = FeedbackLog::open(&config.feedback_log)?;
        let http = if config.fetch_enabled {
            let client = reqwest::Client::builder()
                .timeout(config.fetch_timeout)
                .build()
                .map_err(std::io::Error::other)?;
            Some(client)
        } else {
            None
        };
        Ok(AppState {
            scorer: RwLock::new(Arc::new(scorer)),
            feedback: Arc::new(Mutex::new(feedback)),
            config,
            http,
            started: Instant::now(),
        })
    }

    pub fn scorer(&self) -> Arc<Scorer> {
        self.scorer.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Swaps in a new model; requests already running finish on the old one.
    pub fn replace(&self, scorer: Scorer) {
        *self.scorer.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(scorer);
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/feedback", post(submit_feedback))
        .route("/v1/health", get(health))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Text { headline: String, body: String },
    Html(String),
    Url(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRequest {
    pub source: Source,
    pub model: Option<String>,
}

impl ScoreRequest {
    /// Validates a request body. Errors are client mistakes.
    pub fn parse(body: &[u8]) -> Result<Self, String> {
        let value: Value = serde_json::from_slice(body).map_err(|e| format!("malformed JSON: {e}"))?;
        let Value::Object(obj) = value else {
            return Err("expected a JSON object".into());
        };
        const KEYS: [&str; 5] = ["headline", "body", "html", "url", "model"];
        if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(format!("unknown field {k:?}"));
        }
        let field = |obj: &Map<String, Value>, k: &str| -> Result<Option<String>, String> {
            match obj.get(k) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(format!("{k} must be a string")),
            }
        };
        let (headline, body) = (field(&obj, "headline")?, field(&obj, "body")?);
        let (html, url) = (field(&obj, "html")?, field(&obj, "url")?);
        let text = headline.is_some() || body.is_some();
        let sources = text as usize + html.is_some() as usize + url.is_some() as usize;
        if sources != 1 {
            return Err("give exactly one of headline+body, html or url".into());
        }
        let source = match (headline, body, html, url) {
            (Some(headline), Some(body), _, _) => Source::Text { headline, body },
            (Some(_), None, _, _) | (None, Some(_), _, _) => return Err("headline and body go together".into()),
            (_, _, Some(h), _) => Source::Html(h),
            (_, _, _, Some(u)) => Source::Url(u),
            _ => unreachable!("exactly one source"),
        };
        Ok(ScoreRequest {
            source,
            model: field(&obj, "model")?,
        })
    }
}

async fn fetch(client: &reqwest::Client, url: &str) -> Result<String, Response> {
    let parsed = reqwest::Url::parse(url).map_err(|e| error(StatusCode::BAD_REQUEST, format!("invalid url: {e}")))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(error(StatusCode::BAD_REQUEST, "url must be http or https"));
    }
    let bad_gateway = |e: reqwest::Error| error(StatusCode::BAD_GATEWAY, format!("fetch failed: {e}"));
    let resp = client.get(parsed).send().await.map_err(bad_gateway)?;
    let resp = resp.error_for_status().map_err(bad_gateway)?;
    resp.text().await.map_err(bad_gateway)
}

async fn score(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req = match ScoreRequest::parse(&body) {
        Ok(r) => r,
        Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
    };
    let scorer = state.scorer();
    if let Some(m) = &req.model {
        if m != scorer.model.name() && *m != scorer.model.version() {
            return error(StatusCode::BAD_REQUEST, format!("model {m:?} is not served"));
        }
    }
    let html = match req.source {
        Source::Text { headline, body } => {
            return run_scoring(move || scorer.score_body(&headline, &body)).await;
        }
        Source::Html(h) => h,
        Source::Url(u) => {
            let Some(client) = &state.http else {
                return error(StatusCode::FORBIDDEN, "fetching urls is disabled on this server");
            };
            match fetch(client, &u).await {
                Ok(h) => h,
                Err(resp) => return resp,
            }
        }
    };
    match extract_article(&html) {
        Ok(e) => run_scoring(move || scorer.score_paragraphs(&e.headline, &e.paragraphs)).await,
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn run_scoring(f: impl FnOnce() -> incongruity_core::Result<Prediction> + Send + 'static) -> Response {
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(p)) => Json(p).into_response(),
        Ok(Err(e @ (CoreError::InvalidArticle { .. } | CoreError::EmptySequence))) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, format!("extraction failed: {e}"))
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

async fn submit_feedback(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let sub = match FeedbackSubmission::parse(&body) {
        Ok(s) => s,
        Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
    };
    let log = state.feedback.clone();
    let stored = tokio::task::spawn_blocking(move || {
        let mut log = log.lock().unwrap_or_else(|e| e.into_inner());
        // stamp under the lock so timestamps follow line order
        log.append(&sub.stamp(now_rfc3339()))
    })
    .await;
    match stored {
        Ok(Ok(id)) => Json(json!({ "id": id })).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("storing feedback failed: {e}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    Json(json!({
        "status": "ok",
        "model_version": state.scorer().model.version(),
        "uptime_seconds": state.started.elapsed().as_secs_f64(),
    }))
    .into_response()
}

fn modified(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// Reloads the model whenever the checkpoint's modification time changes.
/// A checkpoint that fails to load leaves the current model in place.
pub async fn watch_checkpoint(state: Arc<AppState>, model: PathBuf, vocab: PathBuf, every: Duration) {
    let mut seen = modified(&model);
    let mut tick = tokio::time::interval(every);
    tick.tick().await;
    loop {
        tick.tick().await;
        let now = modified(&model);
        if now.is_none() || now == seen {
            continue;
        }
        seen = now;
        let (m, v) = (model.clone(), vocab.clone());
        match tokio::task::spawn_blocking(move || Scorer::load(m, v)).await {
            Ok(Ok(scorer)) => {
                eprintln!("reloaded {} (version {})", model.display(), scorer.model.version());
                state.replace(scorer);
            }
            Ok(Err(e)) => eprintln!("keeping current model, reload failed: {e}"),
            Err(e) => eprintln!("keeping current model, reload failed: {e}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(v: Value) -> Result<ScoreRequest, String> {
        ScoreRequest::parse(v.to_string().as_bytes())
    }

    #[test]
    fn request_sources() {
        let r = parse(json!({"headline": "h", "body": "b"})).unwrap();
        assert_eq!(r.source, Source::Text { headline: "h".into(), body: "b".into() });
        assert_eq!(parse(json!({"html": "<p>"})).unwrap().source, Source::Html("<p>".into()));
        let r = parse(json!({"url": "http://x", "model": "ahde"})).unwrap();
        assert_eq!(r.model.as_deref(), Some("ahde"));
        for bad in [
            json!({}),
            json!({"headline": "h"}),
            json!({"body": "b"}),
            json!({"headline": "h", "body": "b", "html": "x"}),
            json!({"html": "x", "url": "y"}),
            json!({"html": 3}),
            json!({"html": "x", "extra": 1}),
            json!("html"),
        ] {
            assert!(parse(bad.clone()).is_err(), "{bad}");
        }
        assert!(ScoreRequest::parse(b"{\"html\":").is_err());
    }
}
