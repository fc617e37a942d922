#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use incongruity_cli::service::{router, AppState, ServiceConfig};
use incongruity_cli::Scorer;
use incongruity_core::datagen::make_synthetic_corpus;
use incongruity_core::encoders::save_checkpoint;
use incongruity_core::{Article, ModelConfig, ModelKind, ModelParameters, Vocabulary};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli<S: AsRef<str>>(args: &[S]) -> Output {
    let argv = std::iter::once("incongruity".to_string()).chain(args.iter().map(|a| a.as_ref().to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = incongruity_cli::run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn p(path: &Path) -> String {
    path.display().to_string()
}

/// A small synthetic corpus plus an untrained checkpoint over its vocabulary.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub corpus: Vec<Article>,
    pub vocab: Vocabulary,
    pub vocab_path: PathBuf,
    pub model_path: PathBuf,
}

pub fn fixture(kind: ModelKind, ip: bool, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab) = make_synthetic_corpus(60, 3, 40, seed).unwrap();
    let vocab_path = dir.path().join("vocab.tsv");
    vocab.write_tsv(&vocab_path).unwrap();
    let config = ModelConfig {
        ip,
        d_emb: 8,
        d_word: 8,
        d_para: 8,
        conv_filters: 4,
        ..ModelConfig::new(kind, vocab.len())
    };
    let model = ModelParameters::<f32>::init(config, seed).unwrap();
    let model_path = dir.path().join("model.bwck");
    save_checkpoint(&model, &model_path).unwrap();
    Fixture {
        dir,
        corpus,
        vocab,
        vocab_path,
        model_path,
    }
}

impl Fixture {
    pub fn state(&self, fetch: bool) -> Arc<AppState> {
        let scorer = Scorer::load(&self.model_path, &self.vocab_path).unwrap();
        let mut config = ServiceConfig::new(self.dir.path().join("feedback.jsonl"));
        config.fetch_enabled = fetch;
        Arc::new(AppState::new(scorer, config).unwrap())
    }

    /// Headline and newline-separated body text of corpus article `i`.
    pub fn text(&self, i: usize) -> (String, String) {
        let a = &self.corpus[i];
        let words = |t: &[incongruity_core::Token]| self.vocab.decode(t).join(" ");
        let body = a.paragraphs.iter().map(|p| words(p)).collect::<Vec<_>>().join("\n");
        (words(&a.headline), body)
    }
}

pub async fn call(app: &Router, method: &str, path: &str, body: impl Into<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(Body::from(body.into()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

pub fn app(state: Arc<AppState>) -> Router {
    router(state)
}
