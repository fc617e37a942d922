//! Loading trained models and turning text into predictions. Shared by the
//! `score`/`eval` commands and the HTTP service so both paths agree.

use std::path::Path;

use serde::{Deserialize, Serialize};

use incongruity_core::encoders::{load_checkpoint, MAGIC};
use incongruity_core::features::LinearBaseline;
use incongruity_core::textcorpus::{article_from_paragraphs, article_from_text, SentenceSplitter, Token};
use incongruity_core::{sha256_hex, Article, Error, ModelParameters, Result, ScoredPrediction, Vocabulary};

/// Scores at or above this are labeled incongruent.
pub const DISPLAY_THRESHOLD: f64 = 0.5;

/// A neural checkpoint or a feature-based linear model.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Neural(ModelParameters<f64>),
    Linear { model: LinearBaseline, version: String },
}

impl LoadedModel {
    /// Reads a checkpoint (recognized by its magic bytes) or a linear model
    /// JSON document.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(MAGIC) {
            return Ok(LoadedModel::Neural(load_checkpoint(path)?));
        }
        let model: LinearBaseline = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Checkpoint(format!("{}: neither a checkpoint nor a linear model: {e}", path.display())))?;
        Ok(LoadedModel::Linear {
            model,
            version: sha256_hex(&bytes),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LoadedModel::Neural(m) => m.kind().name(),
            LoadedModel::Linear { .. } => "linear",
        }
    }

    pub fn version(&self) -> String {
        match self {
            LoadedModel::Neural(m) => m.version(),
            LoadedModel::Linear { version, .. } => version.clone(),
        }
    }

    pub fn vocab_size(&self) -> Option<usize> {
        match self {
            LoadedModel::Neural(m) => Some(m.config().vocab_size),
            LoadedModel::Linear { .. } => None,
        }
    }

    pub fn score_tokens(
        &self,
        headline: &[Token],
        paragraphs: &[Vec<Token>],
        splitter: &SentenceSplitter,
    ) -> Result<ScoredPrediction> {
        match self {
            LoadedModel::Neural(m) => m.score_article(headline, paragraphs, splitter),
            LoadedModel::Linear { model, version } => {
                let (score, paragraph_scores, top_paragraph_index) = model.score(headline, paragraphs)?;
                Ok(ScoredPrediction {
                    score,
                    paragraph_scores,
                    top_paragraph_index,
                    model_version: version.clone(),
                })
            }
        }
    }

    pub fn score_article(&self, article: &Article, splitter: &SentenceSplitter) -> Result<ScoredPrediction> {
        self.score_tokens(&article.headline, &article.paragraphs, splitter)
    }
}

/// The JSON document returned for a scored article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub label: String,
    pub paragraph_scores: Vec<f64>,
    pub top_paragraph_index: Option<usize>,
    pub model_version: String,
}

impl From<ScoredPrediction> for Prediction {
    fn from(p: ScoredPrediction) -> Self {
        let label = if p.score >= DISPLAY_THRESHOLD { "incongruent" } else { "congruent" };
        Prediction {
            score: p.score,
            label: label.into(),
            paragraph_scores: p.paragraph_scores,
            top_paragraph_index: p.top_paragraph_index,
            model_version: p.model_version,
        }
    }
}

/// A model with the vocabulary it was trained against.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub model: LoadedModel,
    pub vocab: Vocabulary,
    pub splitter: SentenceSplitter,
}

impl Scorer {
    pub fn new(model: LoadedModel, vocab: Vocabulary) -> Result<Self> {
        if let Some(n) = model.vocab_size() {
            if n != vocab.len() {
                return Err(Error::Config(format!(
                    "model expects a vocabulary of {n} entries, the vocabulary has {}",
                    vocab.len()
                )));
            }
        }
        let splitter = SentenceSplitter::new(&vocab);
        Ok(Scorer { model, vocab, splitter })
    }

    pub fn load(model: impl AsRef<Path>, vocab: impl AsRef<Path>) -> Result<Self> {
        Scorer::new(LoadedModel::load(model)?, Vocabulary::read_tsv(vocab)?)
    }

    /// Scores raw text; paragraphs that tokenize to nothing are dropped.
    pub fn score_paragraphs<S: AsRef<str>>(&self, headline: &str, paragraphs: &[S]) -> Result<Prediction> {
        let article = article_from_paragraphs("request", headline, paragraphs, &self.vocab)?;
        Ok(self.model.score_article(&article, &self.splitter)?.into())
    }

    /// Scores a plain-text body whose non-blank lines are paragraphs.
    pub fn score_body(&self, headline: &str, body: &str) -> Result<Prediction> {
        let article = article_from_text("request", headline, body, &self.vocab)?;
        Ok(self.model.score_article(&article, &self.splitter)?.into())
    }
}
