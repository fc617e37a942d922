//! Detection of incongruent news headlines.
//!
//! The crate covers the whole offline pipeline: tokenized article corpora and
//! vocabularies ([`textcorpus`]), automatic generation of balanced
//! incongruent/congruent datasets ([`datagen`]), a small reverse-mode
//! differentiation engine ([`autodiff`]), the recurrent, convolutional and
//! hierarchical dual encoders with independent-paragraph scoring
//! ([`encoders`]), a feature-based logistic baseline ([`features`]) and the
//! training/evaluation loop ([`pipeline`]).

pub mod autodiff;
pub mod datagen;
pub mod encoders;
mod error;
pub mod features;
pub mod pipeline;
pub mod textcorpus;

pub use error::{Error, Result};

pub use autodiff::{Real, Tensor};
pub use encoders::{ModelConfig, ModelKind, ModelParameters, ScoredPrediction};
pub use textcorpus::{Article, Token, Vocabulary};

/// Hex-encoded SHA-256 digest of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes.as_ref()))
}
