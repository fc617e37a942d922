//! Detection models and their building blocks.
//!
//! Every model encodes the headline and the body separately and scores the
//! pair with a bilinear form `σ(u_H^T M u_B + b)`:
//!
//! * [`ModelKind::Rde`]: GRU over the flat word sequence of each side.
//! * [`ModelKind::Cde`]: convolutions of widths 3, 4 and 5 with
//!   max-over-time pooling.
//! * [`ModelKind::Hrde`]: word-level GRU per unit, unit-level GRU over the
//!   resulting states. The headline is a one-unit document.
//! * [`ModelKind::Ahde`]: as HRDE with a bidirectional unit level and
//!   headline-conditioned attention over unit states.
//! * [`ModelKind::Hre`]: unit vectors are mean word embeddings; the headline
//!   is its mean word embedding.
//!
//! With independent paragraphs every (headline, paragraph) pair is scored on
//! its own and the article score is the maximum; hierarchical models then
//! treat sentences as their lower units.

mod checkpoint;
mod layers;
mod model;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, FORMAT_VERSION, MAGIC,
};
pub use layers::{
    attention_pool, bilinear_logit, bilinear_score, conv_encode, conv_encode_tokens, encode_rows, encode_tokens,
    gru_step, mean_embedding, unpadded, Attention, Conv, Gru, Scorer, CONV_WIDTHS,
};
pub use model::{
    argmax, check_model_gradients, Bound, ModelConfig, ModelKind, ModelParameters, PairInstance, ScoredPrediction,
};
