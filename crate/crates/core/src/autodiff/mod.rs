//! Dense tensors with tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as it is applied; values are computed
//! eagerly and [`Graph::backward`] walks the tape in reverse. Parameters are
//! borrowed into a graph, so building one per mini-batch does not copy the
//! weights. Everything is generic over [`Real`] so models train in `f32` and
//! gradient checks run in `f64`.

mod gradcheck;
mod graph;
mod optim;
mod params;
mod tensor;

pub use gradcheck::{check_gradients, check_gradients_with, GradCheckConfig, GradCheckReport};
pub use graph::{Gradients, Graph, OpKind, Var};
pub use optim::{clip_global_norm, Adam, AdamConfig};
pub use params::ParamStore;
pub use tensor::{Real, Tensor};
