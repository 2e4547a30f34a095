//! Minimal reverse-mode automatic differentiation over `f64` matrices.
//!
//! A [`Tape`] records one forward pass (typically one utterance) against a
//! shared, read-only [`ParamStore`]; [`Tape::backward`] returns per-parameter
//! [`Gradients`]. Tapes are cheap to create, so per-utterance gradients can be
//! computed on independent threads and summed afterwards.

mod optim;
mod params;
mod tape;

pub use optim::{Optimizer, OptimizerKind, OptimizerState};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};
