//! A deliberately small tensor engine: row-major 2-D values on a tape with
//! reverse-mode differentiation, plus the Transformer pieces built on it.
//!
//! Everything is single-threaded and deterministic: identical seeds and
//! inputs give bit-identical results.

mod error;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod layers;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tensor;

pub use error::NnError;
pub use graph::{Graph, Var};
pub use optim::{adam_step, lr_at, AdamState, LrSchedule};
pub use params::{ParamId, ParamStore};
pub use scalar::{DType, Float};
pub use tensor::Tensor;
