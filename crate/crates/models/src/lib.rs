//! Model variants for chord-conditioned bass and melody generation.
//!
//! A [`ModelBundle`] holds one parameter store plus the wiring for one
//! [`StrategyKind`]. [`train`] fits it with teacher forcing and
//! [`generate`] samples both lines with nucleus decoding.

mod config;
mod error;
mod generate;
mod model;
mod persist;
mod sample;
mod strategy;
mod train;

pub use config::{GenerationConfig, ModelDims, TrainConfig};
pub use error::ModelError;
pub use generate::{assemble_phrase, generate, split_interleaved, Generated};
pub use model::{build_model, ChordEncoder, ModelBundle, Target, VoiceDecoder};
pub use persist::{inspect, load_bundle, save_bundle, Architecture, DecoderInfo, LoadedBundle};
pub use sample::top_p_sample;
pub use strategy::StrategyKind;
pub use train::{batch_loss, train, write_loss_csv, LossRecord, TrainOutcome};
