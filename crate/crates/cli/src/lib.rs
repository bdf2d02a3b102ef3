//! Library side of the `chordgen` command: each subcommand is a function
//! taking an argument struct, so the pipeline can be driven from tests.

pub mod config;
mod error;
pub mod evaluate;
pub mod generate_cmd;
pub mod prepare;
pub mod report;
pub mod train_cmd;

pub use config::Config;
pub use error::CliError;
