//! Command-line pipeline for slang interpretation: preprocessing, encoder
//! training, reranking and both evaluations, driven by one TOML config.

pub mod commands;
pub mod config;
pub mod error;
pub mod synth;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, CliResult};
