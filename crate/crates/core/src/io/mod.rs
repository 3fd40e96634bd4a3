//! Configuration, presets and file output.

pub mod commands;
pub mod config;
pub mod emit;
pub mod presets;

use thiserror::Error;

pub use commands::{CommandError, Outcome};
pub use config::{load_config, ResolvedRun, RunConfig};
pub use emit::{emit_distribution, emit_sweep_map, verify_manifest, RunManifest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OutputError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("digest mismatch for {file}: manifest {expected}, on disk {found}")]
    DigestMismatch { file: String, expected: String, found: String },
}
