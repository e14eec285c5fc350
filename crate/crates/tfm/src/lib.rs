//! Command-line driver for the `tfm-core` toolkit: experiment configuration,
//! CSV / VTK / Matrix Market files, reports and the subcommand pipelines.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod commands;
pub mod config;
pub mod io;
pub mod report;

use std::path::Path;

pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Input(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Core(#[from] tfm_core::Error),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// 2 for usage and configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
