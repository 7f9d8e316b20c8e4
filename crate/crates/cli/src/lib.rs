//! Batch driver for the `volctl` solver: config validation, mode pipelines
//! and artifact output. The `volctl` binary is a thin wrapper around
//! [`validate_config`] and [`run`].

pub mod config;
pub mod run;

pub use config::{validate_config, ConfigError, Mode, RunConfig};
pub use run::{manifest, run, RunError, RunSummary};
