//! HTTP scoring and alerting service for the KDA engine, plus the operator
//! commands behind the `kda` binary.
//!
//! [`api::router`] exposes transaction scoring, alert listing and decisions,
//! a server-sent event stream of alerts, historical batch jobs and the
//! synthetic benchmark. [`cli`] implements the `ingest`, `process-historical`,
//! `simulate`, `benchmark`, `serve` and `explain` subcommands.

pub mod api;
pub mod batch;
pub mod cli;
pub mod config;
mod error;

pub use api::{router, serve, AppState};
pub use config::ServiceConfig;
pub use error::{ApiError, CliError};

/// The benchmark descriptor shipped with the service.
pub const DEFAULT_DESCRIPTOR: &str = include_str!("../descriptors/default.json");
