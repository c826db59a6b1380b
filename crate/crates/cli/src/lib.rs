//! Scenario runner for eta-forge: JSON configs in, CSV and markdown reports out.

pub mod config;
pub mod report;
pub mod scenarios;
pub mod suite;

pub use config::{ModelFile, RunConfig, Scenario};
pub use report::{emit_report, Check, Section};
pub use scenarios::{run_config, verify_all, ExitReport};

use eta_forge::ForgeError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("scenario failed: {0}")]
    ScenarioFailed(String),
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no results to report")]
    EmptyReport,
}

impl CliError {
    /// 2 failed assertion, 3 configuration or I/O, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ScenarioFailed(_) => 2,
            CliError::Config(_) | CliError::Io(_) | CliError::EmptyReport => 3,
            CliError::NonConvergence(_) => 4,
        }
    }
}

impl From<ForgeError> for CliError {
    fn from(e: ForgeError) -> Self {
        match e {
            ForgeError::QuadratureNotConverged { .. }
            | ForgeError::TermCapExceeded { .. }
            | ForgeError::NoAdmissibleEps { .. } => CliError::NonConvergence(e.to_string()),
            e => CliError::ScenarioFailed(e.to_string()),
        }
    }
}
