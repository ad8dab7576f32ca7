//! Command-line driver for the `extrastep` solvers: problem generation,
//! single runs, sweeps with comparison tables, and estimator verification.

pub mod commands;
pub mod config;
pub mod error;
pub mod resolve;
pub mod trace;
pub mod verify;

pub use commands::{cmd_gen, cmd_report, cmd_run, cmd_sweep, ReportSummary, RunSummary, SweepSummary};
pub use config::{parse_config, render_config, Config};
pub use error::{CliError, CliResult, ConfigIssue};
pub use verify::{cmd_verify, VerifyOutcome};

/// Reads and parses a config file.
pub fn load_config(path: &std::path::Path) -> CliResult<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    parse_config(&text)
}
