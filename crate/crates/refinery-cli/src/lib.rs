//! Command-line frontend: prompt corpus generation, batch simulation,
//! trace reporting, and the subcommand implementations behind `refinery`.

pub mod commands;
pub mod corpus;
pub mod report;
pub mod sim;

use std::io;

use refinery::planner::PlanError;
use thiserror::Error;

/// Top-level failure for any subcommand, mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run aborted: {0}")]
    Aborted(String),
    #[error("trace is invalid: {0}")]
    CorruptTrace(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// 1 for an aborted refinement (best-so-far was saved), 2 for usage,
    /// configuration, and input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Aborted(_) => 1,
            _ => 2,
        }
    }
}
