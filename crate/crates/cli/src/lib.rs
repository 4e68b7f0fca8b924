//! Driver behind the `firmvi` binary: config ingestion, run orchestration and
//! artifact emission.

pub mod artifacts;
pub mod config;
pub mod run;

use std::io;

pub use config::{Emit, RunConfig};
pub use run::{analyze, execute, refine_study, Analysis, RefineRow, RunReport, Status};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Solver(#[from] firmvi::Error),
}

impl CliError {
    pub fn status(&self) -> Status {
        use firmvi::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => Status::ConfigError,
            CliError::Solver(
                E::InvalidModel(_)
                | E::MissingGainEntry { .. }
                | E::NonPositiveDomain(_)
                | E::TooFewPoints(_)
                | E::LevelOutOfRange { .. }
                | E::InvalidSimConfig(_)
                | E::StartOutsideGrid { .. },
            ) => Status::ConfigError,
            CliError::Solver(E::NotConverged) => Status::NotConverged,
            CliError::Solver(_) => Status::InvariantFailure,
        }
    }
}
