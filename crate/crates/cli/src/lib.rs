//! Command-line driver: run configuration, the record cache, table and field
//! writers, and one function per subcommand.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage, 3 invalid grid,
//! 4 eigensolver non-convergence, 5 no bound state under `--require-bound`,
//! 6 field export of an unbound state, 7 cache integrity.

pub mod cache;
pub mod commands;
pub mod config;
pub mod output;

use crossguide_core::analysis::AnalysisError;
use crossguide_core::eigensolver::EigenError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("no bound state: {0}")]
    Unbound(String),
    #[error("cannot export an unbound state: {0}")]
    UnboundExport(String),
    #[error("{0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Unbound(_) => 5,
            CliError::UnboundExport(_) => 6,
            CliError::Integrity(_) => 7,
            CliError::Io(_) | CliError::Json(_) => 1,
            CliError::Analysis(e) => match e {
                AnalysisError::Geometry(_) | AnalysisError::InvalidSweep(_) => 2,
                AnalysisError::Grid(_) => 3,
                AnalysisError::Eigen(EigenError::NonConvergence { .. }) => 4,
                AnalysisError::Store(m) if m.starts_with(cache::INTEGRITY) => 7,
                _ => 1,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crossguide_core::discretization::GridError;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            CliError::Usage(String::new()).exit_code(),
            CliError::Analysis(GridError::OddOrTooSmall(3).into()).exit_code(),
            CliError::Analysis(
                EigenError::NonConvergence {
                    iterations: 1,
                    best_residual: 1.0,
                }
                .into(),
            )
            .exit_code(),
            CliError::Unbound(String::new()).exit_code(),
            CliError::UnboundExport(String::new()).exit_code(),
            CliError::Analysis(AnalysisError::Store(format!("{}: x", cache::INTEGRITY))).exit_code(),
        ];
        assert_eq!(codes, [2, 3, 4, 5, 6, 7]);
        assert_eq!(CliError::Analysis(AnalysisError::Store("disk full".into())).exit_code(), 1);
    }
}
