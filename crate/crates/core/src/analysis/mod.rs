//! Reported quantities: energy ratios, decay lengths, grid extrapolation,
//! beta sweeps, fitted curves and critical width ratios.

pub mod critical;
pub mod decay;
pub mod fit;
pub mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::GridError;
use crate::eigensolver::EigenError;
use crate::geometry::GeometryError;

pub use critical::{locate_critical_beta, CriticalBeta, CriticalMethod};
pub use decay::{decay_lengths, DecayError, DecayLengths, DecayWindow};
pub use fit::{extrapolate_grid_sequence, fit, FitError, FitModel, FitResult};
pub use sweep::{
    beta_sweep, extrapolate, fit_energy_curve, grid_sequence, solve_cell, CellKey, CellSolution, GridPolicy, GridSpec,
    NoStore, RecordStore, SolveSettings, SweepCell, SweepRecord, CODE_VERSION,
};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum AnalysisError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Decay(#[from] DecayError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("no transition: {0}")]
    NoTransition(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("record store: {0}")]
    Store(String),
}
