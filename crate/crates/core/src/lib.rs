//! Bound states of the Dirichlet Laplacian on a crossing of two straight
//! waveguides of unequal width.
//!
//! Lengths are in units of the narrow arm's half-width and `beta >= 1` is the
//! width ratio. The problem is solved per symmetry class on the quarter
//! domain, rescaled so both arms sit on the same square grid.

pub mod analysis;
pub mod discretization;
pub mod effective1d;
pub mod eigensolver;
pub mod geometry;
pub mod sparse;

pub use geometry::{ChannelThresholds, CrossProblem, Parity, SymmetryClass};
