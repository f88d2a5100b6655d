//! Cross, T and L shaped waveguide domains.
//!
//! Lengths are measured in units of the narrow (vertical) arm half-width, so
//! in original coordinates the vertical strip is `|x| < 1` and the horizontal
//! strip is `|y| < beta`. After the rescaling `y' = y / beta` both arms have
//! half-width one and `beta` only enters through the operator
//! `-(d²/dx'² + beta⁻² d²/dy'²)`. Energies use the `-Δ` normalization.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeometryError {
    #[error("width ratio beta = {0} must be finite and >= 1")]
    InvalidBeta(f64),
    #[error("truncation half-lengths must be >= 1 (got lx = {lx}, ly = {ly})")]
    InvalidTruncation { lx: f64, ly: f64 },
    #[error("unknown symmetry class '{0}' (expected ee, oe, eo or oo)")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// Parity pair labelling an invariant subspace of the cross. The first letter
/// is the parity under `x -> -x`, the second under `y -> -y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymmetryClass {
    EvenEven,
    OddEven,
    EvenOdd,
    OddOdd,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 4] = [
        SymmetryClass::EvenEven,
        SymmetryClass::OddEven,
        SymmetryClass::EvenOdd,
        SymmetryClass::OddOdd,
    ];

    pub fn from_parities(parity_x: Parity, parity_y: Parity) -> Self {
        match (parity_x, parity_y) {
            (Parity::Even, Parity::Even) => SymmetryClass::EvenEven,
            (Parity::Odd, Parity::Even) => SymmetryClass::OddEven,
            (Parity::Even, Parity::Odd) => SymmetryClass::EvenOdd,
            (Parity::Odd, Parity::Odd) => SymmetryClass::OddOdd,
        }
    }

    pub fn parity_x(self) -> Parity {
        match self {
            SymmetryClass::EvenEven | SymmetryClass::EvenOdd => Parity::Even,
            SymmetryClass::OddEven | SymmetryClass::OddOdd => Parity::Odd,
        }
    }

    pub fn parity_y(self) -> Parity {
        match self {
            SymmetryClass::EvenEven | SymmetryClass::OddEven => Parity::Even,
            SymmetryClass::EvenOdd | SymmetryClass::OddOdd => Parity::Odd,
        }
    }

    /// Class seen after exchanging the roles of the x and y axes.
    pub fn swapped(self) -> Self {
        Self::from_parities(self.parity_y(), self.parity_x())
    }

    pub fn label(self) -> &'static str {
        match self {
            SymmetryClass::EvenEven => "ee",
            SymmetryClass::OddEven => "oe",
            SymmetryClass::EvenOdd => "eo",
            SymmetryClass::OddOdd => "oo",
        }
    }

    /// Shape of the desymmetrized quarter domain.
    pub fn region_name(self) -> &'static str {
        match self {
            SymmetryClass::EvenEven => "cross",
            SymmetryClass::OddEven => "rotated T",
            SymmetryClass::EvenOdd => "T",
            SymmetryClass::OddOdd => "L",
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SymmetryClass {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ee" | "even-even" | "eveneven" => Ok(SymmetryClass::EvenEven),
            "oe" | "odd-even" | "oddeven" => Ok(SymmetryClass::OddEven),
            "eo" | "even-odd" | "evenodd" => Ok(SymmetryClass::EvenOdd),
            "oo" | "odd-odd" | "oddodd" => Ok(SymmetryClass::OddOdd),
            other => Err(GeometryError::UnknownClass(other.to_string())),
        }
    }
}

/// Record of an axis swap applied to bring `beta` into `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub requested_beta: f64,
    pub requested_class: SymmetryClass,
}

/// The physical problem: width ratio, symmetry class and truncation box
/// (half-lengths in rescaled units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossProblem {
    pub beta: f64,
    pub class: SymmetryClass,
    pub lx: f64,
    pub ly: f64,
}

impl CrossProblem {
    pub fn new(beta: f64, class: SymmetryClass, lx: f64, ly: f64) -> Result<Self, GeometryError> {
        validate_beta(beta)?;
        if !(lx.is_finite() && ly.is_finite() && lx >= 1.0 && ly >= 1.0) {
            return Err(GeometryError::InvalidTruncation { lx, ly });
        }
        Ok(Self { beta, class, lx, ly })
    }

    /// Like [`CrossProblem::new`] but maps `beta < 1` onto the rotated problem
    /// (`beta -> 1/beta`, `eo <-> oe`, box lengths exchanged).
    pub fn normalized(
        beta: f64,
        class: SymmetryClass,
        lx: f64,
        ly: f64,
    ) -> Result<(Self, Option<Normalization>), GeometryError> {
        if beta.is_finite() && beta > 0.0 && beta < 1.0 {
            let rotated = Self::new(1.0 / beta, class.swapped(), ly, lx)?;
            log::warn!(
                "beta = {beta} < 1: solving the rotated problem beta = {}, class {}",
                rotated.beta,
                rotated.class
            );
            let note = Normalization {
                requested_beta: beta,
                requested_class: class,
            };
            return Ok((rotated, Some(note)));
        }
        Ok((Self::new(beta, class, lx, ly)?, None))
    }

    pub fn threshold_info(&self) -> ThresholdInfo {
        ThresholdInfo {
            e_th: e_th(self.beta),
            class_threshold_ratio: class_ratio(self.class, self.beta),
        }
    }
}

fn validate_beta(beta: f64) -> Result<(), GeometryError> {
    if beta.is_finite() && beta >= 1.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidBeta(beta))
    }
}

/// First continuum threshold together with the class multiple below which a
/// class eigenvalue is bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInfo {
    pub e_th: f64,
    pub class_threshold_ratio: f64,
}

impl ThresholdInfo {
    pub fn class_threshold(&self) -> f64 {
        self.e_th * self.class_threshold_ratio
    }
}

fn e_th(beta: f64) -> f64 {
    let q = PI / (2.0 * beta);
    q * q
}

/// Lowest transverse Dirichlet mode of the wide strip, `(pi / (2 beta))²`.
pub fn continuum_threshold(problem: &CrossProblem) -> f64 {
    e_th(problem.beta)
}

pub fn continuum_threshold_for(beta: f64) -> Result<f64, GeometryError> {
    validate_beta(beta)?;
    Ok(e_th(beta))
}

/// Transverse mode index compatible with a parity: the lowest even mode of a
/// Dirichlet strip is `n = 1`, the lowest odd one `n = 2`.
pub(crate) fn transverse_mode(parity: Parity) -> u32 {
    match parity {
        Parity::Even => 1,
        Parity::Odd => 2,
    }
}

/// Continuum edges of the two open channels seen by a class, in `-Δ` units:
/// the horizontal strip (tails along x, transverse parity `parity_y`) and the
/// vertical strip (tails along y, transverse parity `parity_x`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelThresholds {
    pub horizontal: f64,
    pub vertical: f64,
}

impl ChannelThresholds {
    pub fn lowest(&self) -> f64 {
        self.horizontal.min(self.vertical)
    }
}

pub fn channel_thresholds(class: SymmetryClass, beta: f64) -> Result<ChannelThresholds, GeometryError> {
    validate_beta(beta)?;
    let nh = f64::from(transverse_mode(class.parity_y()));
    let nv = f64::from(transverse_mode(class.parity_x()));
    Ok(ChannelThresholds {
        horizontal: (nh * PI / (2.0 * beta)).powi(2),
        vertical: (nv * PI / 2.0).powi(2),
    })
}

fn class_ratio(class: SymmetryClass, beta: f64) -> f64 {
    match class {
        SymmetryClass::EvenEven | SymmetryClass::OddEven => 1.0,
        SymmetryClass::OddOdd => 4.0,
        SymmetryClass::EvenOdd => (beta * beta).min(4.0),
    }
}

/// Multiple of `E_TH` at which the continuum of `class` starts.
pub fn class_threshold_ratio(class: SymmetryClass, beta: f64) -> Result<f64, GeometryError> {
    validate_beta(beta)?;
    Ok(class_ratio(class, beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisCondition {
    /// Zero normal derivative (even parity).
    Neumann,
    /// Zero value (odd parity).
    Dirichlet,
}

impl From<Parity> for AxisCondition {
    fn from(p: Parity) -> Self {
        match p {
            Parity::Even => AxisCondition::Neumann,
            Parity::Odd => AxisCondition::Dirichlet,
        }
    }
}

/// Conditions imposed on the quarter domain `x >= 0, y >= 0`. The outer cuts
/// at `x = Lx` and `y = Ly` and the physical walls are always Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryPlan {
    /// Condition on the line `x = 0`.
    pub x_axis: AxisCondition,
    /// Condition on the line `y = 0`.
    pub y_axis: AxisCondition,
}

impl BoundaryPlan {
    pub const OUTER: AxisCondition = AxisCondition::Dirichlet;
}

pub fn desymmetrize(class: SymmetryClass) -> BoundaryPlan {
    BoundaryPlan {
        x_axis: class.parity_x().into(),
        y_axis: class.parity_y().into(),
    }
}

/// Membership in the rescaled cross: union of the strips `|x'| < 1` and `|y'| < 1`.
pub fn in_cross(x: f64, y: f64) -> bool {
    x.abs() < 1.0 || y.abs() < 1.0
}
