//! Decay lengths from exponential tails of a bound-state field.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::{Field, Grid};
use crate::geometry::{CrossProblem, Parity};

/// Rescaled transverse offset of the cut used for odd parities (a third of
/// the arm width, `2/3` of a half-width).
pub const ODD_CUT: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayWindow {
    /// Window start, in half-widths of the arm beyond the junction edge.
    pub offset: f64,
    /// End of the window as a fraction of the truncation length.
    pub end_fraction: f64,
    /// Samples below `floor * max|psi|` are discarded.
    pub floor: f64,
    /// Fit `ln|psi| = c - s/l + ln(1 - exp(-2 (L - s)/l))`, which is exact for
    /// a single channel mode vanishing at the outer cut `s = L`.
    pub truncation_correction: bool,
}

impl Default for DecayWindow {
    fn default() -> Self {
        Self {
            offset: 2.0,
            end_fraction: 0.7,
            floor: 1e-6,
            truncation_correction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum DecayError {
    #[error("no exponential tail along {axis:?} (slope {slope:.3e}, R² {r_squared:.4})")]
    UnboundState { axis: Axis, slope: f64, r_squared: f64 },
    #[error("tail along {axis:?} is dominated by the outer cut (length {length:.3} vs box {truncation})")]
    TruncationDominated { axis: Axis, length: f64, truncation: f64 },
    #[error("only {points} usable samples along {axis:?}")]
    TooFewPoints { axis: Axis, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Decay length in the cut's own (rescaled) coordinate.
    pub length: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// Set when the box is shorter than three decay lengths.
    pub short_box: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayLengths {
    /// Original coordinates.
    pub ell_x: f64,
    pub ell_y: f64,
    pub x: TailFit,
    pub y: TailFit,
    /// Rescaled transverse positions of the two cuts.
    pub cut_y: f64,
    pub cut_x: f64,
}

fn regress(s: &[f64], z: &[f64]) -> (f64, f64, f64) {
    let n = s.len() as f64;
    let ms = s.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let sxx: f64 = s.iter().map(|v| (v - ms).powi(2)).sum();
    let sxz: f64 = s.iter().zip(z).map(|(a, b)| (a - ms) * (b - mz)).sum();
    let slope = sxz / sxx;
    let icpt = mz - slope * ms;
    let tss: f64 = z.iter().map(|v| (v - mz).powi(2)).sum();
    let rss: f64 = s.iter().zip(z).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    (slope, icpt, r2)
}

/// Fits the decay length of `samples = [(s, psi)]` for `s >= start` along one
/// arm whose outer Dirichlet cut sits at `truncation`. `amplitude` is the
/// field maximum the floor is measured against.
pub fn fit_tail(
    samples: &[(f64, f64)],
    start: f64,
    truncation: f64,
    amplitude: f64,
    window: &DecayWindow,
    axis: Axis,
) -> Result<TailFit, DecayError> {
    let floor = window.floor * amplitude;
    let hi = window.end_fraction * truncation;
    let last = samples
        .iter()
        .filter(|(s, v)| *s >= start && *s <= hi && v.abs() >= floor)
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(s, v)| *s >= start && *s <= last && v.abs() > 0.0)
        .map(|&(s, v)| (s, v.abs().ln()))
        .collect();
    if pts.len() < 5 {
        return Err(DecayError::TooFewPoints { axis, points: pts.len() });
    }
    let s: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let raw: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (mut slope, _, mut r2) = regress(&s, &raw);
    if slope >= 0.0 {
        return Err(DecayError::UnboundState {
            axis,
            slope,
            r_squared: r2,
        });
    }
    if window.truncation_correction {
        let mut length = -1.0 / slope;
        for _ in 0..500 {
            let z: Vec<f64> = s
                .iter()
                .zip(&raw)
                .map(|(&si, &zi)| zi - (-(-2.0 * (truncation - si) / length).exp()).ln_1p())
                .collect();
            let (sl, _, r) = regress(&s, &z);
            slope = sl;
            r2 = r;
            if slope >= 0.0 {
                break;
            }
            let next = -1.0 / slope;
            let done = (next - length).abs() <= 1e-13 * next;
            length = next;
            if done {
                break;
            }
        }
    }
    if slope >= 0.0 || r2 < 0.99 {
        return Err(DecayError::UnboundState {
            axis,
            slope,
            r_squared: r2,
        });
    }
    let length = -1.0 / slope;
    if 2.0 * length > truncation - start {
        return Err(DecayError::TruncationDominated { axis, length, truncation });
    }
    Ok(TailFit {
        length,
        r_squared: r2,
        window: (s[0], *s.last().unwrap()),
        points: s.len(),
        short_box: truncation < 3.0 * length,
    })
}

/// `(l_x, l_y)` in original coordinates from a bound-state field. Cuts run on
/// the symmetry axis for even parity and a third of the arm width off it for
/// odd parity; `l_y` is the rescaled fit times `beta`.
pub fn decay_lengths(
    field: &Field,
    grid: &Grid,
    problem: &CrossProblem,
    window: &DecayWindow,
) -> Result<DecayLengths, DecayError> {
    let amp = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ky = match problem.class.parity_y() {
        Parity::Even => 0,
        Parity::Odd => field.y_line(ODD_CUT),
    };
    let kx = match problem.class.parity_x() {
        Parity::Even => 0,
        Parity::Odd => field.x_line(ODD_CUT),
    };
    // Junction edges sit at x' = 1 and y' = 1; the horizontal arm's half-width
    // is beta in x' units, the vertical arm's is 1/beta in y' units.
    let beta = problem.beta;
    let x = fit_tail(&field.cut_along_x(ky), 1.0 + window.offset * beta, grid.lx, amp, window, Axis::X)?;
    let y = fit_tail(&field.cut_along_y(kx), 1.0 + window.offset / beta, grid.ly, amp, window, Axis::Y)?;
    Ok(DecayLengths {
        ell_x: x.length,
        ell_y: problem.beta * y.length,
        x,
        y,
        cut_y: grid.y(ky),
        cut_x: grid.x(kx),
    })
}

/// Asymptotic decay length `1/sqrt(threshold - lambda)` of a channel.
pub fn channel_decay_length(threshold: f64, lambda: f64) -> Option<f64> {
    (threshold > lambda).then(|| 1.0 / (threshold - lambda).sqrt())
}
