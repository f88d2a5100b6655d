//! Critical width ratios where a class's bound state reaches its channel edge.

use serde::{Deserialize, Serialize};

use super::fit::{fit, FitModel, FitResult};
use super::sweep::SweepRecord;
use super::AnalysisError;
use crate::geometry::SymmetryClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalMethod {
    /// Pole of `c / (1 - a beta^g)` fitted to the diverging decay length.
    PoleFit,
    /// Linear extrapolation of `kappa = sqrt(threshold - lambda)` to zero.
    ThresholdCrossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalBeta {
    pub class: SymmetryClass,
    pub method: CriticalMethod,
    pub beta_star: f64,
    pub uncertainty: f64,
    /// Pole-fit details, or the `kappa` line as a power-offset with `g = 1`.
    pub fit: Option<FitResult>,
    pub points_used: usize,
}

/// Records nearest the transition used by the threshold-crossing line.
pub const CROSSING_POINTS: usize = 4;

/// Which arm's decay diverges at the transition: the horizontal arm for
/// odd-odd, the vertical arm for even-odd.
fn diverging_axis(class: SymmetryClass) -> Result<bool, AnalysisError> {
    match class {
        SymmetryClass::OddOdd => Ok(true),
        SymmetryClass::EvenOdd => Ok(false),
        other => Err(AnalysisError::NoTransition(format!("class {other} has no tabulated transition"))),
    }
}

pub fn locate_critical_beta(
    class: SymmetryClass,
    records: &[SweepRecord],
    method: CriticalMethod,
) -> Result<CriticalBeta, AnalysisError> {
    let horizontal = diverging_axis(class)?;
    let bound: Vec<&SweepRecord> = records.iter().filter(|r| r.class == class && r.bound).collect();
    match method {
        CriticalMethod::PoleFit => {
            let (xs, ys): (Vec<f64>, Vec<f64>) = bound
                .iter()
                .filter_map(|r| {
                    let l = if horizontal { r.ell_x } else { r.ell_y };
                    l.map(|l| (r.beta, l))
                })
                .unzip();
            if xs.len() < 2 * FitModel::SingularPole.n_params() {
                return Err(AnalysisError::NoTransition(format!("{} decay lengths available", xs.len())));
            }
            let f = fit(FitModel::SingularPole, &xs, &ys)?;
            let (Some(b), Some(s)) = (f.singularity, f.singularity_std) else {
                return Err(AnalysisError::NoTransition("fitted decay length has no pole".into()));
            };
            if !b.is_finite() || !s.is_finite() {
                return Err(AnalysisError::NoTransition("pole fit is degenerate".into()));
            }
            // Model-form error: refit the half of the records nearest the
            // transition (largest decay lengths) and take the pole shift.
            let mut order: Vec<usize> = (0..xs.len()).collect();
            order.sort_by(|&i, &j| ys[j].partial_cmp(&ys[i]).unwrap());
            let half = xs.len().div_ceil(2).max(2 * FitModel::SingularPole.n_params());
            let sys = if half < xs.len() {
                let (hx, hy): (Vec<f64>, Vec<f64>) = order[..half].iter().map(|&i| (xs[i], ys[i])).unzip();
                fit(FitModel::SingularPole, &hx, &hy)
                    .ok()
                    .and_then(|h| h.singularity)
                    .filter(|v| v.is_finite())
                    .map_or(0.0, |v| (v - b).abs())
            } else {
                0.0
            };
            Ok(CriticalBeta {
                class,
                method,
                beta_star: b,
                uncertainty: (s * s + sys * sys).sqrt(),
                points_used: xs.len(),
                fit: Some(f),
            })
        }
        CriticalMethod::ThresholdCrossing => {
            let mut pts: Vec<(f64, f64)> = bound
                .iter()
                .map(|r| {
                    let edge = if horizontal { r.channel_horizontal } else { r.channel_vertical };
                    (r.beta, (edge - r.eigenvalue).max(0.0).sqrt())
                })
                .collect();
            if pts.len() < 3 {
                return Err(AnalysisError::NoTransition(format!("{} bound records", pts.len())));
            }
            pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            let (b4, se4) = crossing(&pts[..CROSSING_POINTS.min(pts.len())])?;
            // Curvature of kappa(beta): root shifts from neighbouring point
            // counts and from a quadratic through twice as many records.
            let mut sys = 0.0f64;
            for m in [3, CROSSING_POINTS + 1] {
                if m <= pts.len() && m != CROSSING_POINTS.min(pts.len()) {
                    if let Ok((b, _)) = crossing(&pts[..m]) {
                        sys = sys.max((b - b4).abs());
                    }
                }
            }
            if let Some(bq) = quadratic_crossing(&pts[..pts.len().min(2 * CROSSING_POINTS)], b4) {
                sys = sys.max((bq - b4).abs());
            }
            let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(1e-3);
            if b4 < lo - 3.0 * span || b4 > hi + 3.0 * span {
                return Err(AnalysisError::NoTransition(format!(
                    "extrapolated crossing {b4} is far outside the records [{lo}, {hi}]"
                )));
            }
            Ok(CriticalBeta {
                class,
                method,
                beta_star: b4,
                uncertainty: (se4 * se4 + sys * sys).sqrt(),
                fit: None,
                points_used: CROSSING_POINTS.min(pts.len()),
            })
        }
    }
}

/// Root and standard error of the least-squares line through `(beta, kappa)`.
fn crossing(pts: &[(f64, f64)]) -> Result<(f64, f64), AnalysisError> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::NoTransition("records share one beta".into()));
    }
    let b1 = sxy / sxx;
    if b1 == 0.0 || !b1.is_finite() {
        return Err(AnalysisError::NoTransition("kappa does not vary with beta".into()));
    }
    let b0 = my - b1 * mx;
    let root = -b0 / b1;
    let dof = (pts.len() as f64 - 2.0).max(1.0);
    let s2 = pts.iter().map(|p| (p.1 - b0 - b1 * p.0).powi(2)).sum::<f64>() / dof;
    // Var(root) = s² / b1² (1/n + (root - mean)² / Sxx).
    let var = s2 / (b1 * b1) * (1.0 / n + (root - mx).powi(2) / sxx);
    Ok((root, var.sqrt()))
}

/// Root nearest `guess` of the least-squares quadratic through `pts`.
fn quadratic_crossing(pts: &[(f64, f64)], guess: f64) -> Option<f64> {
    use nalgebra::{DMatrix, DVector};
    if pts.len() < 5 {
        return None;
    }
    let a = DMatrix::from_fn(pts.len(), 3, |i, k| (pts[i].0 - guess).powi(k as i32));
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let c = a.svd(true, true).solve(&y, 1e-14).ok()?;
    // c0 + c1 t + c2 t² = 0 with t = beta - guess.
    let (c0, c1, c2) = (c[0], c[1], c[2]);
    if c2 == 0.0 {
        return (c1 != 0.0).then(|| guess - c0 / c1);
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let roots = [q / c2, if q != 0.0 { c0 / q } else { f64::INFINITY }];
    roots
        .into_iter()
        .filter(|t| t.is_finite())
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .map(|t| guess + t)
}
