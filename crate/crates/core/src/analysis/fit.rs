//! Nonlinear least squares for the handful of model families used on
//! energy curves, decay lengths and grid sequences.
//!
//! Every model is linear in all parameters but one exponent (the pole model
//! is linear in `1/y`), so starts come from variable projection over a
//! deterministic exponent grid; the best few are polished by
//! Levenberg-Marquardt on all parameters at once.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitModel {
    /// `a1 + a2 x^-g + a3 x^-2g`, params `[a1, a2, a3, g]`.
    PowerSeries3,
    /// `a1 + a2 N^-g + a3 N^-2g + a4 N^-3g`, params `[a1, a2, a3, a4, g]`.
    GridSeries4,
    /// `a + b x^g`, params `[a, b, g]`.
    PowerOffset,
    /// `c / (1 - a x^g)`, params `[c, a, g]`.
    SingularPole,
}

impl FitModel {
    pub fn n_params(self) -> usize {
        match self {
            FitModel::PowerSeries3 => 4,
            FitModel::GridSeries4 => 5,
            FitModel::PowerOffset | FitModel::SingularPole => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FitModel::PowerSeries3 => "power-series-3",
            FitModel::GridSeries4 => "grid-series-4",
            FitModel::PowerOffset => "power-offset",
            FitModel::SingularPole => "singular-pole",
        }
    }

    pub fn eval(self, p: &[f64], x: f64) -> f64 {
        let mut g = [0.0; 5];
        self.eval_grad(p, x, &mut g[..self.n_params()])
    }

    fn eval_grad(self, p: &[f64], x: f64, grad: &mut [f64]) -> f64 {
        let lx = x.ln();
        match self {
            FitModel::PowerSeries3 | FitModel::GridSeries4 => {
                let m = self.n_params() - 1;
                let g = p[m];
                let t = x.powf(-g);
                let mut y = 0.0;
                let mut dt = 0.0;
                let mut tk = 1.0;
                for k in 0..m {
                    y += p[k] * tk;
                    grad[k] = tk;
                    if k + 1 < m {
                        dt += (k + 1) as f64 * p[k + 1] * tk;
                    }
                    tk *= t;
                }
                grad[m] = dt * (-lx * t);
                y
            }
            FitModel::PowerOffset => {
                let xg = x.powf(p[2]);
                grad[0] = 1.0;
                grad[1] = xg;
                grad[2] = p[1] * xg * lx;
                p[0] + p[1] * xg
            }
            FitModel::SingularPole => {
                let xg = x.powf(p[2]);
                let d = 1.0 - p[1] * xg;
                grad[0] = 1.0 / d;
                grad[1] = p[0] * xg / (d * d);
                grad[2] = p[0] * p[1] * xg * lx / (d * d);
                p[0] / d
            }
        }
    }

    /// Root of `1 - a x^g` for the pole model.
    pub fn singularity(self, p: &[f64]) -> Option<f64> {
        match self {
            FitModel::SingularPole if p[1] > 0.0 && p[2] != 0.0 => Some(p[1].powf(-1.0 / p[2])),
            _ => None,
        }
    }

    /// Interior stationary point of the three-term power form.
    pub fn extremum(self, p: &[f64]) -> Option<f64> {
        match self {
            FitModel::PowerSeries3 => {
                let r = -p[1] / (2.0 * p[2]);
                (r > 0.0 && p[3] != 0.0).then(|| r.powf(-1.0 / p[3]))
            }
            _ => None,
        }
    }

    fn exponent_grid(self) -> Vec<f64> {
        let positive: Vec<f64> = (0..36).map(|k| 0.02 * 1.25f64.powi(k)).filter(|&g| g <= 16.0).collect();
        match self {
            FitModel::GridSeries4 => positive.into_iter().filter(|&g| (0.1..=8.0).contains(&g)).collect(),
            _ => positive.iter().flat_map(|&g| [g, -g]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub rss: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Pole location for [`FitModel::SingularPole`].
    pub singularity: Option<f64>,
    pub singularity_std: Option<f64>,
    /// Interior extremum for [`FitModel::PowerSeries3`].
    pub extremum: Option<f64>,
    /// Condition number of the column-scaled Jacobian.
    pub condition: f64,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        self.model.eval(&self.params, x)
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum FitError {
    #[error("{model} needs at least {needed} points, got {got}")]
    TooFewPoints { model: String, needed: usize, got: usize },
    #[error("abscissae must be positive and finite")]
    InvalidData,
    #[error("ill-conditioned fit (condition number {condition:.3e}); add data points")]
    IllConditionedFit { condition: f64 },
    #[error("no start converged to a finite fit")]
    NoFit,
}

pub const MIN_STARTS: usize = 8;

/// Least-squares fit of `model` to `(xs, ys)`, requiring at least twice as
/// many points as parameters. Ill-conditioning is reported in
/// [`FitResult::condition`], not as an error.
pub fn fit(model: FitModel, xs: &[f64], ys: &[f64]) -> Result<FitResult, FitError> {
    let np = model.n_params();
    if xs.len() != ys.len() {
        return Err(FitError::InvalidData);
    }
    if xs.len() < 2 * np {
        return Err(FitError::TooFewPoints {
            model: model.name().to_string(),
            needed: 2 * np,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x <= 0.0) {
        return Err(FitError::InvalidData);
    }

    // Power forms are fitted in x / x_ref so the basis columns stay O(1).
    let x_ref = match model {
        FitModel::GridSeries4 => xs.iter().copied().fold(0.0, f64::max),
        _ => 1.0,
    };
    let us: Vec<f64> = xs.iter().map(|x| x / x_ref).collect();

    let mut gs = model.exponent_grid();
    gs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let projected: Vec<Option<(f64, Vec<f64>)>> = gs
        .iter()
        .map(|&g| projected_start(model, &us, ys, g).filter(|(r, _)| r.is_finite()))
        .collect();
    let rss_at = |i: usize| projected[i].as_ref().map_or(f64::INFINITY, |p| p.0);
    // Local minima of the projected residual, refined by golden section in ln|g|.
    let mut starts: Vec<(f64, Vec<f64>)> = (0..gs.len())
        .filter(|&i| {
            let r = rss_at(i);
            r.is_finite() && (i == 0 || r <= rss_at(i - 1)) && (i + 1 == gs.len() || r <= rss_at(i + 1))
        })
        .filter_map(|i| refine_exponent(model, &us, ys, gs[i]))
        .collect();
    let mut rest: Vec<(f64, Vec<f64>)> = projected.into_iter().flatten().collect();
    rest.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    starts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    starts.truncate(MIN_STARTS);
    starts.extend(rest.into_iter().take(MIN_STARTS));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, p0) in starts {
        let (p, r) = levenberg_marquardt(model, &us, ys, p0);
        if r.is_finite() && best.as_ref().is_none_or(|b| r < b.0) {
            best = Some((r, p));
        }
    }
    let (_, scaled) = best.ok_or(FitError::NoFit)?;

    let (jac, resid) = jacobian(model, &scaled, &us, ys);
    let rss = resid.norm_squared();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let tss: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    // Parameters and covariance back in the caller's x.
    let (params, transform) = unscale(model, &scaled, x_ref);
    let dof = (xs.len() - np).max(1) as f64;
    let (cov_scaled, condition) = covariance(&jac, rss / dof);
    let cov = &transform * &cov_scaled * transform.transpose();
    let covariance: Vec<Vec<f64>> = (0..np).map(|i| (0..np).map(|j| cov[(i, j)]).collect()).collect();
    let std_errors: Vec<f64> = (0..np).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();

    let singularity = model.singularity(&params);
    let singularity_std = singularity.map(|b| {
        // d b / d a = -b / (a g), d b / d g = b ln(a) / g².
        let (a, g) = (params[1], params[2]);
        let da = -b / (a * g);
        let dg = b * a.ln() / (g * g);
        (da * da * cov[(1, 1)] + dg * dg * cov[(2, 2)] + 2.0 * da * dg * cov[(1, 2)]).max(0.0).sqrt()
    });
    Ok(FitResult {
        model,
        extremum: model.extremum(&params),
        params,
        std_errors,
        covariance,
        rss,
        r_squared,
        n_points: xs.len(),
        singularity,
        singularity_std,
        condition,
    })
}

/// Linear least squares `basis * coef ≈ rhs` via SVD.
fn linear_solve(basis: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = basis.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(rhs, 1e-13 * smax).ok()
}

fn projected_start(model: FitModel, xs: &[f64], ys: &[f64], g: f64) -> Option<(f64, Vec<f64>)> {
    let n = xs.len();
    let p = match model {
        FitModel::PowerSeries3 | FitModel::GridSeries4 => {
            let m = model.n_params() - 1;
            let basis = DMatrix::from_fn(n, m, |i, k| xs[i].powf(-g * k as f64));
            let c = linear_solve(&basis, &DVector::from_column_slice(ys))?;
            let mut p: Vec<f64> = c.iter().copied().collect();
            p.push(g);
            p
        }
        FitModel::PowerOffset => {
            let basis = DMatrix::from_fn(n, 2, |i, k| if k == 0 { 1.0 } else { xs[i].powf(g) });
            let c = linear_solve(&basis, &DVector::from_column_slice(ys))?;
            vec![c[0], c[1], g]
        }
        FitModel::SingularPole => {
            if ys.contains(&0.0) {
                return None;
            }
            let basis = DMatrix::from_fn(n, 2, |i, k| if k == 0 { 1.0 } else { xs[i].powf(g) });
            let inv = DVector::from_iterator(n, ys.iter().map(|y| 1.0 / y));
            let c = linear_solve(&basis, &inv)?;
            if c[0] == 0.0 {
                return None;
            }
            vec![1.0 / c[0], -c[1] / c[0], g]
        }
    };
    let rss: f64 = xs.iter().zip(ys).map(|(&x, &y)| (model.eval(&p, x) - y).powi(2)).sum();
    Some((rss, p))
}

fn refine_exponent(model: FitModel, xs: &[f64], ys: &[f64], g: f64) -> Option<(f64, Vec<f64>)> {
    let sign = g.signum();
    let eval = |t: f64| projected_start(model, xs, ys, sign * t.exp()).map_or(f64::INFINITY, |p| p.0);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (g.abs().ln() - 1.25f64.ln(), g.abs().ln() + 1.25f64.ln());
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d);
        }
    }
    projected_start(model, xs, ys, sign * (0.5 * (a + b)).exp())
}

fn jacobian(model: FitModel, p: &[f64], xs: &[f64], ys: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let np = model.n_params();
    let mut jac = DMatrix::zeros(xs.len(), np);
    let mut r = DVector::zeros(xs.len());
    let mut g = vec![0.0; np];
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        r[i] = model.eval_grad(p, x, &mut g) - y;
        for k in 0..np {
            jac[(i, k)] = g[k];
        }
    }
    (jac, r)
}

fn levenberg_marquardt(model: FitModel, xs: &[f64], ys: &[f64], mut p: Vec<f64>) -> (Vec<f64>, f64) {
    let np = p.len();
    let (mut jac, mut r) = jacobian(model, &p, xs, ys);
    let mut rss = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..2000 {
        if !rss.is_finite() || rss == 0.0 {
            break;
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut accepted = false;
        while mu < 1e20 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                mu *= 4.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (tj, tr) = jacobian(model, &trial, xs, ys);
            let trss = tr.norm_squared();
            if trss.is_finite() && trss < rss {
                let small = step.iter().zip(&trial).all(|(s, q)| s.abs() <= 1e-14 * q.abs().max(1e-300));
                let gain = (rss - trss) / rss;
                p = trial;
                jac = tj;
                r = tr;
                rss = trss;
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                if small || gain < 1e-16 {
                    return (p, rss);
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (p, rss)
}

fn covariance(jac: &DMatrix<f64>, s2: f64) -> (DMatrix<f64>, f64) {
    let np = jac.ncols();
    let scales: Vec<f64> = (0..np).map(|k| jac.column(k).norm().max(1e-300)).collect();
    let mut scaled = jac.clone();
    for k in 0..np {
        scaled.column_mut(k).scale_mut(1.0 / scales[k]);
    }
    let svd = scaled.svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let vt = svd.v_t.expect("requested V");
    let mut cov = DMatrix::zeros(np, np);
    for i in 0..np {
        for j in 0..np {
            let mut acc = 0.0;
            for (k, &s) in sv.iter().enumerate() {
                if s > 1e-15 * smax {
                    acc += vt[(k, i)] * vt[(k, j)] / (s * s);
                }
            }
            cov[(i, j)] = s2 * acc / (scales[i] * scales[j]);
        }
    }
    (cov, condition)
}

/// Maps parameters fitted in `u = x / x_ref` back to `x`, with the Jacobian
/// of that map for propagating covariance.
fn unscale(model: FitModel, p: &[f64], x_ref: f64) -> (Vec<f64>, DMatrix<f64>) {
    let np = p.len();
    let mut t = DMatrix::identity(np, np);
    if model != FitModel::GridSeries4 || x_ref == 1.0 {
        return (p.to_vec(), t);
    }
    let g = p[np - 1];
    let lr = x_ref.ln();
    let mut out = p.to_vec();
    for k in 1..np - 1 {
        let f = x_ref.powf(k as f64 * g);
        out[k] = p[k] * f;
        t[(k, k)] = f;
        t[(k, np - 1)] = p[k] * f * k as f64 * lr;
    }
    (out, t)
}

/// N → ∞ limit of a sequence of grid results via [`FitModel::GridSeries4`].
/// Requires at least six grids and a monotonic sequence.
pub fn extrapolate_grid_sequence(values: &[f64], ns: &[usize]) -> Result<FitResult, FitError> {
    if values.len() != ns.len() {
        return Err(FitError::InvalidData);
    }
    if ns.len() < 6 {
        return Err(FitError::TooFewPoints {
            model: FitModel::GridSeries4.name().to_string(),
            needed: 6,
            got: ns.len(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = ns.iter().map(|&n| n as f64).zip(values.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let diffs: Vec<f64> = pairs.windows(2).map(|w| w[1].1 - w[0].1).collect();
    if !(diffs.iter().all(|&d| d <= 0.0) || diffs.iter().all(|&d| d >= 0.0)) {
        return Err(FitError::InvalidData);
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let r = fit(FitModel::GridSeries4, &xs, &ys)?;
    if !r.condition.is_finite() || r.std_errors.iter().any(|s| !s.is_finite()) {
        return Err(FitError::IllConditionedFit { condition: r.condition });
    }
    Ok(r)
}
