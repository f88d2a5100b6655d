//! Shift-invert Lanczos with full reorthogonalization, explicit restarts and
//! locking of converged pairs.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ldl::{EnvelopeStructure, LdlFactor};
use super::{EigenError, EigenSolution, ShiftMode, SolverOptions};
use crate::sparse::{axpy, dot, norm, CsrMatrix};

struct Ritz {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

/// Rayleigh quotient and residual norm `|A y - rho y|` of a unit vector.
fn rayleigh(a: &CsrMatrix, y: &[f64]) -> (f64, f64) {
    let ay = a.mul_vec(y);
    let rho = dot(y, &ay);
    let r: f64 = ay.iter().zip(y).map(|(p, q)| (p - rho * q).powi(2)).sum::<f64>().sqrt();
    (rho, r)
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two rounds of classical Gram-Schmidt.
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize, deflate: &[Vec<f64>]) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, deflate);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

/// Builds an orthonormal Krylov basis of `(A - sigma)^-1` deflated against
/// `locked`; returns the basis and the tridiagonal coefficients.
fn krylov(
    factor: &LdlFactor<'_>,
    locked: &[Vec<f64>],
    start: Vec<f64>,
    m: usize,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut v = start;
    for j in 0..m {
        let mut w = factor.solve(&v);
        basis.push(v);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        let scale = alpha.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        if j + 1 == m || b <= 1e-13 * scale {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        v = w;
    }
    (basis, alpha, beta)
}

fn ritz_pairs(
    a: &CsrMatrix,
    basis: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    count: usize,
) -> Vec<Ritz> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&p, &q| {
        eig.eigenvalues[q]
            .abs()
            .partial_cmp(&eig.eigenvalues[p].abs())
            .unwrap()
            .then(p.cmp(&q))
    });
    let n = a.dim();
    order
        .into_iter()
        .take(count)
        .filter(|&c| eig.eigenvalues[c] != 0.0)
        .map(|c| {
            let mut y = vec![0.0; n];
            for (i, v) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(i, c)], v, &mut y);
            }
            let ny = norm(&y);
            y.iter_mut().for_each(|x| *x /= ny);
            let (rho, residual) = rayleigh(a, &y);
            Ritz {
                value: rho,
                vector: y,
                residual,
            }
        })
        .collect()
}

fn converged(r: &Ritz, tol: f64) -> bool {
    r.residual <= tol * r.value.abs()
}

/// Number of eigenvalues of `a` strictly inside `(lo, hi)` via inertia.
fn count_in(structure: &EnvelopeStructure, lo: Option<f64>, hi: f64) -> Option<usize> {
    let neg = |s: f64| {
        // Nudge off an exact pivot breakdown.
        (0..4)
            .find_map(|t| structure.factor(s - 1e-12 * f64::from(t) * s.abs().max(1.0)).ok())
            .map(|f| f.negative_pivots())
    };
    let upper = neg(hi)?;
    let lower = match lo {
        Some(l) => neg(l)?,
        None => 0,
    };
    Some(upper.saturating_sub(lower))
}

pub(super) fn solve(a: &CsrMatrix, shift: f64, k: usize, opts: &SolverOptions) -> Result<EigenSolution, EigenError> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(EigenError::InvalidRequest(format!("need 1 <= k <= dim, got k = {k}, dim = {n}")));
    }
    if !(opts.tol > 0.0 && opts.tol <= 1e-2) {
        return Err(EigenError::InvalidRequest(format!("tolerance {} outside (0, 1e-2]", opts.tol)));
    }
    if !shift.is_finite() {
        return Err(EigenError::InvalidRequest("shift must be finite".into()));
    }
    let structure = EnvelopeStructure::new(a);
    let mut sigma = shift;
    let mut factor = structure.factor(sigma).map_err(|p| EigenError::ShiftFactorizationFailure {
        shift: sigma,
        pivot_index: p.index,
    })?;
    let below_initial = factor.negative_pivots();
    if opts.mode == ShiftMode::Below && below_initial > 0 {
        return Err(EigenError::ShiftAboveSpectrum {
            shift: sigma,
            eigenvalues_below: below_initial,
        });
    }

    let tol = opts.tol;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Ritz> = Vec::new();
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut target = k;
    let mut iterations = 0usize;
    let mut passes = 0usize;
    let mut best_residual = f64::INFINITY;
    let mut start = random_unit(&mut rng, n, &[]);

    loop {
        while locked.len() < target.min(n) {
            if passes >= opts.max_passes {
                return Err(EigenError::NonConvergence {
                    iterations,
                    best_residual,
                });
            }
            passes += 1;
            let room = n - locked.len();
            let m = opts.krylov_dim.unwrap_or(40.max(4 * k + 20)).min(room).max(1);
            let (basis, alpha, beta) = krylov(&factor, &locked_vecs, start, m);
            iterations += alpha.len();
            let needed = target - locked.len();
            let ritz = ritz_pairs(a, &basis, &alpha, &beta, needed + 1);
            let mut pending: Vec<Ritz> = Vec::new();
            let mut beyond: Option<f64> = None;
            for (idx, r) in ritz.into_iter().enumerate() {
                if idx >= needed {
                    beyond = Some(r.value);
                    break;
                }
                best_residual = best_residual.min(r.residual / r.value.abs().max(f64::MIN_POSITIVE));
                if converged(&r, tol) {
                    let mut v = r.vector.clone();
                    orthogonalize(&mut v, &locked_vecs);
                    let nv = norm(&v);
                    v.iter_mut().for_each(|x| *x /= nv);
                    let (rho, res) = rayleigh(a, &v);
                    locked_vecs.push(v.clone());
                    locked.push(Ritz {
                        value: rho,
                        vector: v,
                        residual: res,
                    });
                } else {
                    pending.push(r);
                }
            }
            if locked.len() >= target {
                break;
            }

            if opts.mode == ShiftMode::Below && opts.adaptive_shift {
                if let Some(lead) = pending.first() {
                    let gap = beyond.map_or(lead.value - sigma, |b| (b - lead.value).abs());
                    let delta = (0.5 * gap)
                        .min(0.5 * (lead.value - sigma))
                        .max(2.0 * lead.residual)
                        .max(10.0 * tol * lead.value.abs());
                    let mut candidate = lead.value - delta;
                    for _ in 0..8 {
                        if candidate <= sigma + 0.05 * (lead.value - sigma) {
                            break;
                        }
                        let below_locked = locked.iter().filter(|l| l.value < candidate).count();
                        match structure.factor(candidate) {
                            Ok(f) if f.negative_pivots() == below_locked => {
                                log::debug!("shift {sigma:.6e} -> {candidate:.6e}");
                                sigma = candidate;
                                factor = f;
                                break;
                            }
                            _ => candidate = 0.5 * (candidate + sigma),
                        }
                    }
                }
            }

            start = if pending.is_empty() {
                random_unit(&mut rng, n, &locked_vecs)
            } else {
                let mut s = vec![0.0; n];
                for p in &pending {
                    axpy(1.0, &p.vector, &mut s);
                }
                orthogonalize(&mut s, &locked_vecs);
                let ns = norm(&s);
                if ns > 1e-8 {
                    s.iter_mut().for_each(|x| *x /= ns);
                    s
                } else {
                    random_unit(&mut rng, n, &locked_vecs)
                }
            };
        }

        // Completeness certificate: every eigenvalue in the reported window
        // must have been found.
        locked.sort_by(|p, q| {
            (p.value - sigma)
                .abs()
                .partial_cmp(&(q.value - sigma).abs())
                .unwrap()
        });
        let kept = &locked[..k.min(locked.len())];
        let radius = kept.iter().map(|r| (r.value - shift).abs()).fold(0.0, f64::max);
        let shrink = radius * (1.0 - 10.0 * tol) - 10.0 * tol * shift.abs();
        let (lo, hi) = match opts.mode {
            ShiftMode::Below => (None, shift + shrink),
            ShiftMode::Interior => (Some(shift - shrink), shift + shrink),
        };
        let inside = locked
            .iter()
            .filter(|r| r.value < hi && lo.is_none_or(|l| r.value > l))
            .count();
        match count_in(&structure, lo, hi) {
            Some(c) if c > inside && locked.len() < n && passes < opts.max_passes => {
                log::debug!("inertia found {} eigenvalues in window, have {inside}; continuing", c);
                target = locked.len() + (c - inside);
                start = random_unit(&mut rng, n, &locked_vecs);
            }
            _ => break,
        }
    }

    finalize(a, locked, k, shift, opts, iterations, passes, sigma)
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    a: &CsrMatrix,
    mut locked: Vec<Ritz>,
    k: usize,
    shift: f64,
    opts: &SolverOptions,
    iterations: usize,
    passes: usize,
    sigma: f64,
) -> Result<EigenSolution, EigenError> {
    locked.sort_by(|p, q| {
        (p.value - shift)
            .abs()
            .partial_cmp(&(q.value - shift).abs())
            .unwrap()
    });
    locked.truncate(k);
    let n = a.dim();
    let kk = locked.len();

    // Rayleigh-Ritz on the locked subspace resolves near-degenerate rotations.
    let ax: Vec<Vec<f64>> = locked.iter().map(|r| a.mul_vec(&r.vector)).collect();
    let g = DMatrix::from_fn(kk, kk, |i, j| 0.5 * (dot(&locked[i].vector, &ax[j]) + dot(&locked[j].vector, &ax[i])));
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..kk).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].partial_cmp(&eig.eigenvalues[q]).unwrap());

    let mut values = Vec::with_capacity(kk);
    let mut vectors = Vec::with_capacity(kk);
    let mut residuals = Vec::with_capacity(kk);
    for c in order {
        let mut y = vec![0.0; n];
        for (i, r) in locked.iter().enumerate() {
            axpy(eig.eigenvectors[(i, c)], &r.vector, &mut y);
        }
        let ny = norm(&y);
        y.iter_mut().for_each(|x| *x /= ny);
        fix_sign(&mut y);
        let (rho, res) = rayleigh(a, &y);
        if res > opts.tol * rho.abs() {
            return Err(EigenError::NonConvergence {
                iterations,
                best_residual: res / rho.abs(),
            });
        }
        values.push(rho);
        vectors.push(y);
        residuals.push(res / rho.abs());
    }
    Ok(EigenSolution {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
        iterations,
        passes,
        tol: opts.tol,
        shift,
        final_shift: sigma,
        seed: opts.seed,
    })
}

/// Makes the largest-magnitude component positive (first index on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = (0usize, 0.0f64);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best.1 {
            best = (i, x.abs());
        }
    }
    if v.get(best.0).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
