//! Sparse symmetric eigensolver for the few lowest eigenpairs.
//!
//! Shift-invert Lanczos on `(A - sigma I)^-1` with an envelope LDLᵀ factor.
//! Every returned pair satisfies `|A v - lambda v| <= tol * |lambda|`,
//! checked against `A` itself, and an inertia count certifies that no
//! eigenvalue inside the returned window was skipped. A solve is
//! single-threaded, so results are bitwise reproducible for a fixed seed.

pub mod ldl;
mod lanczos;

use serde::{Deserialize, Serialize};

use crate::sparse::CsrMatrix;

pub use lanczos::fix_sign as normalize_sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftMode {
    /// The shift lies below the spectrum; the k smallest eigenvalues are
    /// returned and the shift may be moved up adaptively.
    Below,
    /// The k eigenvalues nearest to the shift, which stays fixed.
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub seed: u64,
    /// Krylov basis size per restart; `None` means `max(40, 4k + 20)`.
    pub krylov_dim: Option<usize>,
    pub max_passes: usize,
    pub adaptive_shift: bool,
    pub mode: ShiftMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            seed: 0x5eed_2011,
            krylov_dim: None,
            max_passes: 60,
            adaptive_shift: true,
            mode: ShiftMode::Below,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit 2-norm; largest-magnitude component positive.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Relative residuals `|A v - lambda v| / |lambda|`.
    pub residuals: Vec<f64>,
    /// Total Lanczos steps, i.e. linear solves.
    pub iterations: usize,
    pub passes: usize,
    pub tol: f64,
    pub shift: f64,
    /// Shift in effect at the end of an adaptive solve.
    pub final_shift: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum EigenError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no convergence after {iterations} Lanczos steps (best relative residual {best_residual:.3e})")]
    NonConvergence { iterations: usize, best_residual: f64 },
    #[error("A - {shift} I is numerically singular at pivot {pivot_index}")]
    ShiftFactorizationFailure { shift: f64, pivot_index: usize },
    #[error("shift {shift} has {eigenvalues_below} eigenvalues below it")]
    ShiftAboveSpectrum { shift: f64, eigenvalues_below: usize },
}

/// The `k` smallest eigenpairs of a symmetric positive definite matrix.
pub fn smallest_eigenpairs(a: &CsrMatrix, k: usize, opts: &SolverOptions) -> Result<EigenSolution, EigenError> {
    spectral_transform_solve(a, 0.0, k, opts)
}

/// Eigenpairs via the spectral transformation `(A - shift I)^-1`. With
/// [`ShiftMode::Below`] the shift must lie under the spectrum and the `k`
/// smallest pairs are returned; with [`ShiftMode::Interior`] the `k` pairs
/// closest to the shift.
pub fn spectral_transform_solve(
    a: &CsrMatrix,
    shift: f64,
    k: usize,
    opts: &SolverOptions,
) -> Result<EigenSolution, EigenError> {
    lanczos::solve(a, shift, k, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_operator, assemble_operator_in, build_grid, DomainMode};
    use crate::geometry::{CrossProblem, SymmetryClass};
    use nalgebra::{DMatrix, SymmetricEigen};
    use std::f64::consts::PI;

    fn dense_eigenvalues(a: &CsrMatrix) -> Vec<f64> {
        let n = a.dim();
        let d = a.to_dense();
        let m = DMatrix::from_fn(n, n, |i, j| d[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|p, q| p.partial_cmp(q).unwrap());
        ev
    }

    fn rectangle(w: usize, h: usize, hx: f64, hy: f64) -> CsrMatrix {
        let (cx, cy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
        let id = |x: usize, y: usize| y * w + x;
        let mut t = Vec::new();
        for y in 0..h {
            for x in 0..w {
                t.push((id(x, y), id(x, y), 2.0 * cx + 2.0 * cy));
                if x + 1 < w {
                    t.push((id(x, y), id(x + 1, y), -cx));
                    t.push((id(x + 1, y), id(x, y), -cx));
                }
                if y + 1 < h {
                    t.push((id(x, y), id(x, y + 1), -cy));
                    t.push((id(x, y + 1), id(x, y), -cy));
                }
            }
        }
        CsrMatrix::from_triplets(w * h, &t)
    }

    #[test]
    fn chain_matches_closed_form() {
        let n = 300;
        let a = CsrMatrix::tridiagonal(n, 2.0, -1.0);
        let sol = smallest_eigenpairs(&a, 6, &SolverOptions::default()).unwrap();
        for (j, &lam) in sol.eigenvalues.iter().enumerate() {
            let exact = 4.0 * (PI * (j + 1) as f64 / (2.0 * (n + 1) as f64)).sin().powi(2);
            assert!((lam - exact).abs() <= 1e-12 * exact.max(1.0) + 1e-9 * exact, "{j}: {lam} vs {exact}");
        }
    }

    #[test]
    fn square_with_degenerate_pairs() {
        // Interior nodes of a square: modes (p, q) and (q, p) coincide.
        let m = 31;
        let h = 1.0 / (m + 1) as f64;
        let a = rectangle(m, m, h, h);
        let sol = smallest_eigenpairs(&a, 5, &SolverOptions::default()).unwrap();
        let s = |p: usize| (p as f64 * PI * h / 2.0).sin().powi(2);
        let mut exact: Vec<f64> = (1..6)
            .flat_map(|p| (1..6).map(move |q| (p, q)))
            .map(|(p, q)| 4.0 / (h * h) * (s(p) + s(q)))
            .collect();
        exact.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for (lam, ex) in sol.eigenvalues.iter().zip(&exact) {
            assert!((lam - ex).abs() <= 1e-8 * ex, "{lam} vs {ex}");
        }
        assert!((sol.eigenvalues[1] - sol.eigenvalues[2]).abs() < 1e-8 * sol.eigenvalues[1]);
    }

    #[test]
    fn tiny_cross_matches_dense_oracle() {
        let p = CrossProblem::new(1.0, SymmetryClass::EvenEven, 2.0, 2.0).unwrap();
        let g = build_grid(&p, 8, 8).unwrap();
        let op = assemble_operator_in(&g, &p, DomainMode::Full);
        let a = op.matrix();
        let dense = dense_eigenvalues(a);
        let sol = smallest_eigenpairs(a, 4, &SolverOptions::default()).unwrap();
        for (lam, ex) in sol.eigenvalues.iter().zip(&dense) {
            assert!((lam - ex).abs() <= 1e-10 * ex, "{lam} vs {ex}");
        }
    }

    #[test]
    fn residuals_and_rayleigh_quotients() {
        let p = CrossProblem::new(1.5, SymmetryClass::OddEven, 4.0, 4.0).unwrap();
        let g = build_grid(&p, 32, 32).unwrap();
        let op = assemble_operator(&g, &p);
        let a = op.matrix();
        let opts = SolverOptions::default();
        let sol = smallest_eigenpairs(a, 3, &opts).unwrap();
        for (lam, v) in sol.eigenvalues.iter().zip(&sol.eigenvectors) {
            let av = a.mul_vec(v);
            let rq: f64 = v.iter().zip(&av).map(|(x, y)| x * y).sum();
            let r: f64 = av.iter().zip(v).map(|(p, q)| (p - lam * q).powi(2)).sum::<f64>().sqrt();
            assert!(r <= opts.tol * lam);
            assert!((rq - lam).abs() <= 1e-12 * lam);
            let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((nv - 1.0).abs() < 1e-12);
        }
        assert!(sol.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_shift_is_the_smallest_solver() {
        let a = CsrMatrix::tridiagonal(120, 2.0, -1.0);
        let opts = SolverOptions::default();
        let s1 = smallest_eigenpairs(&a, 3, &opts).unwrap();
        let s2 = spectral_transform_solve(&a, 0.0, 3, &opts).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn shift_on_an_eigenvalue_is_reported() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0]);
        let opts = SolverOptions {
            mode: ShiftMode::Interior,
            ..SolverOptions::default()
        };
        match spectral_transform_solve(&a, 1.0, 1, &opts) {
            Err(EigenError::ShiftFactorizationFailure { shift, .. }) => assert_eq!(shift, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interior_mode_returns_nearest() {
        let diag: Vec<f64> = (1..=40).map(f64::from).collect();
        let a = CsrMatrix::from_diagonal(&diag);
        let opts = SolverOptions {
            mode: ShiftMode::Interior,
            ..SolverOptions::default()
        };
        let sol = spectral_transform_solve(&a, 10.2, 3, &opts).unwrap();
        let got: Vec<f64> = sol.eigenvalues.iter().map(|x| x.round()).collect();
        assert_eq!(got, vec![9.0, 10.0, 11.0]);
    }

    #[test]
    fn invalid_requests() {
        let a = CsrMatrix::tridiagonal(10, 2.0, -1.0);
        let opts = SolverOptions::default();
        let r = smallest_eigenpairs(&a, 0, &opts);
        assert!(matches!(r, Err(EigenError::InvalidRequest(_))), "{r:?}");
        let r = smallest_eigenpairs(&a, 11, &opts);
        assert!(matches!(r, Err(EigenError::InvalidRequest(_))), "{r:?}");
        let bad = SolverOptions { tol: 0.0, ..opts.clone() };
        let r = smallest_eigenpairs(&a, 2, &bad);
        assert!(matches!(r, Err(EigenError::InvalidRequest(_))), "{r:?}");
        let r = spectral_transform_solve(&a, 0.9, 2, &opts);
        assert!(matches!(r, Err(EigenError::ShiftAboveSpectrum { .. })), "{r:?}");
    }

    #[test]
    fn unit_cross_reference_energy() {
        let p = CrossProblem::new(1.0, SymmetryClass::EvenEven, 20.0, 20.0).unwrap();
        let g = build_grid(&p, 600, 600).unwrap();
        let op = assemble_operator(&g, &p);
        let sol = smallest_eigenpairs(op.matrix(), 1, &SolverOptions::default()).unwrap();
        let ratio = sol.eigenvalues[0] / crate::geometry::continuum_threshold(&p);
        assert!((ratio - 0.662960).abs() < 5e-7, "{ratio}");
    }
}
