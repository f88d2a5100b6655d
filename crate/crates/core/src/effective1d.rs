//! One-dimensional reduction: a finite square well of the narrow arm's width,
//! with an infinite wall for classes odd in `x`. Used only to predict which
//! classes bind, never for energies.
//!
//! Energies use the `-1/2 d²/dx²` normalization (inside `V = 0`, outside
//! `V = depth`).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Parity, SymmetryClass};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum WellError {
    #[error("well width must be positive and finite, got {0}")]
    InvalidWidth(f64),
    #[error("well depth must be positive and finite, got {0}")]
    InvalidDepth(f64),
    #[error("arm half-width {half_width} must lie strictly inside (0, L_y = {l_y})")]
    InvalidBox { half_width: f64, l_y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveWell {
    pub width: f64,
    pub depth: f64,
    /// Infinite wall at the well centre: only the odd states of the full-width
    /// well survive.
    pub wall: bool,
    /// Transverse zero-point term `pi²/(8 L_y²)`; reported, never used for
    /// boundness.
    pub energy_offset: f64,
}

impl EffectiveWell {
    pub fn new(width: f64, depth: f64, wall: bool) -> Result<Self, WellError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(WellError::InvalidWidth(width));
        }
        if !(depth.is_finite() && depth > 0.0) {
            return Err(WellError::InvalidDepth(depth));
        }
        Ok(Self {
            width,
            depth,
            wall,
            energy_offset: 0.0,
        })
    }

    /// Reduction for a class: width of the narrow arm (2 in rescaled units),
    /// wall for odd `x` parity.
    pub fn for_class(class: SymmetryClass, depth: f64, l_y: f64) -> Result<Self, WellError> {
        let mut w = Self::new(2.0, depth, class.parity_x() == Parity::Odd)?;
        w.energy_offset = PI * PI / (8.0 * l_y * l_y);
        Ok(w)
    }

    /// Strength `sqrt(2 depth) * width / 2`; odd states exist above `pi/2`.
    pub fn strength(&self) -> f64 {
        (2.0 * self.depth).sqrt() * self.width / 2.0
    }
}

/// Depth of the averaged barrier seen in the narrow arm: the weight of the
/// lowest box mode `sin²(pi (y + L_y) / (2 L_y)) / L_y` outside `|y| < w_y/2`,
/// times `v0`. Closed form `v0 [(1 - a/L) - sin(pi a / L) / pi]`, `a = w_y/2`.
pub fn effective_depth(v0: f64, w_y: f64, l_y: f64) -> Result<f64, WellError> {
    let a = w_y / 2.0;
    if !(v0.is_finite() && v0 > 0.0) {
        return Err(WellError::InvalidDepth(v0));
    }
    if !(a >= 0.0 && a < l_y && l_y.is_finite()) {
        return Err(WellError::InvalidBox { half_width: a, l_y });
    }
    let r = a / l_y;
    Ok(v0 * ((1.0 - r) - (PI * r).sin() / PI))
}

const ROOT_TOL: f64 = 1e-12;

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Bound-state energies, ascending. Matching conditions with `q = sqrt(2
/// depth - k²)`: even `k sin(ka) = q cos(ka)`, odd `k cos(ka) = -q sin(ka)`,
/// `a = width / 2`; each root is bracketed in its own quarter period of `ka`.
pub fn well_bound_states(well: &EffectiveWell) -> Vec<f64> {
    let a = well.width / 2.0;
    let kmax = (2.0 * well.depth).sqrt();
    let q = |k: f64| (kmax * kmax - k * k).max(0.0).sqrt();
    let even = |k: f64| k * (k * a).sin() - q(k) * (k * a).cos();
    let odd = |k: f64| k * (k * a).cos() + q(k) * (k * a).sin();
    let mut ks = Vec::new();
    let mut n = 0usize;
    loop {
        let base = n as f64 * PI;
        let e_lo = base / a;
        if e_lo >= kmax {
            break;
        }
        if !well.wall {
            // Avoid k = 0 where the even condition degenerates.
            let lo = if n == 0 { 1e-300 } else { e_lo };
            if let Some(k) = bisect(even, lo, ((base + FRAC_PI_2) / a).min(kmax)) {
                ks.push(k);
            }
        }
        let o_lo = (base + FRAC_PI_2) / a;
        if o_lo < kmax {
            if let Some(k) = bisect(odd, o_lo, ((base + PI) / a).min(kmax)) {
                ks.push(k);
            }
        }
        n += 1;
    }
    let mut es: Vec<f64> = ks.into_iter().filter(|&k| k < kmax).map(|k| 0.5 * k * k).collect();
    es.sort_by(|x, y| x.partial_cmp(y).unwrap());
    es.dedup_by(|x, y| (*x - *y).abs() <= 1e-10 * y.abs().max(1.0));
    es
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: SymmetryClass,
    /// Binds in the symmetric cross.
    pub symmetric: bool,
    /// Binds as the narrow arm becomes vanishingly thin.
    pub thin_arm: bool,
}

/// Expected boundness per class. The thin-arm column is the weak-well limit
/// of the reduction (any depth binds without a wall, a weak enough well never
/// binds with one); the symmetric column records the known ground states of
/// the symmetric cross (the even-even and the odd-odd state).
pub fn qualitative_predictions() -> Vec<Prediction> {
    let weak = 1e-3;
    SymmetryClass::ALL
        .into_iter()
        .map(|class| {
            let well = EffectiveWell::new(2.0, weak, class.parity_x() == Parity::Odd).expect("valid well");
            Prediction {
                class,
                symmetric: matches!(class, SymmetryClass::EvenEven | SymmetryClass::OddOdd),
                thin_arm: !well_bound_states(&well).is_empty(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Number of eigenvalues below `depth` of the finite-difference well
    /// Hamiltonian on a large box, by a Sturm count of the tridiagonal matrix.
    fn grid_bound_count(well: &EffectiveWell, h: f64, box_half: f64) -> usize {
        let a = well.width / 2.0;
        let (start, end) = if well.wall { (h, box_half) } else { (-box_half, box_half) };
        let n = ((end - start) / h).round() as usize;
        let mut count = 0;
        let mut d_prev = 1.0;
        let off = -0.5 / (h * h);
        for i in 0..n {
            let x = start + i as f64 * h;
            let v = if x.abs() < a { 0.0 } else { well.depth };
            let diag = 1.0 / (h * h) + v - well.depth;
            let d = if i == 0 { diag } else { diag - off * off / d_prev };
            if d < 0.0 {
                count += 1;
            }
            d_prev = d;
        }
        count
    }

    #[test]
    fn depth_closed_form_matches_quadrature() {
        let (v0, wy, ly) = (100.0, 2.0, 4.0);
        let a = wy / 2.0;
        // Composite Simpson on the defining integral.
        let m = 20_000;
        let h = (ly - a) / m as f64;
        let f = |y: f64| (PI * (y + ly) / (2.0 * ly)).sin().powi(2) / ly;
        let mut s = f(a) + f(ly);
        for i in 1..m {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = 2.0 * v0 * s * h / 3.0;
        let closed = effective_depth(v0, wy, ly).unwrap();
        assert!((closed - quad).abs() < 1e-10, "{closed} vs {quad}");
    }

    #[test]
    fn depth_limits() {
        assert!(effective_depth(3.0, 2.0 * (4.0 - 1e-9), 4.0).unwrap() < 1e-12);
        assert!((effective_depth(3.0, 0.0, 4.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(effective_depth(3.0, 8.0, 4.0).is_err());
        assert!(effective_depth(-1.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn open_well_always_binds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let width = 10f64.powf(rng.gen_range(-3.0..2.0));
            let depth = 10f64.powf(rng.gen_range(-4.0..4.0));
            let w = EffectiveWell::new(width, depth, false).unwrap();
            let e = well_bound_states(&w);
            assert!(!e.is_empty(), "width {width}, depth {depth}");
            assert!(e.iter().all(|&x| x > 0.0 && x < depth));
        }
    }

    #[test]
    fn walled_well_existence_threshold() {
        let width = 2.0;
        // sqrt(2 depth) width / 2 = pi / 2.
        let critical = (PI / width).powi(2) / 2.0;
        for (factor, expected) in [(0.9, 0), (1.2, 1)] {
            let w = EffectiveWell::new(width, factor * critical, true).unwrap();
            assert_eq!(well_bound_states(&w).len(), expected, "factor {factor}");
            assert_eq!(grid_bound_count(&w, 2e-3, 60.0), expected, "grid oracle, factor {factor}");
        }
    }

    #[test]
    fn open_well_matches_grid_oracle() {
        for (width, depth) in [(2.0, 0.3), (2.0, 5.0), (1.0, 40.0)] {
            let w = EffectiveWell::new(width, depth, false).unwrap();
            assert_eq!(well_bound_states(&w).len(), grid_bound_count(&w, 2e-3, 30.0));
        }
    }

    #[test]
    fn deep_well_limit() {
        let width = 2.0;
        let depth = (800.0f64 / width).powi(2) / 2.0;
        let w = EffectiveWell::new(width, depth, false).unwrap();
        let e0 = well_bound_states(&w)[0];
        let inf = PI * PI / (2.0 * width * width);
        assert!((e0 - inf).abs() / inf < 0.01, "{e0} vs {inf}");
    }

    #[test]
    fn wall_counts_are_monotone() {
        let mut last = 0;
        for i in 1..200 {
            let w = EffectiveWell::new(2.0, 0.1 * i as f64, true).unwrap();
            let c = well_bound_states(&w).len();
            assert!(c >= last);
            last = c;
        }
        let mut last = 0;
        for i in 1..200 {
            let w = EffectiveWell::new(0.05 * i as f64, 3.0, true).unwrap();
            let c = well_bound_states(&w).len();
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn wall_keeps_the_odd_states() {
        for depth in [0.5, 3.0, 17.0, 120.0] {
            let open = well_bound_states(&EffectiveWell::new(2.0, depth, false).unwrap());
            let walled = well_bound_states(&EffectiveWell::new(2.0, depth, true).unwrap());
            let odd: Vec<f64> = open.iter().skip(1).step_by(2).copied().collect();
            assert_eq!(walled.len(), odd.len());
            for (a, b) in walled.iter().zip(&odd) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn prediction_table() {
        let t = qualitative_predictions();
        let get = |c| *t.iter().find(|p| p.class == c).unwrap();
        assert_eq!((get(SymmetryClass::EvenEven).symmetric, get(SymmetryClass::EvenEven).thin_arm), (true, true));
        assert_eq!((get(SymmetryClass::OddOdd).symmetric, get(SymmetryClass::OddOdd).thin_arm), (true, false));
        assert_eq!((get(SymmetryClass::EvenOdd).symmetric, get(SymmetryClass::EvenOdd).thin_arm), (false, true));
        assert_eq!((get(SymmetryClass::OddEven).symmetric, get(SymmetryClass::OddEven).thin_arm), (false, false));
    }

    #[test]
    fn class_reduction() {
        let w = EffectiveWell::for_class(SymmetryClass::OddEven, 1.0, 4.0).unwrap();
        assert!(w.wall && w.width == 2.0);
        assert!((w.energy_offset - PI * PI / 128.0).abs() < 1e-15);
        assert!(!EffectiveWell::for_class(SymmetryClass::EvenOdd, 1.0, 4.0).unwrap().wall);
    }
}
