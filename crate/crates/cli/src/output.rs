//! Table, field and cut writers.

use std::fmt::Write as _;
use std::io::{self, Write};

use crossguide_core::analysis::{decay::ODD_CUT, CellSolution, SweepCell};
use crossguide_core::discretization::Field;

pub const CSV_HEADER: &str = "beta,set,E_ratio,ell_x,ell_y";

/// Six significant digits, trailing zeros kept; scientific outside `[1e-4, 1e6)`.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    // Exponent after rounding to six digits, so 9.999996 becomes 10.0000.
    let sci = format!("{v:.5e}");
    let exp: i32 = sci.split_once('e').map(|(_, e)| e.parse().unwrap()).unwrap();
    if !(-4..6).contains(&exp) {
        return sci;
    }
    format!("{v:.*}", (5 - exp).max(0) as usize)
}

fn opt(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_default()
}

/// One row per cell; failed cells keep their beta and set with empty values.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for c in cells {
        let (e, lx, ly) = match &c.result {
            Ok(r) => (sig6(r.e_ratio), opt(r.ell_x), opt(r.ell_y)),
            Err(_) => (String::new(), String::new(), String::new()),
        };
        writeln!(s, "{},{},{e},{lx},{ly}", sig6(c.beta), c.set).unwrap();
    }
    s
}

/// Plain-text node field: header lines, then one row of values per `ky`
/// (ascending), `kx` ascending within a row.
pub fn write_field(w: &mut impl Write, sol: &CellSolution, field: &Field, domain: &str) -> io::Result<()> {
    let p = &sol.problem;
    let g = &sol.grid;
    writeln!(w, "# crossguide node field, rescaled y' = y / beta")?;
    writeln!(w, "N_x {}", g.nx)?;
    writeln!(w, "N_y {}", g.ny)?;
    writeln!(w, "L_x {:?}", g.lx)?;
    writeln!(w, "L_y {:?}", g.ly)?;
    writeln!(w, "beta {:?}", p.beta)?;
    writeln!(w, "class {}", p.class)?;
    writeln!(w, "domain {domain}")?;
    writeln!(w, "kx {} {}", field.kx_min, field.kx_max)?;
    writeln!(w, "ky {} {}", field.ky_min, field.ky_max)?;
    writeln!(w, "h_x {:?}", field.hx)?;
    writeln!(w, "h_y {:?}", field.hy)?;
    for ky in field.ky_min..=field.ky_max {
        let row: Vec<String> = (field.kx_min..=field.kx_max).map(|kx| format!("{:e}", field.get(kx, ky))).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Original coordinates of node `(kx, ky)`; exact for the integer `1/h` grids.
fn coords(field: &Field, kx: i64, ky: i64) -> (f64, f64) {
    let (ix, iy) = ((1.0 / field.hx).round(), (1.0 / field.hy).round());
    (kx as f64 / ix, ky as f64 * field.beta / iy)
}

/// `x,y,value` in original coordinates.
pub fn write_field_csv(w: &mut impl Write, field: &Field) -> io::Result<()> {
    writeln!(w, "x,y,value")?;
    for ky in field.ky_min..=field.ky_max {
        for kx in field.kx_min..=field.kx_max {
            let (x, y) = coords(field, kx, ky);
            writeln!(w, "{x:?},{y:?},{:e}", field.get(kx, ky))?;
        }
    }
    Ok(())
}

/// Three-column `x y psi` cuts in original coordinates, one gnuplot data
/// block per cut: along `x` at `y' = 0` and `y' = 2/3`, along `y` at `x' = 0`
/// and `x' = 2/3`.
pub fn write_cuts(w: &mut impl Write, field: &Field) -> io::Result<()> {
    let mut first = true;
    let mut block = |w: &mut dyn Write, title: String, pts: Vec<(f64, f64, f64)>| -> io::Result<()> {
        if !first {
            writeln!(w, "\n")?;
        }
        first = false;
        writeln!(w, "# {title}")?;
        for (x, y, v) in pts {
            writeln!(w, "{x:?} {y:?} {v:e}")?;
        }
        Ok(())
    };
    for yp in [0.0, ODD_CUT] {
        let ky = field.y_line(yp);
        let pts = (field.kx_min..=field.kx_max)
            .map(|kx| {
                let (x, y) = coords(field, kx, ky);
                (x, y, field.get(kx, ky))
            })
            .collect();
        block(w, format!("along x at y' = {yp:.6}"), pts)?;
    }
    for xp in [0.0, ODD_CUT] {
        let kx = field.x_line(xp);
        let pts = (field.ky_min..=field.ky_max)
            .map(|ky| {
                let (x, y) = coords(field, kx, ky);
                (x, y, field.get(kx, ky))
            })
            .collect();
        block(w, format!("along y at x' = {xp:.6}"), pts)?;
    }
    Ok(())
}

/// Number of strict sign changes along a cut, ignoring values below `floor`.
pub fn sign_changes(values: impl IntoIterator<Item = f64>, floor: f64) -> usize {
    let mut last = 0.0f64;
    let mut n = 0;
    for v in values {
        if v.abs() <= floor {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            n += 1;
        }
        last = v;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.66296012), "0.662960");
        assert_eq!(sig6(3.720422), "3.72042");
        assert_eq!(sig6(26.5281), "26.5281");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(1.116), "1.11600");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1.5e-7), "1.50000e-7");
    }

    #[test]
    fn sign_change_count() {
        assert_eq!(sign_changes([1.0, 2.0, 0.0, 1.0], 0.0), 0);
        assert_eq!(sign_changes([1.0, -1.0, 1e-20, 2.0], 1e-12), 2);
    }
}
