//! Uniform collocation grid over the rescaled cross and the anisotropic
//! five-point operator `-(d²/dx'² + beta⁻² d²/dy'²)`.
//!
//! Nodal collocation with tent functions on a uniform grid is exactly the
//! central-difference stencil, so the matrix rows are
//! `(2/hx² + 2/(beta² hy²)) u_i - u_east/hx² - ... `, with Dirichlet neighbours
//! dropped. On the desymmetrized quarter domain an even-parity axis is handled
//! by ghost reflection, which doubles the coupling to the off-axis neighbour.
//! That row scaling is removed by the diagonal similarity with trapezoid
//! weights (1/2 per Neumann axis the node sits on), which turns every coupling
//! across an axis into `-sqrt(2) c` and leaves the matrix symmetric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{desymmetrize, AxisCondition, BoundaryPlan, CrossProblem, SymmetryClass};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridError {
    #[error("grid size N = {0} must be even and >= 2")]
    OddOrTooSmall(usize),
    #[error("spacing 2L/N = {spacing} for L = {l}, N = {n} does not put the arm boundary on a grid line (1/h = {inverse})")]
    BoundaryOffGrid { l: f64, n: usize, spacing: f64, inverse: f64 },
    #[error("vector length {got} does not match the {expected} mapped nodes")]
    LengthMismatch { got: usize, expected: usize },
}

/// Uniform grid `x_k = 2 Lx k / Nx`, `k = -Nx/2+1 ..= Nx/2-1` (same in y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
    /// Grid lines per unit length, `1/hx`; the arm wall `x' = 1` is line `arm_x`.
    pub arm_x: usize,
    pub arm_y: usize,
}

fn inverse_spacing(l: f64, n: usize) -> Result<usize, GridError> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(GridError::OddOrTooSmall(n));
    }
    let inv = n as f64 / (2.0 * l);
    let rounded = inv.round();
    if rounded < 1.0 || (inv - rounded).abs() > 1e-9 * inv {
        return Err(GridError::BoundaryOffGrid {
            l,
            n,
            spacing: 2.0 * l / n as f64,
            inverse: inv,
        });
    }
    Ok(rounded as usize)
}

pub fn build_grid(problem: &CrossProblem, nx: usize, ny: usize) -> Result<Grid, GridError> {
    let arm_x = inverse_spacing(problem.lx, nx)?;
    let arm_y = inverse_spacing(problem.ly, ny)?;
    Ok(Grid {
        nx,
        ny,
        lx: problem.lx,
        ly: problem.ly,
        hx: 1.0 / arm_x as f64,
        hy: 1.0 / arm_y as f64,
        arm_x,
        arm_y,
    })
}

impl Grid {
    /// Largest interior node index along x (`Nx/2 - 1`).
    pub fn kx_max(&self) -> i64 {
        (self.nx / 2) as i64 - 1
    }

    pub fn ky_max(&self) -> i64 {
        (self.ny / 2) as i64 - 1
    }

    pub fn x(&self, kx: i64) -> f64 {
        kx as f64 * self.hx
    }

    pub fn y(&self, ky: i64) -> f64 {
        ky as f64 * self.hy
    }

    /// Strict membership of node `(kx, ky)` in the rescaled cross.
    pub fn in_cross(&self, kx: i64, ky: i64) -> bool {
        kx.unsigned_abs() < self.arm_x as u64 || ky.unsigned_abs() < self.arm_y as u64
    }

    /// Continuum edges of the discretized channels for `class`: the lowest
    /// transverse eigenvalue of the Dirichlet chain across each arm,
    /// `(4/h²) sin²(n pi h / 4)` with `n = 1` (even) or `2` (odd), with the
    /// `beta⁻²` factor for the horizontal arm.
    pub fn channel_thresholds(&self, class: SymmetryClass, beta: f64) -> crate::ChannelThresholds {
        let chain = |h: f64, n: u32| {
            let s = (f64::from(n) * std::f64::consts::PI * h / 4.0).sin();
            4.0 / (h * h) * s * s
        };
        crate::ChannelThresholds {
            horizontal: chain(self.hy, crate::geometry::transverse_mode(class.parity_y())) / (beta * beta),
            vertical: chain(self.hx, crate::geometry::transverse_mode(class.parity_x())),
        }
    }
}

/// Which part of the cross the matrix is assembled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainMode {
    /// Desymmetrized quarter `x, y >= 0` with the class parity conditions.
    Quarter,
    /// Whole truncated cross; the spectrum contains every class.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeFlags {
    pub neumann_x_axis: bool,
    pub neumann_y_axis: bool,
    /// At least one stencil neighbour is a Dirichlet zero (wall, cut or odd axis).
    pub dirichlet_neighbor: bool,
}

impl NodeFlags {
    /// Trapezoid weight used by the symmetrization.
    pub fn weight(&self) -> f64 {
        let mut w = 1.0;
        if self.neumann_x_axis {
            w *= 0.5;
        }
        if self.neumann_y_axis {
            w *= 0.5;
        }
        w
    }
}

const NONE: u32 = u32::MAX;

/// Bijection between mapped cross nodes and matrix rows, in `(y, x)`
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorIndexMap {
    mode: DomainMode,
    plan: Option<BoundaryPlan>,
    kx_min: i64,
    kx_max: i64,
    ky_min: i64,
    ky_max: i64,
    slots: Vec<u32>,
    nodes: Vec<(i64, i64)>,
    flags: Vec<NodeFlags>,
}

impl InteriorIndexMap {
    pub fn new(grid: &Grid, class: SymmetryClass, mode: DomainMode) -> Self {
        let (plan, kx_min, ky_min) = match mode {
            DomainMode::Quarter => {
                let plan = desymmetrize(class);
                let start = |c: AxisCondition| match c {
                    AxisCondition::Neumann => 0,
                    AxisCondition::Dirichlet => 1,
                };
                (Some(plan), start(plan.x_axis), start(plan.y_axis))
            }
            DomainMode::Full => (None, -grid.kx_max(), -grid.ky_max()),
        };
        let (kx_max, ky_max) = (grid.kx_max(), grid.ky_max());
        let width = (kx_max - kx_min + 1).max(0) as usize;
        let height = (ky_max - ky_min + 1).max(0) as usize;
        let mut slots = vec![NONE; width * height];
        let mut nodes = Vec::new();
        for ky in ky_min..=ky_max {
            for kx in kx_min..=kx_max {
                if grid.in_cross(kx, ky) {
                    slots[(ky - ky_min) as usize * width + (kx - kx_min) as usize] = nodes.len() as u32;
                    nodes.push((kx, ky));
                }
            }
        }
        let mut map = Self {
            mode,
            plan,
            kx_min,
            kx_max,
            ky_min,
            ky_max,
            slots,
            nodes,
            flags: Vec::new(),
        };
        map.flags = map.nodes.iter().map(|&(kx, ky)| map.compute_flags(kx, ky)).collect();
        map
    }

    fn neumann_x(&self) -> bool {
        matches!(self.plan, Some(p) if p.x_axis == AxisCondition::Neumann)
    }

    fn neumann_y(&self) -> bool {
        matches!(self.plan, Some(p) if p.y_axis == AxisCondition::Neumann)
    }

    fn compute_flags(&self, kx: i64, ky: i64) -> NodeFlags {
        let neumann_x_axis = self.neumann_x() && kx == 0;
        let neumann_y_axis = self.neumann_y() && ky == 0;
        let ghost = |nx: i64, ny: i64| (nx < 0 && neumann_x_axis) || (ny < 0 && neumann_y_axis);
        let dirichlet_neighbor = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
            let (nx, ny) = (kx + dx, ky + dy);
            !ghost(nx, ny) && self.index(nx, ny).is_none()
        });
        NodeFlags {
            neumann_x_axis,
            neumann_y_axis,
            dirichlet_neighbor,
        }
    }

    pub fn mode(&self) -> DomainMode {
        self.mode
    }

    pub fn plan(&self) -> Option<BoundaryPlan> {
        self.plan
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index(&self, kx: i64, ky: i64) -> Option<usize> {
        if kx < self.kx_min || kx > self.kx_max || ky < self.ky_min || ky > self.ky_max {
            return None;
        }
        let width = (self.kx_max - self.kx_min + 1) as usize;
        let s = self.slots[(ky - self.ky_min) as usize * width + (kx - self.kx_min) as usize];
        (s != NONE).then_some(s as usize)
    }

    pub fn node(&self, i: usize) -> (i64, i64) {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[(i64, i64)] {
        &self.nodes
    }

    pub fn flags(&self, i: usize) -> NodeFlags {
        self.flags[i]
    }

    /// Index ranges `(kx_min, kx_max, ky_min, ky_max)` of the mapped box.
    pub fn bounds(&self) -> (i64, i64, i64, i64) {
        (self.kx_min, self.kx_max, self.ky_min, self.ky_max)
    }
}

/// Assembled operator together with the mapping that produced it.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: CsrMatrix,
    pub map: InteriorIndexMap,
    pub grid: Grid,
    pub beta: f64,
    pub class: SymmetryClass,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Gershgorin-type bound `4/hx² + 4/(beta² hy²)` on the spectrum.
    pub fn spectral_upper_bound(&self) -> f64 {
        let cx = 1.0 / (self.grid.hx * self.grid.hx);
        let cy = 1.0 / (self.beta * self.beta * self.grid.hy * self.grid.hy);
        4.0 * (cx + cy)
    }
}

/// Quarter-domain operator for `problem.class`.
pub fn assemble_operator(grid: &Grid, problem: &CrossProblem) -> OperatorMatrix {
    assemble_operator_in(grid, problem, DomainMode::Quarter)
}

pub fn assemble_operator_in(grid: &Grid, problem: &CrossProblem, mode: DomainMode) -> OperatorMatrix {
    let map = InteriorIndexMap::new(grid, problem.class, mode);
    let cx = 1.0 / (grid.hx * grid.hx);
    let cy = 1.0 / (problem.beta * problem.beta * grid.hy * grid.hy);
    let diag = 2.0 * cx + 2.0 * cy;
    let mut triplets = Vec::with_capacity(5 * map.len());
    for (i, &(kx, ky)) in map.nodes().iter().enumerate() {
        triplets.push((i, i, diag));
        // East and north couplings; the symmetric entry is pushed alongside.
        for (dx, dy, c) in [(1, 0, cx), (0, 1, cy)] {
            if let Some(j) = map.index(kx + dx, ky + dy) {
                let crosses_axis = (dx == 1 && map.flags(i).neumann_x_axis) || (dy == 1 && map.flags(i).neumann_y_axis);
                let w = if crosses_axis { -std::f64::consts::SQRT_2 * c } else { -c };
                triplets.push((i, j, w));
                triplets.push((j, i, w));
            }
        }
    }
    OperatorMatrix {
        matrix: CsrMatrix::from_triplets(map.len(), &triplets),
        map,
        grid: *grid,
        beta: problem.beta,
        class: problem.class,
    }
}

/// Nodal field on the interior box of a map, zero on every unmapped node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub kx_min: i64,
    pub kx_max: i64,
    pub ky_min: i64,
    pub ky_max: i64,
    pub hx: f64,
    pub hy: f64,
    pub beta: f64,
    /// Row-major with `y` as the slow index.
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(kx: (i64, i64), ky: (i64, i64), hx: f64, hy: f64, beta: f64) -> Self {
        let w = (kx.1 - kx.0 + 1) as usize;
        let h = (ky.1 - ky.0 + 1) as usize;
        Self {
            kx_min: kx.0,
            kx_max: kx.1,
            ky_min: ky.0,
            ky_max: ky.1,
            hx,
            hy,
            beta,
            values: vec![0.0; w * h],
        }
    }

    pub fn width(&self) -> usize {
        (self.kx_max - self.kx_min + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.ky_max - self.ky_min + 1) as usize
    }

    fn offset(&self, kx: i64, ky: i64) -> Option<usize> {
        (kx >= self.kx_min && kx <= self.kx_max && ky >= self.ky_min && ky <= self.ky_max)
            .then(|| (ky - self.ky_min) as usize * self.width() + (kx - self.kx_min) as usize)
    }

    pub fn get(&self, kx: i64, ky: i64) -> f64 {
        self.offset(kx, ky).map_or(0.0, |o| self.values[o])
    }

    pub fn set(&mut self, kx: i64, ky: i64, v: f64) {
        let o = self.offset(kx, ky).expect("node outside field box");
        self.values[o] = v;
    }

    /// Values along the grid line `ky` for `kx >= max(0, kx_min)`, as `(x', psi)`.
    pub fn cut_along_x(&self, ky: i64) -> Vec<(f64, f64)> {
        (self.kx_min.max(0)..=self.kx_max)
            .map(|kx| (kx as f64 * self.hx, self.get(kx, ky)))
            .collect()
    }

    /// Values along the grid line `kx` for `ky >= max(0, ky_min)`, as `(y', psi)`.
    pub fn cut_along_y(&self, kx: i64) -> Vec<(f64, f64)> {
        (self.ky_min.max(0)..=self.ky_max)
            .map(|ky| (ky as f64 * self.hy, self.get(kx, ky)))
            .collect()
    }

    /// Grid line nearest to the rescaled coordinate `x'`.
    pub fn x_line(&self, x: f64) -> i64 {
        (x / self.hx).round() as i64
    }

    pub fn y_line(&self, y: f64) -> i64 {
        (y / self.hy).round() as i64
    }

    /// Node with the largest `|psi|`; first in row-major order on ties.
    pub fn argmax_abs(&self) -> (i64, i64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (o, v) in self.values.iter().enumerate() {
            if v.abs() > best.1 {
                best = (o, v.abs());
            }
        }
        let w = self.width();
        (self.kx_min + (best.0 % w) as i64, self.ky_min + (best.0 / w) as i64)
    }

    /// Extends a quarter-domain field to the whole box using the class parity.
    pub fn unfold(&self, class: SymmetryClass) -> Field {
        use crate::geometry::Parity;
        if self.kx_min < 0 && self.ky_min < 0 {
            return self.clone();
        }
        let sx = if class.parity_x() == Parity::Even { 1.0 } else { -1.0 };
        let sy = if class.parity_y() == Parity::Even { 1.0 } else { -1.0 };
        let mut out = Field::zeros((-self.kx_max, self.kx_max), (-self.ky_max, self.ky_max), self.hx, self.hy, self.beta);
        for ky in -self.ky_max..=self.ky_max {
            for kx in -self.kx_max..=self.kx_max {
                let mut s = 1.0;
                if kx < 0 {
                    s *= sx;
                }
                if ky < 0 {
                    s *= sy;
                }
                out.set(kx, ky, s * self.get(kx.abs(), ky.abs()));
            }
        }
        out
    }
}

/// Maps an eigenvector (in the symmetrized basis) back to nodal values.
pub fn extract_field(vector: &[f64], map: &InteriorIndexMap, grid: &Grid, beta: f64) -> Result<Field, GridError> {
    if vector.len() != map.len() {
        return Err(GridError::LengthMismatch {
            got: vector.len(),
            expected: map.len(),
        });
    }
    let (kx_min, kx_max, ky_min, ky_max) = match map.mode() {
        DomainMode::Quarter => (0, grid.kx_max(), 0, grid.ky_max()),
        DomainMode::Full => map.bounds(),
    };
    let mut field = Field::zeros((kx_min, kx_max), (ky_min, ky_max), grid.hx, grid.hy, beta);
    for (i, &v) in vector.iter().enumerate() {
        let (kx, ky) = map.node(i);
        field.set(kx, ky, v / map.flags(i).weight().sqrt());
    }
    Ok(field)
}
