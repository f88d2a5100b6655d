//! Per-(beta, class) solves, beta sweeps with a pluggable record store, grid
//! refinement sequences and energy-curve fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decay::{channel_decay_length, decay_lengths, DecayLengths, DecayWindow};
use super::fit::{extrapolate_grid_sequence, fit, FitModel, FitResult};
use super::AnalysisError;
use crate::discretization::{assemble_operator, build_grid, extract_field, Field, Grid};
use crate::eigensolver::{smallest_eigenpairs, SolverOptions};
use crate::geometry::{class_threshold_ratio, continuum_threshold, CrossProblem, SymmetryClass};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Truncation half-length `L` (both axes) and grid size `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub label: String,
    pub l: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(label: impl Into<String>, l: f64, n: usize) -> Self {
        Self {
            label: label.into(),
            l,
            n,
        }
    }

    /// Named sets: I = (20, 600), II = (40, 800), III = (100, 1600).
    pub fn named(name: &str) -> Option<Self> {
        match name.trim().to_ascii_uppercase().as_str() {
            "I" => Some(Self::new("I", 20.0, 600)),
            "II" => Some(Self::new("II", 40.0, 800)),
            "III" => Some(Self::new("III", 100.0, 1600)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub enum GridPolicy {
    /// Even-even and odd-even: set I up to beta 1.4, set II up to 2.1, set
    /// III beyond. Odd-odd and even-odd always use set III.
    #[default]
    Standard,
    Fixed(GridSpec),
}

impl GridPolicy {
    pub fn grid_for(&self, class: SymmetryClass, beta: f64) -> GridSpec {
        match self {
            GridPolicy::Fixed(g) => g.clone(),
            GridPolicy::Standard => {
                let name = match class {
                    SymmetryClass::OddOdd | SymmetryClass::EvenOdd => "III",
                    _ if beta < 1.45 => "I",
                    _ if beta < 2.15 => "II",
                    _ => "III",
                };
                GridSpec::named(name).expect("known set")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct SolveSettings {
    pub solver: SolverOptions,
    pub window: DecayWindow,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub beta: f64,
    pub class: SymmetryClass,
    pub set: String,
    pub l: f64,
    pub n: usize,
    pub eigenvalue: f64,
    pub e_th: f64,
    pub e_ratio: f64,
    /// Continuum class threshold in units of `e_th`.
    pub class_threshold_ratio: f64,
    /// Edge of the discretized continuum in units of `e_th`; boundness is
    /// decided against this.
    pub grid_threshold_ratio: f64,
    pub channel_horizontal: f64,
    pub channel_vertical: f64,
    pub bound: bool,
    pub ell_x: Option<f64>,
    pub ell_y: Option<f64>,
    /// `1/sqrt(threshold - lambda)` for each arm's discrete channel.
    pub ell_x_channel: Option<f64>,
    pub ell_y_channel: Option<f64>,
    pub decay: Option<DecayLengths>,
    pub decay_error: Option<String>,
    pub residual: f64,
    pub iterations: usize,
    pub tol: f64,
    pub seed: u64,
}

/// Everything that determines a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub beta: f64,
    pub class: SymmetryClass,
    pub l: f64,
    pub n: usize,
    pub tol: f64,
    pub seed: u64,
    pub window: DecayWindow,
    /// Solver tuning; only non-default values enter the canonical form.
    pub krylov_dim: Option<usize>,
    pub max_passes: usize,
    pub version: String,
}

impl CellKey {
    pub fn new(class: SymmetryClass, beta: f64, grid: &GridSpec, settings: &SolveSettings) -> Self {
        Self {
            beta,
            class,
            l: grid.l,
            n: grid.n,
            tol: settings.solver.tol,
            seed: settings.solver.seed,
            window: settings.window,
            krylov_dim: settings.solver.krylov_dim,
            max_passes: settings.solver.max_passes,
            version: CODE_VERSION.to_string(),
        }
    }

    /// Filename-safe canonical form; floats use shortest round-trip notation.
    pub fn canonical(&self) -> String {
        let w = &self.window;
        let mut tuning = String::new();
        if let Some(k) = self.krylov_dim {
            tuning.push_str(&format!("_k{k}"));
        }
        if self.max_passes != SolverOptions::default().max_passes {
            tuning.push_str(&format!("_p{}", self.max_passes));
        }
        format!(
            "{}_b{:?}_L{:?}_N{}_t{:e}_s{}_w{:?}-{:?}-{:e}-{}{tuning}_v{}",
            self.class.label(),
            self.beta,
            self.l,
            self.n,
            self.tol,
            self.seed,
            w.offset,
            w.end_fraction,
            w.floor,
            u8::from(w.truncation_correction),
            self.version
        )
    }
}

/// Keyed record persistence used by [`beta_sweep`].
pub trait RecordStore: Sync {
    fn load(&self, key: &CellKey) -> Result<Option<SweepRecord>, String>;
    fn save(&self, key: &CellKey, record: &SweepRecord) -> Result<(), String>;
}

/// Store that never hits.
pub struct NoStore;

impl RecordStore for NoStore {
    fn load(&self, _: &CellKey) -> Result<Option<SweepRecord>, String> {
        Ok(None)
    }
    fn save(&self, _: &CellKey, _: &SweepRecord) -> Result<(), String> {
        Ok(())
    }
}

/// A solved cell with the artefacts needed for exports.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub record: SweepRecord,
    pub problem: CrossProblem,
    pub grid: Grid,
    /// Quarter-domain nodal field of the lowest class state.
    pub field: Field,
}

pub fn solve_cell(
    class: SymmetryClass,
    beta: f64,
    spec: &GridSpec,
    settings: &SolveSettings,
) -> Result<CellSolution, AnalysisError> {
    let problem = CrossProblem::new(beta, class, spec.l, spec.l)?;
    let grid = build_grid(&problem, spec.n, spec.n)?;
    let op = assemble_operator(&grid, &problem);
    let sol = smallest_eigenpairs(op.matrix(), 1, &settings.solver)?;
    let lambda = sol.eigenvalues[0];
    let e_th = continuum_threshold(&problem);
    let channels = grid.channel_thresholds(class, beta);
    let edge = channels.lowest();
    let bound = lambda < edge * (1.0 - 3.0 * settings.solver.tol);
    let field = extract_field(&sol.eigenvectors[0], &op.map, &grid, beta)?;

    let (decay, decay_error) = if bound {
        match decay_lengths(&field, &grid, &problem, &settings.window) {
            Ok(d) => (Some(d), None),
            Err(e) => {
                log::warn!("{class} beta={beta}: {e}");
                (None, Some(e.to_string()))
            }
        }
    } else {
        (None, None)
    };
    let record = SweepRecord {
        beta,
        class,
        set: spec.label.clone(),
        l: spec.l,
        n: spec.n,
        eigenvalue: lambda,
        e_th,
        e_ratio: lambda / e_th,
        class_threshold_ratio: class_threshold_ratio(class, beta)?,
        grid_threshold_ratio: edge / e_th,
        channel_horizontal: channels.horizontal,
        channel_vertical: channels.vertical,
        bound,
        ell_x: decay.as_ref().map(|d| d.ell_x),
        ell_y: decay.as_ref().map(|d| d.ell_y),
        ell_x_channel: channel_decay_length(channels.horizontal, lambda).filter(|_| bound),
        ell_y_channel: channel_decay_length(channels.vertical, lambda).filter(|_| bound),
        decay,
        decay_error,
        residual: sol.residuals[0],
        iterations: sol.iterations,
        tol: sol.tol,
        seed: sol.seed,
    };
    Ok(CellSolution {
        record,
        problem,
        grid,
        field,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub beta: f64,
    pub set: String,
    pub result: Result<SweepRecord, AnalysisError>,
    pub cached: bool,
}

/// One cell per beta, solved in parallel. Cells already in `store` are not
/// recomputed; a failing cell does not abort the others.
pub fn beta_sweep(
    class: SymmetryClass,
    betas: &[f64],
    policy: &GridPolicy,
    settings: &SolveSettings,
    store: &dyn RecordStore,
) -> Result<Vec<SweepCell>, AnalysisError> {
    if betas.iter().any(|b| !(b.is_finite() && *b >= 1.0)) {
        return Err(AnalysisError::InvalidSweep("betas must be finite and >= 1".into()));
    }
    if betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::InvalidSweep("betas must be strictly ascending".into()));
    }
    Ok(betas
        .par_iter()
        .map(|&beta| {
            let spec = policy.grid_for(class, beta);
            let key = CellKey::new(class, beta, &spec, settings);
            let (result, cached) = match store.load(&key) {
                Ok(Some(r)) => (Ok(r), true),
                Ok(None) => {
                    let r = solve_cell(class, beta, &spec, settings).map(|c| c.record);
                    let r = match r {
                        Ok(rec) => store.save(&key, &rec).map(|_| rec).map_err(AnalysisError::Store),
                        Err(e) => Err(e),
                    };
                    (r, false)
                }
                Err(e) => (Err(AnalysisError::Store(e)), false),
            };
            SweepCell {
                beta,
                set: spec.label,
                result,
                cached,
            }
        })
        .collect())
}

/// Lowest class eigenvalue in units of `E_TH` on each grid `N` at fixed `L`.
pub fn grid_sequence(
    class: SymmetryClass,
    beta: f64,
    l: f64,
    ns: &[usize],
    solver: &SolverOptions,
) -> Result<Vec<f64>, AnalysisError> {
    ns.par_iter()
        .map(|&n| {
            let problem = CrossProblem::new(beta, class, l, l)?;
            let grid = build_grid(&problem, n, n)?;
            let op = assemble_operator(&grid, &problem);
            let sol = smallest_eigenpairs(op.matrix(), 1, solver)?;
            Ok(sol.eigenvalues[0] / continuum_threshold(&problem))
        })
        .collect()
}

/// Grid sequence followed by the N → ∞ fit.
pub fn extrapolate(
    class: SymmetryClass,
    beta: f64,
    l: f64,
    ns: &[usize],
    solver: &SolverOptions,
) -> Result<(Vec<f64>, FitResult), AnalysisError> {
    let values = grid_sequence(class, beta, l, ns, solver)?;
    let fit = extrapolate_grid_sequence(&values, ns)?;
    Ok((values, fit))
}

/// Fits `E/E_TH` against beta over the bound records.
pub fn fit_energy_curve(records: &[SweepRecord], model: FitModel) -> Result<FitResult, AnalysisError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records.iter().filter(|r| r.bound).map(|r| (r.beta, r.e_ratio)).unzip();
    Ok(fit(model, &xs, &ys)?)
}
