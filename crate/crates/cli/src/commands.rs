//! Subcommands. Each writes its report to `out` and artifacts to the paths in
//! the configuration.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crossguide_core::analysis::{
    beta_sweep, extrapolate, fit_energy_curve, locate_critical_beta, solve_cell, CellKey, CellSolution, CriticalBeta,
    CriticalMethod, FitModel, NoStore, RecordStore, SweepCell, SweepRecord,
};
use crossguide_core::effective1d::qualitative_predictions;
use crossguide_core::{CrossProblem, SymmetryClass};
use serde::Serialize;

use crate::cache::{ResultCache, CACHE_ENV, DEFAULT_DIR};
use crate::config::{parse_betas, parse_ns, reference_betas, RunConfig};
use crate::output::{sig6, sweep_csv, write_cuts, write_field, write_field_csv};
use crate::CliError;

pub fn open_store(cfg: &RunConfig) -> Result<Box<dyn RecordStore>, CliError> {
    if cfg.no_cache {
        return Ok(Box::new(NoStore));
    }
    let dir = cfg
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DIR));
    Ok(Box::new(ResultCache::open(dir)?))
}

fn store_error(e: String) -> CliError {
    if e.starts_with(crate::cache::INTEGRITY) {
        CliError::Integrity(e)
    } else {
        CliError::Io(std::io::Error::other(format!("cache: {e}")))
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_text(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Class and beta after the `beta < 1` rotation.
fn normalized(cfg: &RunConfig) -> Result<(SymmetryClass, f64), CliError> {
    // The rotation itself is reported by a warning from the core crate.
    let (p, _) = CrossProblem::normalized(cfg.beta()?, cfg.class()?, 1.0, 1.0).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((p.class, p.beta))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_else(|| "null".into())
}

fn summary(r: &SweepRecord) -> String {
    format!(
        "class={} beta={} set={} L={} N={} E_ratio={} ell_x={} ell_y={} bound={}",
        r.class,
        r.beta,
        r.set,
        r.l,
        r.n,
        sig6(r.e_ratio),
        fmt_opt(r.ell_x),
        fmt_opt(r.ell_y),
        r.bound
    )
}

struct Solved {
    record: SweepRecord,
    cell: Option<CellSolution>,
    cached: bool,
}

/// Cached record unless the field itself is needed.
fn solve_one(cfg: &RunConfig, need_field: bool) -> Result<Solved, CliError> {
    let (class, beta) = normalized(cfg)?;
    let settings = cfg.settings();
    let spec = cfg.policy()?.grid_for(class, beta);
    let store = open_store(cfg)?;
    let key = CellKey::new(class, beta, &spec, &settings);
    if !need_field {
        if let Some(record) = store.load(&key).map_err(store_error)? {
            return Ok(Solved {
                record,
                cell: None,
                cached: true,
            });
        }
    }
    let cell = solve_cell(class, beta, &spec, &settings)?;
    store.save(&key, &cell.record).map_err(store_error)?;
    Ok(Solved {
        record: cell.record.clone(),
        cell: Some(cell),
        cached: false,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>.field`, `<prefix>.csv` and `<prefix>.cut` for the
/// unfolded whole-box field.
pub fn export_field(cell: &CellSolution, prefix: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !cell.record.bound {
        return Err(CliError::UnboundExport(format!(
            "class {} at beta {} has E/E_TH = {} above its channel edge",
            cell.record.class,
            cell.record.beta,
            sig6(cell.record.e_ratio)
        )));
    }
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let full = cell.field.unfold(cell.record.class);
    let paths = [".field", ".csv", ".cut"].map(|s| with_suffix(prefix, s));
    write_field(&mut BufWriter::new(fs::File::create(&paths[0])?), cell, &full, "full")?;
    write_field_csv(&mut BufWriter::new(fs::File::create(&paths[1])?), &full)?;
    write_cuts(&mut BufWriter::new(fs::File::create(&paths[2])?), &full)?;
    Ok(paths.to_vec())
}

pub fn cmd_solve(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let s = solve_one(cfg, cfg.out.is_some())?;
    writeln!(out, "{}{}", summary(&s.record), if s.cached { " (cached)" } else { "" })?;
    if let Some(p) = &cfg.json {
        write_json(p, &s.record)?;
    }
    if let (Some(prefix), Some(cell)) = (&cfg.out, &s.cell) {
        for p in export_field(cell, prefix)? {
            writeln!(out, "wrote {}", p.display())?;
        }
    }
    if cfg.require_bound && !s.record.bound {
        return Err(CliError::Unbound(format!(
            "class {} at beta {}: E/E_TH = {} with channel edge {}",
            s.record.class,
            s.record.beta,
            sig6(s.record.e_ratio),
            sig6(s.record.grid_threshold_ratio)
        )));
    }
    Ok(())
}

pub fn cmd_export_field(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let prefix = cfg.out.clone().ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let s = solve_one(cfg, true)?;
    let cell = s.cell.expect("field requested");
    writeln!(out, "{}", summary(&s.record))?;
    for p in export_field(&cell, &prefix)? {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn sweep_cells(cfg: &RunConfig, class: SymmetryClass) -> Result<Vec<SweepCell>, CliError> {
    let betas = match &cfg.betas {
        Some(s) => parse_betas(s, class)?,
        None => reference_betas(class).to_vec(),
    };
    let store = open_store(cfg)?;
    let cells = beta_sweep(class, &betas, &cfg.policy()?, &cfg.settings(), store.as_ref())?;
    for c in &cells {
        if let Err(e) = &c.result {
            eprintln!("warning: {class} beta={}: {e}", c.beta);
        }
    }
    if let Some(first) = cells.iter().find_map(|c| c.result.as_ref().err()) {
        if cells.iter().all(|c| c.result.is_err()) {
            return Err(match first {
                crossguide_core::analysis::AnalysisError::Store(m) => store_error(m.clone()),
                e => e.clone().into(),
            });
        }
    }
    Ok(cells)
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let class = cfg.class()?;
    let cells = sweep_cells(cfg, class)?;
    write_text(cfg.csv.as_deref(), &sweep_csv(&cells), out)?;
    if let Some(p) = &cfg.json {
        write_json(p, &cells)?;
    }
    let cached = cells.iter().filter(|c| c.cached).count();
    eprintln!("{} cells, {} from cache, {} failed", cells.len(), cached, cells.iter().filter(|c| c.result.is_err()).count());
    Ok(())
}

#[derive(Serialize)]
struct ExtrapolationReport {
    class: SymmetryClass,
    beta: f64,
    l: f64,
    ns: Vec<usize>,
    values: Vec<f64>,
    fit: crossguide_core::analysis::FitResult,
}

pub fn cmd_extrapolate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig {
        beta: Some(cfg.beta.unwrap_or(1.0)),
        ..cfg.clone()
    };
    let (class, beta) = normalized(&cfg)?;
    let l = cfg.l.unwrap_or(20.0);
    let ns = parse_ns(cfg.ns.as_deref().unwrap_or("80:880:40"))?;
    let (values, fit) = extrapolate(class, beta, l, &ns, &cfg.settings().solver)?;
    for (n, v) in ns.iter().zip(&values) {
        writeln!(out, "N={n} E_ratio={v:.9}")?;
    }
    writeln!(
        out,
        "a1={} ± {:.2e} gamma={} R2={:.8} model={}",
        sig6(fit.params[0]),
        fit.std_errors[0],
        sig6(*fit.params.last().unwrap()),
        fit.r_squared,
        fit.model.name()
    )?;
    if let Some(p) = &cfg.json {
        write_json(p, &ExtrapolationReport {
            class,
            beta,
            l,
            ns,
            values,
            fit,
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct CriticalReport {
    pub class: SymmetryClass,
    pub pole_fit: Option<CriticalBeta>,
    pub threshold_crossing: Option<CriticalBeta>,
    /// `|a - b| / sqrt(sa² + sb²)`.
    pub separation: Option<f64>,
    pub energy_fit: Option<crossguide_core::analysis::FitResult>,
}

pub fn critical_report(class: SymmetryClass, records: &[SweepRecord]) -> Result<CriticalReport, CliError> {
    let a = locate_critical_beta(class, records, CriticalMethod::PoleFit);
    let b = locate_critical_beta(class, records, CriticalMethod::ThresholdCrossing);
    if let (Err(e), Err(_)) = (&a, &b) {
        return Err(e.clone().into());
    }
    let (a, b) = (a.ok(), b.ok());
    let separation = match (&a, &b) {
        (Some(a), Some(b)) => Some((a.beta_star - b.beta_star).abs() / a.uncertainty.hypot(b.uncertainty)),
        _ => None,
    };
    Ok(CriticalReport {
        class,
        pole_fit: a,
        threshold_crossing: b,
        separation,
        energy_fit: fit_energy_curve(records, FitModel::PowerSeries3).ok(),
    })
}

pub fn cmd_critical(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let class = cfg.class()?;
    let cells = sweep_cells(cfg, class)?;
    let records: Vec<SweepRecord> = cells.into_iter().filter_map(|c| c.result.ok()).collect();
    let report = critical_report(class, &records)?;
    for (name, c) in [("pole-fit", &report.pole_fit), ("threshold-crossing", &report.threshold_crossing)] {
        match c {
            Some(c) => writeln!(out, "{name}: beta*={:.6} ± {:.2e} ({} records)", c.beta_star, c.uncertainty, c.points_used)?,
            None => writeln!(out, "{name}: unavailable")?,
        }
    }
    if let Some(s) = report.separation {
        writeln!(out, "separation={s:.3} combined standard uncertainties")?;
    }
    if let Some(f) = &report.energy_fit {
        writeln!(out, "energy fit extremum beta={}", fmt_opt(f.extremum))?;
    }
    if let Some(p) = &cfg.json {
        write_json(p, &report)?;
    }
    Ok(())
}

pub fn cmd_predict(_cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let word = |b: bool| if b { "bound" } else { "unbound" };
    writeln!(out, "class,symmetric_cross,thin_arm_limit")?;
    for p in qualitative_predictions() {
        writeln!(out, "{},{},{}", p.class, word(p.symmetric), word(p.thin_arm))?;
    }
    Ok(())
}
