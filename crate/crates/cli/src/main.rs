use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crossguide::commands;
use crossguide::config::{ConfigBuilder, RunConfig};
use crossguide::CliError;
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "crossguide", version, about = "Bound states of crossed waveguides of unequal width")]
struct Cli {
    /// Configuration file: `key = value` lines or a JSON object.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `-o tol=1e-10`.
    #[arg(short = 'o', long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Cache directory.
    #[arg(long, global = true, env = "CROSSGUIDE_CACHE")]
    cache_dir: Option<PathBuf>,
    /// Neither read nor write the cache.
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// Symmetry class: ee, oe, eo or oo.
    #[arg(long)]
    class: Option<String>,
    /// Named grid set I, II or III.
    #[arg(long)]
    set: Option<String>,
    /// Truncation half-length.
    #[arg(long)]
    l: Option<f64>,
    /// Grid size.
    #[arg(long)]
    n: Option<usize>,
    /// Relative eigenpair residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Start-vector seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Full-precision JSON output.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lowest state of one class at one width ratio.
    Solve {
        #[command(flatten)]
        grid: GridArgs,
        /// Width ratio; values below 1 are rotated.
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
        /// Exit with status 5 when the state is not bound.
        #[arg(long)]
        require_bound: bool,
        /// Also export the field to `<OUT>.field`, `<OUT>.csv`, `<OUT>.cut`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One record per width ratio, as CSV.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        /// `a,b,c`, `a:b:step`, or `a:b` for the reference ratios in range.
        #[arg(long)]
        betas: Option<String>,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Grid-size sequence at fixed box and its continuum-limit fit.
    Extrapolate {
        #[command(flatten)]
        grid: GridArgs,
        /// Width ratio.
        #[arg(long)]
        beta: Option<f64>,
        /// Grid sizes, `a:b:step` or a list.
        #[arg(long = "ns", alias = "Ns")]
        ns: Option<String>,
    },
    /// Critical width ratio by pole fit and by threshold crossing.
    Critical {
        #[command(flatten)]
        grid: GridArgs,
        /// Records to fit; the class reference ratios when omitted.
        #[arg(long)]
        betas: Option<String>,
    },
    /// Boundness expected from the one-dimensional reduction.
    Predict,
    /// Field and cut files of a bound state.
    ExportField {
        #[command(flatten)]
        grid: GridArgs,
        /// Width ratio.
        #[arg(long)]
        beta: Option<f64>,
        /// Output prefix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn s(v: &Option<String>) -> Option<Value> {
    v.clone().map(Value::String)
}

fn p(v: &Option<PathBuf>) -> Option<Value> {
    v.as_ref().map(|p| Value::String(p.to_string_lossy().into_owned()))
}

fn f(v: Option<f64>) -> Option<Value> {
    v.map(Value::from)
}

fn flag(v: bool) -> Option<Value> {
    v.then_some(Value::Bool(true))
}

fn grid_layers(b: ConfigBuilder, g: &GridArgs) -> ConfigBuilder {
    b.value("class", s(&g.class))
        .value("set", s(&g.set))
        .value("l", f(g.l))
        .value("n", g.n.map(Value::from))
        .value("tol", f(g.tol))
        .value("seed", g.seed.map(Value::from))
        .value("json", p(&g.json))
}

fn configure(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut b = ConfigBuilder::default();
    if let Some(path) = &cli.config {
        b = b.file(path)?;
    }
    b = b.overrides(cli.overrides.iter().map(String::as_str))?;
    b = b.value("cache_dir", p(&cli.cache_dir)).value("no_cache", flag(cli.no_cache));
    b = match &cli.command {
        Command::Solve {
            grid,
            beta,
            require_bound,
            out,
        } => grid_layers(b, grid)
            .value("beta", f(*beta))
            .value("require_bound", flag(*require_bound))
            .value("out", p(out)),
        Command::Sweep { grid, betas, csv } => grid_layers(b, grid).value("betas", s(betas)).value("csv", p(csv)),
        Command::Extrapolate { grid, beta, ns } => grid_layers(b, grid).value("beta", f(*beta)).value("ns", s(ns)),
        Command::Critical { grid, betas } => grid_layers(b, grid).value("betas", s(betas)),
        Command::Predict => b,
        Command::ExportField { grid, beta, out } => grid_layers(b, grid).value("beta", f(*beta)).value("out", p(out)),
    };
    b.build()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = configure(cli)?;
    log::debug!("configuration: {}", serde_json::to_string(&cfg)?);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let r = match cli.command {
        Command::Solve { .. } => commands::cmd_solve(&cfg, &mut out),
        Command::Sweep { .. } => commands::cmd_sweep(&cfg, &mut out),
        Command::Extrapolate { .. } => commands::cmd_extrapolate(&cfg, &mut out),
        Command::Critical { .. } => commands::cmd_critical(&cfg, &mut out),
        Command::Predict => commands::cmd_predict(&cfg, &mut out),
        Command::ExportField { .. } => commands::cmd_export_field(&cfg, &mut out),
    };
    out.flush()?;
    r
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
