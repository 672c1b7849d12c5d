//! The `fedac` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O
//! error, 3 numerical failure (divergence, optimum not reached, violated
//! bound), 4 verification failure. Errors go to stderr as one line,
//! `error: <kind>: <detail>`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{CommandFactory, Parser, Subcommand};
use thiserror::Error;

use crate::algorithms::AlgoError;
use crate::dataio::{dataset_stats, load_libsvm, DataError};
use crate::diagnostics::{
    construct_instability_objective, instability_experiment, norm_bound_sweep, DiagError,
};
use crate::harness::{
    load_config, prepare_problem, resolve_out_dir, run_experiment, tune_and_sweep, write_json,
    write_records_csv, write_rows_csv, Algorithm, HarnessError,
};
use crate::objectives::ObjectiveError;

#[derive(Debug, Parser)]
#[command(
    name = "fedac",
    version,
    about = "Federated accelerated SGD simulator and diagnostics"
)]
pub struct Cli {
    /// Worker threads for sweeps and parallel worker updates
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    /// Suppress timing lines so repeated runs print identical output
    #[arg(long, global = true)]
    pub deterministic_output: bool,
    /// Output directory (overrides FEDAC_OUT_DIR and the config file)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a LibSVM file and print its statistics
    CheckData {
        path: PathBuf,
        /// Declared feature dimension
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Run a single (algorithm, M, K, eta, seed) cell and write its records
    Run {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Defaults to the first configured algorithm
        #[arg(long)]
        algorithm: Option<Algorithm>,
        /// Workers; defaults to the first configured M
        #[arg(long = "M", value_name = "M")]
        m: Option<usize>,
        /// Synchronization interval; defaults to the first configured K
        #[arg(long = "K", value_name = "K")]
        k: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Parallel runtime
        #[arg(long = "T", value_name = "T")]
        t: Option<usize>,
        #[arg(long)]
        eval_every: Option<usize>,
    },
    /// Tune eta for every (algorithm, M, K) and write the sweep table
    Sweep {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Reproduce the AGD initial-value instability on a constructed objective
    Instability {
        /// Condition number L/mu (mu = 1), at least 25
        #[arg(long, default_value_t = 25.0)]
        kappa: f64,
        /// Number of 3-step blocks
        #[arg(long = "K", value_name = "K", default_value_t = 4)]
        k: usize,
        /// Initial perturbation, relative to the start point
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
        /// Geometric shrink factor for the bump widths
        #[arg(long, default_value_t = 0.5)]
        eps_shrink: f64,
    },
    /// Compare transformed norms of the transfer matrices with their bounds
    NormBounds {
        #[arg(long, default_value_t = 0.01)]
        mu: f64,
        #[arg(long = "L", value_name = "L", default_value_t = 1.0)]
        l: f64,
        /// Curvature samples per (gamma, eta) pair
        #[arg(long, default_value_t = 21)]
        samples: usize,
        /// Grid points per axis for eta and gamma
        #[arg(long, default_value_t = 5)]
        grid: usize,
    },
    /// Run the invariant suite
    Verify,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("io: {0}")]
    Io(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("verify: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verify(_) => 4,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let msg = e.to_string();
        match e {
            HarnessError::Config(_) => CliError::Config(msg),
            HarnessError::Data(_) => CliError::Data(msg),
            HarnessError::Io { .. } | HarnessError::Format { .. } => CliError::Io(msg),
            HarnessError::Objective(ObjectiveError::InvalidParameter(_))
            | HarnessError::Algo(AlgoError::InvalidConfig(_) | AlgoError::InvalidHyper(_)) => {
                CliError::Config(msg)
            }
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<DiagError> for CliError {
    fn from(e: DiagError) -> Self {
        match e {
            DiagError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    threads: usize,
    deterministic: bool,
    out_dir: Option<PathBuf>,
    started: Instant,
}

impl Ctx<'_> {
    fn timing(&mut self, what: &str) -> std::io::Result<()> {
        if self.deterministic {
            return Ok(());
        }
        writeln!(
            self.out,
            "{what} took {:.2}s",
            self.started.elapsed().as_secs_f64()
        )
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Normal output goes to `out`, errors to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(err, "{}", Cli::command().render_help());
                    let _ = writeln!(err, "error: usage: missing subcommand");
                    1
                }
                _ => {
                    let first = e.to_string();
                    let line = first
                        .lines()
                        .next()
                        .unwrap_or_default()
                        .trim_start_matches("error: ");
                    let _ = writeln!(err, "error: usage: {line}");
                    1
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error: {line}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut ctx = Ctx {
        out,
        threads: cli.threads as usize,
        deterministic: cli.deterministic_output,
        out_dir: cli.out,
        started: Instant::now(),
    };
    match cli.command {
        Command::CheckData { path, dim } => check_data(&mut ctx, &path, dim),
        Command::Run {
            config,
            algorithm,
            m,
            k,
            eta,
            seed,
            t,
            eval_every,
        } => {
            let overrides = RunOverrides {
                algorithm,
                m,
                k,
                eta,
                seed,
                t,
                eval_every,
            };
            run(&mut ctx, &config, overrides)
        }
        Command::Sweep { config } => sweep(&mut ctx, &config),
        Command::Instability {
            kappa,
            k,
            eps,
            eps_shrink,
        } => instability(&mut ctx, kappa, k, eps, eps_shrink),
        Command::NormBounds {
            mu,
            l,
            samples,
            grid,
        } => norm_bounds(&mut ctx, mu, l, samples, grid),
        Command::Verify => verify(&mut ctx),
    }
}

fn check_data(ctx: &mut Ctx<'_>, path: &Path, dim: Option<usize>) -> Result<(), CliError> {
    let ds = load_libsvm(path, dim)?;
    writeln!(ctx.out, "{}", dataset_stats(&ds))?;
    writeln!(ctx.out, "nnz={} sha256={}", ds.nnz(), ds.fingerprint())?;
    ctx.timing("check-data")?;
    Ok(())
}

struct RunOverrides {
    algorithm: Option<Algorithm>,
    m: Option<usize>,
    k: Option<usize>,
    eta: Option<f64>,
    seed: Option<u64>,
    t: Option<usize>,
    eval_every: Option<usize>,
}

fn run(ctx: &mut Ctx<'_>, config: &Path, o: RunOverrides) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(t) = o.t {
        cfg.t = t;
        cfg.eval_every = o.eval_every.unwrap_or(t);
    }
    if let Some(e) = o.eval_every {
        cfg.eval_every = e;
    }
    let algorithm = o.algorithm.unwrap_or(cfg.algorithms[0]);
    let m = o.m.unwrap_or(cfg.ms[0]);
    let k = o.k.unwrap_or(cfg.ks[0]);
    let eta = o.eta.unwrap_or(cfg.etas[0]);
    let seed = o.seed.unwrap_or(cfg.seeds[0]);
    if k == 0 || cfg.t % k != 0 {
        return Err(CliError::Config(format!("K={k} must divide T={}", cfg.t)));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(CliError::Config(format!("eta must be positive, got {eta}")));
    }
    let dir = resolve_out_dir(ctx.out_dir.as_deref(), Some(&cfg));
    let problem = prepare_problem(&cfg, Some(&dir))?;
    let pool = thread_pool(ctx.threads)?;
    let parallel = ctx.threads > 1;
    let cell = pool.install(|| {
        run_experiment(
            &problem,
            algorithm,
            m,
            k,
            eta,
            seed,
            cfg.t,
            cfg.eval_every,
            parallel,
        )
    })?;
    write_records_csv(&dir.join("records.csv"), &cell.records)?;
    write_json(&dir.join("records.json"), &cell.records)?;

    writeln!(
        ctx.out,
        "{algorithm} M={m} K={k} eta={eta} seed={seed} T={} f_star={:e}",
        cfg.t, problem.optimum.f_star
    )?;
    writeln!(ctx.out, "{:>8}  {}", "t", "suboptimality")?;
    for r in &cell.records {
        writeln!(ctx.out, "{:>8}  {:e}", r.t, r.suboptimality)?;
    }
    if let Some(w) = cell.weighted_suboptimality {
        writeln!(ctx.out, "weighted average suboptimality {w:e}")?;
    }
    writeln!(ctx.out, "wrote {}", dir.join("records.csv").display())?;
    ctx.timing("run")?;
    match cell.diverged_at {
        Some(step) => Err(CliError::Numerical(format!(
            "{algorithm} diverged at step {step}"
        ))),
        None => Ok(()),
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start thread pool: {e}")))
}

fn sweep(ctx: &mut Ctx<'_>, config: &Path) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    cfg.threads = ctx.threads;
    let dir = resolve_out_dir(ctx.out_dir.as_deref(), Some(&cfg));
    let problem = prepare_problem(&cfg, Some(&dir))?;
    let result = tune_and_sweep(&problem, &cfg)?;
    write_rows_csv(&dir.join("sweep.csv"), &result.rows)?;
    write_json(&dir.join("sweep.json"), &result.rows)?;
    write_records_csv(&dir.join("records.csv"), &result.records())?;

    writeln!(
        ctx.out,
        "f_star={:e} cells={}",
        problem.optimum.f_star,
        result.runs.len()
    )?;
    writeln!(
        ctx.out,
        "{:<14} {:>6} {:>6} {:>10} {:>14}",
        "algorithm", "M", "K", "best_eta", "best_subopt"
    )?;
    for r in &result.rows {
        writeln!(
            ctx.out,
            "{:<14} {:>6} {:>6} {:>10} {:>14.6e}",
            r.algorithm.as_str(),
            r.m,
            r.k,
            r.best_eta,
            r.best_suboptimality
        )?;
    }
    writeln!(ctx.out, "wrote {}", dir.join("sweep.csv").display())?;
    ctx.timing("sweep")?;
    Ok(())
}

fn instability(
    ctx: &mut Ctx<'_>,
    kappa: f64,
    k: usize,
    eps: f64,
    eps_shrink: f64,
) -> Result<(), CliError> {
    let (mu, l) = (1.0, kappa);
    let c = construct_instability_objective(l, mu, k, eps_shrink)?;
    let eps_abs = eps * c.w0.abs().max(c.w0_ag.abs());
    let r = instability_experiment(&c.objective, c.w0, c.w0_ag, l, mu, eps_abs, k)?;
    writeln!(
        ctx.out,
        "kappa={kappa} K={k} eps={eps_abs:e} delta={:e} expected ratio={:.9}",
        c.delta, r.block_factor
    )?;
    writeln!(
        ctx.out,
        "{:>5} {:>12} {:>14} {:>14} {:>10}",
        "block", "ratio", "|dw_ag|", "|dw|", "proj_err"
    )?;
    for (i, ratio) in r.ratios.iter().enumerate() {
        let g = r.gaps[i + 1];
        writeln!(
            ctx.out,
            "{:>5} {:>12.9} {:>14.6e} {:>14.6e} {:>10.2e}",
            i + 1,
            ratio,
            g[0].abs(),
            g[1].abs(),
            r.projector_rel_err[i]
        )?;
    }
    let bound = 0.5 * eps_abs * 1.02f64.powi(k as i32);
    writeln!(
        ctx.out,
        "final |dw|={:e} >= 0.5 eps 1.02^K = {bound:e}: {}",
        r.final_gap_w,
        r.final_gap_w >= bound
    )?;
    ctx.timing("instability")?;
    Ok(())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![hi];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .map(|x| x.clamp(lo, hi))
        .collect()
}

fn norm_bounds(
    ctx: &mut Ctx<'_>,
    mu: f64,
    l: f64,
    samples: usize,
    grid: usize,
) -> Result<(), CliError> {
    if !(mu > 0.0 && l >= mu && l.is_finite()) {
        return Err(CliError::Usage(format!(
            "need 0 < mu <= L, got mu={mu} L={l}"
        )));
    }
    if grid == 0 {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }
    let mut pairs = Vec::new();
    for eta in log_grid(1e-3 / l, 1.0 / l, grid) {
        for gamma in log_grid(eta, (eta / mu).sqrt().max(eta), grid) {
            pairs.push((gamma, eta));
        }
    }
    let report = norm_bound_sweep(mu, l, &pairs, samples)?;
    writeln!(ctx.out, "mu={mu} L={l} H samples={samples}")?;
    writeln!(
        ctx.out,
        "{:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "eta", "gamma", "fedac1", "bound1", "fedac2", "bound2"
    )?;
    for r in &report.rows {
        writeln!(
            ctx.out,
            "{:>11.4e} {:>11.4e} {:>11.6} {:>11.6} {:>11.6} {:>11.6}",
            r.eta, r.gamma, r.fedac1_max, r.fedac1_bound, r.fedac2_max, r.fedac2_bound
        )?;
    }
    writeln!(ctx.out, "violations={}", report.violations)?;
    ctx.timing("norm-bounds")?;
    if report.violations > 0 {
        return Err(CliError::Numerical(format!(
            "{} norm-bound violations",
            report.violations
        )));
    }
    Ok(())
}

fn verify(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let checks = crate::verify::run_all();
    for c in &checks {
        writeln!(ctx.out, "{c}")?;
    }
    ctx.timing("verify")?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(format!("failed: {}", failed.join(", "))))
    }
}
