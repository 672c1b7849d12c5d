use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use super::output::float_repr;
use super::problem::Problem;
use super::HarnessError;
use crate::algorithms::{
    fedac_run, fedavg_run, mb_acsgd_run, mb_sgd_run, schedule_fedac1, schedule_fedac2,
    schedule_vanilla, AlgoError, RunConfig, Snapshot,
};

/// One suboptimality measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub algorithm: Algorithm,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub eta: f64,
    pub seed: u64,
    pub t: usize,
    #[serde(with = "float_repr")]
    pub suboptimality: f64,
}

/// Tuned result for one `(algorithm, M, K)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub best_eta: f64,
    #[serde(with = "float_repr")]
    pub best_suboptimality: f64,
}

/// Outcome of one `(algorithm, M, K, eta, seed)` run.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRun {
    pub algorithm: Algorithm,
    pub m: usize,
    pub k: usize,
    pub eta: f64,
    pub seed: u64,
    /// Records at `t = 0, eval_every, ..., T`.
    pub records: Vec<EvalRecord>,
    /// FedAvg only: suboptimality of the rho-weighted average at `T`.
    pub weighted_suboptimality: Option<f64>,
    /// Step at which the run diverged; `Some(0)` also covers hyperparameters
    /// the schedule rejects.
    pub diverged_at: Option<usize>,
}

impl CellRun {
    /// Best suboptimality over the evaluation times; `+inf` for a diverged run.
    pub fn best(&self) -> f64 {
        if self.diverged_at.is_some() {
            return f64::INFINITY;
        }
        self.records
            .iter()
            .map(|r| r.suboptimality)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Runs one cell and evaluates it at `t = 0` and every `eval_every` steps.
///
/// Evaluation reads iterates only, so it never perturbs the oracle streams.
/// After a divergence the remaining records are `+inf`.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    problem: &Problem,
    algorithm: Algorithm,
    m: usize,
    k: usize,
    eta: f64,
    seed: u64,
    t: usize,
    eval_every: usize,
    parallel_workers: bool,
) -> Result<CellRun, HarnessError> {
    if eval_every == 0 || t % eval_every != 0 {
        return Err(HarnessError::Config(format!(
            "eval_every={eval_every} must divide T={t}"
        )));
    }
    let obj = &problem.objective;
    let f_star = problem.optimum.f_star;
    let mu = obj.mu_est();
    let mut cfg = RunConfig::new(m, t, k, seed).with_parallel_workers(parallel_workers);
    if let Some(w0) = &problem.init {
        cfg = cfg.with_init(w0.clone());
    }
    let mut values: Vec<f64> = Vec::with_capacity(t / eval_every + 1);
    let use_ag = !matches!(algorithm, Algorithm::Fedavg | Algorithm::MbSgd);
    let mut observer = |s: &Snapshot<'_>| {
        if s.t % eval_every == 0 {
            let p = if use_ag { s.avg_w_ag() } else { s.avg_w() };
            values.push(obj.eval_unchecked(&p) - f_star);
        }
    };

    let schedule = match algorithm {
        Algorithm::Fedac1 => Some(schedule_fedac1(eta, mu, k)),
        Algorithm::Fedac2 => Some(schedule_fedac2(eta, mu, k)),
        Algorithm::FedacVanilla => Some(schedule_vanilla(eta, mu)),
        _ => None,
    };
    // A schedule that cannot produce valid (alpha, beta) at this eta is
    // scored like a divergence.
    let rejected = matches!(schedule, Some(Err(AlgoError::InvalidHyper(_))));
    let outcome = match schedule {
        Some(Err(AlgoError::InvalidHyper(_))) => Err(AlgoError::Diverged { step: 0, worker: 0 }),
        Some(Err(e)) => Err(e),
        Some(Ok(h)) => fedac_run(obj, &cfg, &h, &mut observer),
        None => match algorithm {
            Algorithm::Fedavg => fedavg_run(obj, &cfg, eta, mu, &mut observer),
            Algorithm::MbSgd => mb_sgd_run(obj, &cfg, eta, &mut observer),
            Algorithm::MbAcsgd => mb_acsgd_run(obj, &cfg, eta, mu, &mut observer),
            _ => unreachable!("accelerated variants carry a schedule"),
        },
    };
    let (weighted_suboptimality, diverged_at) = match outcome {
        Ok(r) => (
            r.weighted_avg_w.map(|w| obj.eval_unchecked(&w) - f_star),
            None,
        ),
        Err(AlgoError::Diverged { step, .. }) => (None, Some(step)),
        Err(e) => return Err(e.into()),
    };
    if rejected {
        values.clear();
    }
    values.resize(t / eval_every + 1, f64::INFINITY);
    let records = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| EvalRecord {
            algorithm,
            m,
            k,
            eta,
            seed,
            t: i * eval_every,
            suboptimality: if v.is_nan() { f64::INFINITY } else { v },
        })
        .collect();
    Ok(CellRun {
        algorithm,
        m,
        k,
        eta,
        seed,
        records,
        weighted_suboptimality,
        diverged_at,
    })
}

/// Median; the mean of the two middle values for an even count.
pub fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Every run, ordered by algorithm, M, K, eta, seed as configured.
    pub runs: Vec<CellRun>,
}

impl SweepOutput {
    pub fn records(&self) -> Vec<EvalRecord> {
        self.runs
            .iter()
            .flat_map(|r| r.records.iter().cloned())
            .collect()
    }
}

/// For every `(algorithm, M, K)`: run every eta and seed, take each seed's
/// best suboptimality over time, the median over seeds, and keep the eta with
/// the smallest median (ties go to the smaller eta). A row whose every eta
/// diverged reports `+inf` at the smallest eta.
///
/// Cells run on a pool of `cfg.threads` threads; results do not depend on it.
pub fn tune_and_sweep(
    problem: &Problem,
    cfg: &ExperimentConfig,
) -> Result<SweepOutput, HarnessError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &a in &cfg.algorithms {
        for &m in &cfg.ms {
            for &k in &cfg.ks {
                for &eta in &cfg.etas {
                    for &seed in &cfg.seeds {
                        cells.push((a, m, k, eta, seed));
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start thread pool: {e}")))?;
    let runs: Vec<CellRun> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, m, k, eta, seed)| {
                run_experiment(problem, a, m, k, eta, seed, cfg.t, cfg.eval_every, false)
            })
            .collect::<Result<_, _>>()
    })?;

    let per_group = cfg.etas.len() * cfg.seeds.len();
    let rows = runs
        .chunks(per_group)
        .map(|group| {
            let first = &group[0];
            let mut best: Option<(f64, f64)> = None;
            for per_eta in group.chunks(cfg.seeds.len()) {
                let eta = per_eta[0].eta;
                let bests: Vec<f64> = per_eta.iter().map(CellRun::best).collect();
                let med = median(&bests);
                let better = match best {
                    None => true,
                    Some((e, b)) => med < b || (med == b && eta < e),
                };
                if better {
                    best = Some((eta, med));
                }
            }
            let (best_eta, best_suboptimality) = best.expect("eta grid is nonempty");
            SweepRow {
                algorithm: first.algorithm,
                m: first.m,
                k: first.k,
                best_eta,
                best_suboptimality,
            }
        })
        .collect();
    Ok(SweepOutput { rows, runs })
}
