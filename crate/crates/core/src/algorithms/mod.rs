//! Distributed first-order methods and their hyperparameter schedules.
//!
//! All runners simulate `M` workers inside one process. Worker `m` draws its
//! oracle noise from stream `(seed, m)`; minibatch baselines use streams
//! `(seed, 0..M*K)`. Workers synchronize after local step `t` whenever
//! `(t + 1) % K == 0`, so a run of `T = K * R` steps has exactly `R` rounds.
//! Averages across workers always use [`pairwise_mean`](crate::vector::pairwise_mean)
//! in worker-index order, which makes every result a pure function of its
//! inputs regardless of the thread count.

mod agd;
mod fedac;
mod local_sgd;
mod minibatch;

pub use agd::{agd_run, AgdStepper, AgdTrajectory};
pub use fedac::fedac_run;
pub use local_sgd::fedavg_run;
pub use minibatch::{mb_acsgd_run, mb_sgd_run, Minibatch};

use thiserror::Error;

use crate::objectives::ObjectiveError;
use crate::vector::pairwise_mean;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgoError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("iterate diverged at step {step} on worker {worker}")]
    Diverged { step: usize, worker: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// FedAc hyperparameters `(eta, gamma, alpha, beta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyper {
    pub eta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Hyper {
    pub fn new(eta: f64, gamma: f64, alpha: f64, beta: f64) -> Result<Self, AlgoError> {
        let h = Self {
            eta,
            gamma,
            alpha,
            beta,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), AlgoError> {
        let Self {
            eta,
            gamma,
            alpha,
            beta,
        } = *self;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(AlgoError::InvalidHyper(format!(
                "eta must be positive, got {eta}"
            )));
        }
        if !(gamma >= eta && gamma.is_finite()) {
            return Err(AlgoError::InvalidHyper(format!(
                "need gamma >= eta, got gamma={gamma}, eta={eta}"
            )));
        }
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(AlgoError::InvalidHyper(format!(
                "need alpha >= 1, got {alpha}"
            )));
        }
        if !(beta >= 1.0 && beta.is_finite()) {
            return Err(AlgoError::InvalidHyper(format!(
                "need beta >= 1, got {beta}"
            )));
        }
        Ok(())
    }
}

fn check_schedule_inputs(eta: f64, mu: f64, k: usize) -> Result<(), AlgoError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(AlgoError::InvalidHyper(format!(
            "eta must be positive, got {eta}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(AlgoError::InvalidHyper(format!(
            "strong convexity estimate must be positive, got {mu}"
        )));
    }
    if k == 0 {
        return Err(AlgoError::InvalidHyper(
            "synchronization interval must be >= 1".into(),
        ));
    }
    Ok(())
}

/// Stability-adjusted step: `max(sqrt(eta / (mu K)), eta)`.
fn tradeoff_gamma(eta: f64, mu: f64, k: usize) -> f64 {
    (eta / (mu * k as f64)).sqrt().max(eta)
}

/// FedAc-I: `alpha = 1/(gamma mu)`, `beta = alpha + 1`.
pub fn schedule_fedac1(eta: f64, mu: f64, k: usize) -> Result<Hyper, AlgoError> {
    check_schedule_inputs(eta, mu, k)?;
    let gamma = tradeoff_gamma(eta, mu, k);
    let alpha = 1.0 / (gamma * mu);
    Hyper::new(eta, gamma, alpha, alpha + 1.0)
}

/// FedAc-II: `alpha = 3/(2 gamma mu) - 1/2`, `beta = (2 alpha^2 - 1)/(alpha - 1)`.
///
/// Fails when `alpha <= 1`, i.e. `gamma mu >= 1`, which happens only for
/// step sizes beyond `1/L`.
pub fn schedule_fedac2(eta: f64, mu: f64, k: usize) -> Result<Hyper, AlgoError> {
    check_schedule_inputs(eta, mu, k)?;
    let gamma = tradeoff_gamma(eta, mu, k);
    let alpha = 1.5 / (gamma * mu) - 0.5;
    if alpha <= 1.0 {
        return Err(AlgoError::InvalidHyper(format!(
            "FedAc-II needs gamma*mu < 1 (alpha > 1); got alpha = {alpha}"
        )));
    }
    let beta = (2.0 * alpha * alpha - 1.0) / (alpha - 1.0);
    Hyper::new(eta, gamma, alpha, beta)
}

/// Direct acceleration without the stability trade-off: `gamma = sqrt(eta/mu)`.
pub fn schedule_vanilla(eta: f64, mu: f64) -> Result<Hyper, AlgoError> {
    check_schedule_inputs(eta, mu, 1)?;
    let gamma = (eta / mu).sqrt();
    let alpha = 1.0 / (gamma * mu);
    Hyper::new(eta, gamma, alpha, alpha + 1.0)
}

/// Per-worker iterate pair. Plain SGD methods keep `w_ag` equal to `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerState {
    pub w: Vec<f64>,
    pub w_ag: Vec<f64>,
}

impl WorkerState {
    pub fn at(w0: &[f64]) -> Self {
        Self {
            w: w0.to_vec(),
            w_ag: w0.to_vec(),
        }
    }
}

/// Shape of a simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Number of workers `M`.
    pub workers: usize,
    /// Parallel runtime `T`: gradient queries per worker.
    pub steps: usize,
    /// Synchronization interval `K`.
    pub sync_interval: usize,
    pub seed: u64,
    /// Common starting point; zeros when `None`.
    pub init: Option<Vec<f64>>,
    /// Step workers on the rayon pool. Results are bitwise identical either way.
    pub parallel_workers: bool,
}

impl RunConfig {
    pub fn new(workers: usize, steps: usize, sync_interval: usize, seed: u64) -> Self {
        Self {
            workers,
            steps,
            sync_interval,
            seed,
            init: None,
            parallel_workers: false,
        }
    }

    pub fn with_init(mut self, w0: Vec<f64>) -> Self {
        self.init = Some(w0);
        self
    }

    pub fn with_parallel_workers(mut self, on: bool) -> Self {
        self.parallel_workers = on;
        self
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<Vec<f64>, AlgoError> {
        if self.workers == 0 || self.steps == 0 || self.sync_interval == 0 {
            return Err(AlgoError::InvalidConfig(format!(
                "M, T, K must all be >= 1 (got M={}, T={}, K={})",
                self.workers, self.steps, self.sync_interval
            )));
        }
        match &self.init {
            None => Ok(vec![0.0; dim]),
            Some(w0) if w0.len() != dim => Err(ObjectiveError::DimensionMismatch {
                expected: dim,
                got: w0.len(),
            }
            .into()),
            Some(w0) if !w0.iter().all(|x| x.is_finite()) => Err(ObjectiveError::NonFinite.into()),
            Some(w0) => Ok(w0.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub final_avg_w: Vec<f64>,
    pub final_avg_w_ag: Vec<f64>,
    /// FedAvg only: `sum_t rho_t avg(w_t) / sum_t rho_t` over `t < T`,
    /// `rho_t = (1 - eta mu / 2)^(T - t - 1)`.
    pub weighted_avg_w: Option<Vec<f64>>,
    /// Total stochastic-gradient queries over all workers (`M * T` for
    /// every method, including the minibatch baselines).
    pub gradient_calls: u64,
    /// Parallel runtime `T`.
    pub parallel_steps: usize,
}

/// State passed to run observers.
///
/// `t` is measured in parallel time (gradient queries per worker). Observers
/// fire once at `t = 0` and after every step up to `T`; for minibatch
/// baselines the state at time `t` is the chain after `floor(t / K)` steps.
pub struct Snapshot<'a> {
    pub t: usize,
    pub workers: &'a [WorkerState],
}

impl Snapshot<'_> {
    pub fn avg_w(&self) -> Vec<f64> {
        average(self.workers, |s| &s.w)
    }

    pub fn avg_w_ag(&self) -> Vec<f64> {
        average(self.workers, |s| &s.w_ag)
    }
}

pub(crate) fn average<F>(workers: &[WorkerState], pick: F) -> Vec<f64>
where
    F: Fn(&WorkerState) -> &Vec<f64>,
{
    let mut out = vec![0.0; pick(&workers[0]).len()];
    pairwise_mean(workers.len(), &|i| pick(&workers[i]).as_slice(), &mut out);
    out
}

/// Observer that ignores every snapshot.
pub fn no_observer(_: &Snapshot<'_>) {}
