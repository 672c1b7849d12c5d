use super::{fedac_run, fedavg_run, schedule_vanilla, AlgoError, RunConfig, RunResult, Snapshot};
use crate::objectives::GradientOracle;
use crate::rng::RngStream;
use crate::vector::pairwise_mean;

/// Averages `batch` independent queries of an inner oracle.
///
/// Query `i` reads the inner oracle's streams `i * p .. (i + 1) * p`, where
/// `p` is the inner `streams_per_query`; the mean uses the canonical pairwise
/// reduction.
pub struct Minibatch<'a, O: ?Sized> {
    inner: &'a O,
    batch: usize,
}

impl<'a, O: GradientOracle + ?Sized> Minibatch<'a, O> {
    pub fn new(inner: &'a O, batch: usize) -> Result<Self, AlgoError> {
        if batch == 0 {
            return Err(AlgoError::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(Self { inner, batch })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl<O: GradientOracle + ?Sized> GradientOracle for Minibatch<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn streams_per_query(&self) -> usize {
        self.batch * self.inner.streams_per_query()
    }

    fn sample_into(&self, w: &[f64], streams: &mut [RngStream], out: &mut [f64]) {
        let d = self.inner.dim();
        let p = self.inner.streams_per_query();
        let mut buf = vec![0.0; self.batch * d];
        for (g, s) in buf.chunks_exact_mut(d).zip(streams.chunks_exact_mut(p)) {
            self.inner.sample_into(w, s, g);
        }
        pairwise_mean(self.batch, &|i| &buf[i * d..(i + 1) * d], out);
    }
}

fn rounds(cfg: &RunConfig) -> Result<usize, AlgoError> {
    let k = cfg.sync_interval;
    if k == 0 || cfg.steps == 0 || cfg.workers == 0 {
        return Err(AlgoError::InvalidConfig(format!(
            "M, T, K must all be >= 1 (got M={}, T={}, K={})",
            cfg.workers, cfg.steps, k
        )));
    }
    if cfg.steps % k != 0 {
        return Err(AlgoError::InvalidConfig(format!(
            "K={k} must divide T={}",
            cfg.steps
        )));
    }
    Ok(cfg.steps / k)
}

/// Re-emits a chain snapshot at step `r` for parallel times `rK .. rK + K - 1`
/// (only `T` for the last one).
fn stretched<'o>(
    k: usize,
    total: usize,
    observer: &'o mut dyn FnMut(&Snapshot<'_>),
) -> impl FnMut(&Snapshot<'_>) + 'o {
    move |s: &Snapshot<'_>| {
        let base = s.t * k;
        for t in base..(base + k).min(total + 1) {
            observer(&Snapshot {
                t,
                workers: s.workers,
            });
        }
    }
}

/// Minibatch SGD: `T/K` steps, each averaging `M*K` stochastic gradients.
///
/// Implemented as FedAvg over `M*K` workers synchronizing every step, so with
/// `K = 1` it coincides bitwise with [`fedavg_run`] at `K = 1`. Gradient `i`
/// of every step comes from stream `(seed, i)`.
pub fn mb_sgd_run<O>(
    oracle: &O,
    cfg: &RunConfig,
    eta: f64,
    observer: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<RunResult, AlgoError>
where
    O: GradientOracle + ?Sized,
{
    let r = rounds(cfg)?;
    let inner = RunConfig {
        workers: cfg.workers * cfg.sync_interval,
        steps: r,
        sync_interval: 1,
        ..cfg.clone()
    };
    let mut obs = stretched(cfg.sync_interval, cfg.steps, observer);
    let mut res = fedavg_run(oracle, &inner, eta, 0.0, &mut obs)
        .map_err(|e| rescale(e, cfg.sync_interval))?;
    res.weighted_avg_w = None;
    res.parallel_steps = cfg.steps;
    Ok(res)
}

/// Accelerated minibatch SGD: one accelerated chain with the vanilla schedule
/// `schedule_vanilla(eta, mu)`, `T/K` steps at batch `M*K`.
pub fn mb_acsgd_run<O>(
    oracle: &O,
    cfg: &RunConfig,
    eta: f64,
    mu: f64,
    observer: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<RunResult, AlgoError>
where
    O: GradientOracle + ?Sized,
{
    let r = rounds(cfg)?;
    let hyper = schedule_vanilla(eta, mu)?;
    let batched = Minibatch::new(oracle, cfg.workers * cfg.sync_interval)?;
    let inner = RunConfig {
        workers: 1,
        steps: r,
        sync_interval: 1,
        ..cfg.clone()
    };
    let mut obs = stretched(cfg.sync_interval, cfg.steps, observer);
    let mut res =
        fedac_run(&batched, &inner, &hyper, &mut obs).map_err(|e| rescale(e, cfg.sync_interval))?;
    res.parallel_steps = cfg.steps;
    Ok(res)
}

/// Reports divergence in parallel time: chain step `r` ends at `rK + K - 1`.
fn rescale(e: AlgoError, k: usize) -> AlgoError {
    match e {
        AlgoError::Diverged { step, .. } => AlgoError::Diverged {
            step: step * k + k - 1,
            worker: 0,
        },
        other => other,
    }
}
