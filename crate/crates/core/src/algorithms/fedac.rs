use rayon::prelude::*;

use super::{average, AlgoError, Hyper, RunConfig, RunResult, Snapshot, WorkerState};
use crate::objectives::GradientOracle;
use crate::rng::RngStream;
use crate::vector::all_finite;

/// Per-worker scratch: oracle streams plus the `w_md` and gradient buffers.
pub(crate) struct Scratch {
    pub(crate) streams: Vec<RngStream>,
    pub(crate) md: Vec<f64>,
    pub(crate) g: Vec<f64>,
}

impl Scratch {
    pub(crate) fn for_workers(m: usize, per: usize, seed: u64, dim: usize) -> Vec<Self> {
        (0..m)
            .map(|i| Self {
                streams: (0..per)
                    .map(|j| RngStream::new(seed, (i * per + j) as u64))
                    .collect(),
                md: vec![0.0; dim],
                g: vec![0.0; dim],
            })
            .collect()
    }
}

/// Runs `step` on every worker, in parallel when asked, and returns the lowest
/// worker index whose state went non-finite.
pub(crate) fn step_all<F>(
    states: &mut [WorkerState],
    scratch: &mut [Scratch],
    parallel: bool,
    step: F,
) -> Option<usize>
where
    F: Fn(&mut WorkerState, &mut Scratch) -> bool + Sync,
{
    let ok: Vec<bool> = if parallel {
        states
            .par_iter_mut()
            .zip(scratch.par_iter_mut())
            .map(|(s, x)| step(s, x))
            .collect()
    } else {
        states
            .iter_mut()
            .zip(scratch.iter_mut())
            .map(|(s, x)| step(s, x))
            .collect()
    };
    ok.iter().position(|f| !f)
}

/// Averages `w` and `w_ag` over workers and broadcasts the result.
pub(crate) fn synchronize(states: &mut [WorkerState]) {
    let w_bar = average(states, |s| &s.w);
    let w_ag_bar = average(states, |s| &s.w_ag);
    for s in states.iter_mut() {
        s.w.copy_from_slice(&w_bar);
        s.w_ag.copy_from_slice(&w_ag_bar);
    }
}

fn accelerated_step<O: GradientOracle + ?Sized>(
    st: &mut WorkerState,
    x: &mut Scratch,
    oracle: &O,
    h: &Coeffs,
) -> bool {
    let WorkerState { w, w_ag } = st;
    for ((md, a), b) in x.md.iter_mut().zip(w.iter()).zip(w_ag.iter()) {
        *md = h.inv_beta * a + h.one_minus_inv_beta * b;
    }
    oracle.sample_into(&x.md, &mut x.streams, &mut x.g);
    for (((a, b), md), g) in w.iter_mut().zip(w_ag.iter_mut()).zip(&x.md).zip(&x.g) {
        *b = md - h.eta * g;
        *a = h.one_minus_inv_alpha * *a + h.inv_alpha * md - h.gamma * g;
    }
    all_finite(w) && all_finite(w_ag)
}

struct Coeffs {
    eta: f64,
    gamma: f64,
    inv_alpha: f64,
    one_minus_inv_alpha: f64,
    inv_beta: f64,
    one_minus_inv_beta: f64,
}

impl Coeffs {
    fn from(h: &Hyper) -> Self {
        let inv_alpha = 1.0 / h.alpha;
        let inv_beta = 1.0 / h.beta;
        Self {
            eta: h.eta,
            gamma: h.gamma,
            inv_alpha,
            one_minus_inv_alpha: 1.0 - inv_alpha,
            inv_beta,
            one_minus_inv_beta: 1.0 - inv_beta,
        }
    }
}

/// Federated accelerated SGD.
///
/// Each worker keeps `(w, w_ag)` and per step computes
///
/// ```text
/// w_md  = w / beta + (1 - 1/beta) w_ag
/// g     = oracle(w_md)
/// w_ag' = w_md - eta g
/// w'    = (1 - 1/alpha) w + w_md / alpha - gamma g
/// ```
///
/// After step `t` with `(t + 1) % K == 0` both sequences are averaged over
/// workers and broadcast. A non-finite iterate aborts with the step index and
/// the lowest offending worker.
pub fn fedac_run<O>(
    oracle: &O,
    cfg: &RunConfig,
    hyper: &Hyper,
    observer: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<RunResult, AlgoError>
where
    O: GradientOracle + ?Sized,
{
    hyper.validate()?;
    let w0 = cfg.validate(oracle.dim())?;
    let per = oracle.streams_per_query();
    let mut states = vec![WorkerState::at(&w0); cfg.workers];
    let mut scratch = Scratch::for_workers(cfg.workers, per, cfg.seed, w0.len());
    let coeffs = Coeffs::from(hyper);

    observer(&Snapshot {
        t: 0,
        workers: &states,
    });
    for t in 0..cfg.steps {
        let bad = step_all(&mut states, &mut scratch, cfg.parallel_workers, |s, x| {
            accelerated_step(s, x, oracle, &coeffs)
        });
        if let Some(m) = bad {
            return Err(AlgoError::Diverged { step: t, worker: m });
        }
        if (t + 1) % cfg.sync_interval == 0 {
            synchronize(&mut states);
        }
        observer(&Snapshot {
            t: t + 1,
            workers: &states,
        });
    }

    Ok(RunResult {
        final_avg_w: average(&states, |s| &s.w),
        final_avg_w_ag: average(&states, |s| &s.w_ag),
        weighted_avg_w: None,
        gradient_calls: (cfg.workers * cfg.steps * per) as u64,
        parallel_steps: cfg.steps,
    })
}
