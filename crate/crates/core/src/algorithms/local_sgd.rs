use super::fedac::{step_all, synchronize, Scratch};
use super::{average, AlgoError, RunConfig, RunResult, Snapshot, WorkerState};
use crate::objectives::GradientOracle;
use crate::vector::all_finite;

fn sgd_step<O: GradientOracle + ?Sized>(
    st: &mut WorkerState,
    x: &mut Scratch,
    oracle: &O,
    eta: f64,
) -> bool {
    oracle.sample_into(&st.w, &mut x.streams, &mut x.g);
    for (w, g) in st.w.iter_mut().zip(&x.g) {
        *w -= eta * g;
    }
    st.w_ag.copy_from_slice(&st.w);
    all_finite(&st.w)
}

/// Federated averaging (local SGD).
///
/// Every worker takes `w <- w - eta * g(w)`; after step `t` with
/// `(t + 1) % K == 0` the iterates are averaged and broadcast. `w_ag` mirrors
/// `w` so snapshots look the same as for FedAc.
///
/// `mu` only shapes the returned weighted average
/// `sum_t rho_t avg(w_t) / sum_t rho_t`, `rho_t = (1 - eta mu / 2)^(T - t - 1)`
/// over `t = 0..T`; `mu = 0` gives the uniform average.
pub fn fedavg_run<O>(
    oracle: &O,
    cfg: &RunConfig,
    eta: f64,
    mu: f64,
    observer: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<RunResult, AlgoError>
where
    O: GradientOracle + ?Sized,
{
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(AlgoError::InvalidHyper(format!(
            "eta must be positive, got {eta}"
        )));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(AlgoError::InvalidHyper(format!(
            "mu must be nonnegative, got {mu}"
        )));
    }
    let w0 = cfg.validate(oracle.dim())?;
    let per = oracle.streams_per_query();
    let mut states = vec![WorkerState::at(&w0); cfg.workers];
    let mut scratch = Scratch::for_workers(cfg.workers, per, cfg.seed, w0.len());

    // Horner form: acc_{t} = q acc_{t-1} + avg(w_t), so after t = T-1 every
    // term carries q^(T-1-t).
    let q = 1.0 - 0.5 * eta * mu;
    let mut acc = vec![0.0; w0.len()];
    let mut norm = 0.0;

    observer(&Snapshot {
        t: 0,
        workers: &states,
    });
    for t in 0..cfg.steps {
        let w_bar = average(&states, |s| &s.w);
        for (a, x) in acc.iter_mut().zip(&w_bar) {
            *a = q * *a + x;
        }
        norm = q * norm + 1.0;

        if let Some(m) = step_all(&mut states, &mut scratch, cfg.parallel_workers, |s, x| {
            sgd_step(s, x, oracle, eta)
        }) {
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
    acc.iter_mut().for_each(|a| *a /= norm);

    let final_avg_w = average(&states, |s| &s.w);
    Ok(RunResult {
        final_avg_w_ag: final_avg_w.clone(),
        final_avg_w,
        weighted_avg_w: Some(acc),
        gradient_calls: (cfg.workers * cfg.steps * per) as u64,
        parallel_steps: cfg.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::no_observer;
    use crate::objectives::Objective;
    use approx::assert_relative_eq;

    #[test]
    fn one_step_halves() {
        let f = Objective::quadratic(vec![1.0], vec![0.0], 0.0).unwrap();
        let cfg = RunConfig::new(3, 1, 2, 0).with_init(vec![1.0]);
        let mut last = None;
        fedavg_run(&f, &cfg, 0.5, 1.0, &mut |s: &Snapshot<'_>| {
            last = Some(s.workers.to_vec());
        })
        .unwrap();
        assert!(last
            .unwrap()
            .iter()
            .all(|s| s.w == [0.5] && s.w_ag == [0.5]));
    }

    #[test]
    fn weighted_average_by_hand() {
        // F = w^2/2, w0 = 1, eta = 0.5, mu = 1: w_t = 0.5^t, q = 0.75.
        let f = Objective::quadratic(vec![1.0], vec![0.0], 0.0).unwrap();
        let cfg = RunConfig::new(1, 3, 1, 0).with_init(vec![1.0]);
        let r = fedavg_run(&f, &cfg, 0.5, 1.0, &mut no_observer).unwrap();
        let num = 0.75 * 0.75 * 1.0 + 0.75 * 0.5 + 0.25;
        let den = 0.75 * 0.75 + 0.75 + 1.0;
        assert_relative_eq!(
            r.weighted_avg_w.unwrap()[0],
            num / den,
            max_relative = 1e-15
        );
        assert_eq!(r.final_avg_w, vec![0.125]);
    }

    #[test]
    fn single_worker_ignores_k() {
        let f = Objective::quadratic(vec![1.0, 3.0], vec![1.0, 2.0], 0.7).unwrap();
        let a = fedavg_run(&f, &RunConfig::new(1, 30, 1, 5), 0.1, 1.0, &mut no_observer).unwrap();
        let b = fedavg_run(
            &f,
            &RunConfig::new(1, 30, 30, 5),
            0.1,
            1.0,
            &mut no_observer,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_eta() {
        let f = Objective::quadratic(vec![1.0], vec![0.0], 0.0).unwrap();
        assert!(fedavg_run(&f, &RunConfig::new(1, 1, 1, 0), 0.0, 1.0, &mut no_observer).is_err());
        assert!(fedavg_run(&f, &RunConfig::new(1, 1, 1, 0), 0.1, -1.0, &mut no_observer).is_err());
    }
}
