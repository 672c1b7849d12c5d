//! Self-checking invariant suite behind `fedac verify`.
//!
//! Every check is deterministic: random instances come from fixed
//! [`RngStream`]s, so two runs print the same report.

use std::fmt;
use std::sync::Arc;

use crate::algorithms::{
    fedac_run, fedavg_run, mb_acsgd_run, mb_sgd_run, no_observer, schedule_fedac1, schedule_fedac2,
    schedule_vanilla, Minibatch, RunConfig, Snapshot, WorkerState,
};
use crate::dataio::Dataset;
use crate::diagnostics::{
    construct_instability_objective, fedac1_norm_bound, fedac2_norm_bound, instability_experiment,
    potential_psi, transfer_matrix_fedac1, transfer_matrix_fedac2, transformed_norm,
    NORM_BOUND_SLACK,
};
use crate::objectives::Objective;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

type Outcome = Result<String, String>;

fn uniform(s: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.next_f64()
}

fn log_uniform(s: &mut RngStream, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * s.next_f64()).exp()
}

fn quad(dim: usize, sigma: f64) -> Objective {
    let spectrum = (0..dim).map(|j| 1.0 + j as f64).collect();
    let shift = (0..dim).map(|j| 0.5 - 0.25 * j as f64).collect();
    Objective::quadratic(spectrum, shift, sigma).expect("valid quadratic")
}

fn trajectory(run: impl FnOnce(&mut dyn FnMut(&Snapshot<'_>))) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    run(&mut |s: &Snapshot<'_>| out.push(s.avg_w()));
    out
}

fn fedavg_equals_minibatch() -> Outcome {
    let f = quad(5, 1.0);
    let cfg = RunConfig::new(4, 100, 1, 17);
    let a = trajectory(|o| {
        fedavg_run(&f, &cfg, 0.05, 1.0, o)
            .map(drop)
            .expect("fedavg");
    });
    let b = trajectory(|o| {
        mb_sgd_run(&f, &cfg, 0.05, o).map(drop).expect("mb_sgd");
    });
    (a == b)
        .then(|| "101 averaged iterates bitwise equal".to_string())
        .ok_or_else(|| "trajectories differ".into())
}

fn fedac_noiseless_k_independent() -> Outcome {
    let f = quad(5, 0.0);
    let h = schedule_fedac1(0.05, 1.0, 1).map_err(|e| e.to_string())?;
    let base = fedac_run(
        &f,
        &RunConfig::new(3, 100, 1, 0).with_init(vec![1.0; 5]),
        &h,
        &mut no_observer,
    )
    .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in [2, 5, 100] {
        let r = fedac_run(
            &f,
            &RunConfig::new(3, 100, k, 0).with_init(vec![1.0; 5]),
            &h,
            &mut no_observer,
        )
        .map_err(|e| e.to_string())?;
        for (a, b) in r.final_avg_w.iter().zip(&base.final_avg_w) {
            worst = worst.max((a - b).abs());
        }
    }
    (worst <= 1e-12)
        .then(|| format!("max deviation {worst:e}"))
        .ok_or_else(|| format!("max deviation {worst:e}"))
}

fn acsgd_is_batched_fedac() -> Outcome {
    let f = quad(5, 1.0);
    let (m, k, t) = (4, 5, 100);
    let a = mb_acsgd_run(&f, &RunConfig::new(m, t, k, 3), 0.05, 1.0, &mut no_observer)
        .map_err(|e| e.to_string())?;
    let batched = Minibatch::new(&f, m * k).map_err(|e| e.to_string())?;
    let h = schedule_vanilla(0.05, 1.0).map_err(|e| e.to_string())?;
    let b = fedac_run(
        &batched,
        &RunConfig::new(1, t / k, 1, 3),
        &h,
        &mut no_observer,
    )
    .map_err(|e| e.to_string())?;
    (a.final_avg_w == b.final_avg_w && a.final_avg_w_ag == b.final_avg_w_ag)
        .then(|| "bitwise equal".to_string())
        .ok_or_else(|| "final iterates differ".into())
}

fn sync_is_projection() -> Outcome {
    let f = quad(4, 1.0);
    let h = schedule_fedac2(0.05, 1.0, 4).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    fedac_run(&f, &RunConfig::new(5, 40, 4, 1), &h, &mut |s: &Snapshot<
        '_,
    >| {
        if s.t % 4 == 0 && s.workers.iter().any(|w| w != &s.workers[0]) {
            bad.push(s.t);
        }
    })
    .map_err(|e| e.to_string())?;
    bad.is_empty()
        .then(|| "10 sync points exact".to_string())
        .ok_or_else(|| format!("workers differ at t={bad:?}"))
}

fn thread_invariance() -> Outcome {
    let f = quad(6, 1.0);
    let h = schedule_fedac1(0.05, 1.0, 8).map_err(|e| e.to_string())?;
    let cfg = RunConfig::new(8, 64, 8, 5);
    let a = fedac_run(&f, &cfg, &h, &mut no_observer).map_err(|e| e.to_string())?;
    let b = fedac_run(
        &f,
        &cfg.clone().with_parallel_workers(true),
        &h,
        &mut no_observer,
    )
    .map_err(|e| e.to_string())?;
    let c = fedavg_run(&f, &cfg, 0.05, 1.0, &mut no_observer).map_err(|e| e.to_string())?;
    let d = fedavg_run(
        &f,
        &cfg.with_parallel_workers(true),
        0.05,
        1.0,
        &mut no_observer,
    )
    .map_err(|e| e.to_string())?;
    (a == b && c == d)
        .then(|| "sequential == parallel".to_string())
        .ok_or_else(|| "results differ".into())
}

fn norm_bounds() -> Outcome {
    let mut s = RngStream::new(2020, 0);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..1000 {
        let mu = log_uniform(&mut s, 1e-4, 1.0);
        let l = mu * log_uniform(&mut s, 1.0, 1e4);
        let eta = log_uniform(&mut s, 1e-3, 1.0) / l;
        let gamma = if i % 10 == 0 {
            eta
        } else {
            log_uniform(&mut s, eta, (eta / mu).sqrt().max(eta))
        };
        for j in 0..21 {
            let h = if j == 20 {
                l
            } else {
                mu + (l - mu) * j as f64 / 20.0
            };
            let n1 = transformed_norm(
                &transfer_matrix_fedac1(mu, gamma, eta, h).map_err(|e| e.to_string())?,
                gamma,
                eta,
            );
            let n2 = transformed_norm(
                &transfer_matrix_fedac2(mu, gamma, eta, h).map_err(|e| e.to_string())?,
                gamma,
                eta,
            );
            let (e1, e2) = (
                n1 - fedac1_norm_bound(mu, gamma, eta),
                n2 - fedac2_norm_bound(mu, gamma, eta),
            );
            worst = worst.max(e1).max(e2);
            violations += usize::from(e1 > NORM_BOUND_SLACK) + usize::from(e2 > NORM_BOUND_SLACK);
        }
    }
    let msg = format!(
        "21000 samples per schedule, {violations} violations, max norm - bound = {worst:e}"
    );
    if violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn potential_contraction() -> Outcome {
    let mut s = RngStream::new(2020, 1);
    let (mut violations, mut at_floor) = (0, 0);
    for _ in 0..50 {
        let dim = 1 + s.draw_index(6);
        let mu = log_uniform(&mut s, 1e-3, 1.0);
        let l = mu * log_uniform(&mut s, 1.0, 1e3);
        let mut spectrum: Vec<f64> = (0..dim).map(|_| uniform(&mut s, mu, l)).collect();
        spectrum[0] = mu;
        if dim > 1 {
            spectrum[1] = l;
        }
        let shift: Vec<f64> = (0..dim).map(|_| uniform(&mut s, -1.0, 1.0)).collect();
        let f = Objective::quadratic(spectrum, shift.clone(), 0.0).map_err(|e| e.to_string())?;
        let h = schedule_fedac1(1.0 / f.l_est(), f.mu_est(), 1).map_err(|e| e.to_string())?;
        let init: Vec<f64> = (0..dim).map(|_| uniform(&mut s, -3.0, 3.0)).collect();
        let mut psi = Vec::new();
        fedac_run(
            &f,
            &RunConfig::new(2, 100, 1, 0).with_init(init),
            &h,
            &mut |snap: &Snapshot<'_>| {
                psi.push(
                    potential_psi(snap.workers, &f, f.mu_est(), &shift, 0.0).expect("finite state"),
                );
            },
        )
        .map_err(|e| e.to_string())?;
        let rate = 1.0 - h.gamma * f.mu_est();
        // Below this Psi is pure rounding noise in w - w*.
        let scale = shift.iter().fold(1.0f64, |a, x| a.max(1.0 + x.abs()));
        let floor = 0.5 * dim as f64 * f.l_est() * (64.0 * f64::EPSILON * scale).powi(2);
        for p in psi.windows(2) {
            if p[0] <= floor {
                at_floor += 1;
            } else if p[1] > rate * p[0] * (1.0 + 1e-9) + floor {
                violations += 1;
            }
        }
    }
    let msg = format!(
        "50 quadratics x 100 steps, {violations} violations, {at_floor} steps at the rounding floor"
    );
    if violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn instability() -> Outcome {
    let (mu, l) = (1.0, 25.0);
    let factor = 2.0 * (1.0 - 0.2f64).powi(3);
    let mut lines = Vec::new();
    for k in [1usize, 2, 4, 8] {
        let c = construct_instability_objective(l, mu, k, 0.5).map_err(|e| e.to_string())?;
        let eps = 1e-9 * c.w0.abs().max(c.w0_ag.abs());
        let r = instability_experiment(&c.objective, c.w0, c.w0_ag, l, mu, eps, k)
            .map_err(|e| e.to_string())?;
        let ratio_err = r
            .ratios
            .iter()
            .map(|x| (x - factor).abs())
            .fold(0.0, f64::max);
        let proj = r.projector_rel_err.iter().cloned().fold(0.0, f64::max);
        let bound = 0.5 * eps * 1.02f64.powi(k as i32);
        if ratio_err > 1e-3 || proj > 1e-8 || r.final_gap_w < bound {
            return Err(format!(
                "K={k}: ratio err {ratio_err:e}, projector err {proj:e}, |dw|={:e}",
                r.final_gap_w
            ));
        }
        lines.push(format!("K={k} ok"));
    }
    Ok(lines.join(", "))
}

fn finite_differences() -> Outcome {
    let ds = Dataset::from_rows(
        4,
        [
            (1.0, vec![(0, 1.0), (2, -0.5)]),
            (-1.0, vec![(1, 2.0), (3, 0.25)]),
            (1.0, vec![(0, -1.5), (1, 0.5), (3, 1.0)]),
        ],
    )
    .map_err(|e| e.to_string())?;
    let logistic = Objective::logistic(Arc::new(ds), 0.1).map_err(|e| e.to_string())?;
    let quadratic = Objective::quadratic(vec![0.5, 1.0, 2.0, 4.0], vec![1.0, -1.0, 0.0, 2.0], 0.0)
        .map_err(|e| e.to_string())?;
    let augmented = logistic
        .augment(0.3, vec![0.5, 0.0, -0.5, 1.0])
        .map_err(|e| e.to_string())?;
    let mut s = RngStream::new(2020, 2);
    let mut worst = 0.0f64;
    for f in [&quadratic, &logistic, &augmented] {
        for _ in 0..20 {
            let w: Vec<f64> = (0..4).map(|_| uniform(&mut s, -2.0, 2.0)).collect();
            let g = f.grad(&w).map_err(|e| e.to_string())?;
            for j in 0..4 {
                let h = 1e-6 * (1.0 + w[j].abs());
                let (mut a, mut b) = (w.clone(), w.clone());
                a[j] += h;
                b[j] -= h;
                let fd = (f.eval(&a).map_err(|e| e.to_string())?
                    - f.eval(&b).map_err(|e| e.to_string())?)
                    / (a[j] - b[j]);
                worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
            }
        }
    }
    let msg = format!("60 points, max relative error {worst:e}");
    if worst <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn difference_law() -> Outcome {
    let (mu, hcurv) = (0.5, 3.0);
    let f = Objective::quadratic(vec![hcurv], vec![0.0], 0.0).map_err(|e| e.to_string())?;
    let h = schedule_fedac1(0.2, mu, 4).map_err(|e| e.to_string())?;
    let a = transfer_matrix_fedac1(mu, h.gamma, h.eta, hcurv).map_err(|e| e.to_string())?;
    let cfg = RunConfig::new(2, 30, 30, 0);
    let mut states: Vec<Vec<WorkerState>> = Vec::new();
    let run = |x0: f64, states: &mut Vec<Vec<WorkerState>>| {
        fedac_run(
            &f,
            &cfg.clone().with_init(vec![x0]),
            &h,
            &mut |s: &Snapshot<'_>| states.push(s.workers.to_vec()),
        )
    };
    run(1.0, &mut states).map_err(|e| e.to_string())?;
    let mut other = Vec::new();
    run(-0.7, &mut other).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for t in 0..30 {
        let d0 = [
            states[t][0].w_ag[0] - other[t][0].w_ag[0],
            states[t][0].w[0] - other[t][0].w[0],
        ];
        let d1 = [
            states[t + 1][0].w_ag[0] - other[t + 1][0].w_ag[0],
            states[t + 1][0].w[0] - other[t + 1][0].w[0],
        ];
        let p = a.apply(d0);
        worst = worst.max((p[0] - d1[0]).abs()).max((p[1] - d1[1]).abs());
    }
    let msg = format!("30 steps, max deviation {worst:e}");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Runs the whole suite.
pub fn run_all() -> Vec<Check> {
    let checks: [(&'static str, fn() -> Outcome); 10] = [
        ("fedavg-k1-equals-minibatch-sgd", fedavg_equals_minibatch),
        (
            "fedac-noiseless-k-independence",
            fedac_noiseless_k_independent,
        ),
        ("mb-acsgd-equals-batched-fedac", acsgd_is_batched_fedac),
        ("sync-is-projection", sync_is_projection),
        ("thread-count-invariance", thread_invariance),
        ("transformed-norm-bounds", norm_bounds),
        ("potential-contraction", potential_contraction),
        ("agd-instability", instability),
        ("gradient-finite-differences", finite_differences),
        ("one-step-difference-law", difference_law),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = match f() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            Check {
                name,
                passed,
                detail,
            }
        })
        .collect()
}
