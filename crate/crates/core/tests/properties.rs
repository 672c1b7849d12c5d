use fedac::algorithms::{
    fedac_run, fedavg_run, mb_acsgd_run, mb_sgd_run, no_observer, schedule_fedac1, schedule_fedac2,
    schedule_vanilla, Minibatch, RunConfig, Snapshot,
};
use fedac::dataio::{parse_libsvm, Dataset};
use fedac::diagnostics::{
    transfer_matrix_fedac1, transfer_matrix_fedac2, transfer_matrix_general, TransferMatrix,
};
use fedac::harness::{read_records_csv, write_records_csv, Algorithm, EvalRecord};
use fedac::objectives::Objective;
use proptest::prelude::*;

fn quad(dim: usize, sigma: f64) -> Objective {
    let spectrum = (0..dim).map(|j| 0.5 + j as f64).collect();
    let shift = (0..dim).map(|j| 1.0 - 0.3 * j as f64).collect();
    Objective::quadratic(spectrum, shift, sigma).unwrap()
}

fn avg_trajectory<F>(run: F) -> Vec<Vec<f64>>
where
    F: FnOnce(&mut dyn FnMut(&Snapshot<'_>)),
{
    let mut out = Vec::new();
    run(&mut |s: &Snapshot<'_>| out.push(s.avg_w()));
    out
}

/// Largest singular value by power iteration on `A^T A`.
fn power_norm(a: &TransferMatrix) -> f64 {
    let g = [
        a.a11 * a.a11 + a.a21 * a.a21,
        a.a11 * a.a12 + a.a21 * a.a22,
        a.a12 * a.a12 + a.a22 * a.a22,
    ];
    let mut v = [1.0, 0.618];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let u = [g[0] * v[0] + g[1] * v[1], g[1] * v[0] + g[2] * v[1]];
        let n = u[0].hypot(u[1]);
        if n == 0.0 {
            return 0.0;
        }
        lambda = n;
        v = [u[0] / n, u[1] / n];
    }
    lambda.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fedavg_k1_is_minibatch_sgd(m in 1usize..6, t in 1usize..40, seed in any::<u64>(), eta in 0.01f64..0.3) {
        let f = quad(3, 1.0);
        let cfg = RunConfig::new(m, t, 1, seed);
        let a = avg_trajectory(|o| { fedavg_run(&f, &cfg, eta, 0.5, o).unwrap(); });
        let b = avg_trajectory(|o| { mb_sgd_run(&f, &cfg, eta, o).unwrap(); });
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mb_acsgd_is_batched_fedac(m in 1usize..5, k in 1usize..5, rounds in 1usize..12, seed in any::<u64>()) {
        let f = quad(3, 1.0);
        let a = mb_acsgd_run(&f, &RunConfig::new(m, k * rounds, k, seed), 0.05, 0.5, &mut no_observer).unwrap();
        let batched = Minibatch::new(&f, m * k).unwrap();
        let h = schedule_vanilla(0.05, 0.5).unwrap();
        let b = fedac_run(&batched, &RunConfig::new(1, rounds, 1, seed), &h, &mut no_observer).unwrap();
        prop_assert_eq!(a.final_avg_w_ag, b.final_avg_w_ag);
        prop_assert_eq!(a.final_avg_w, b.final_avg_w);
    }

    #[test]
    fn synchronization_equalizes_workers(m in 2usize..6, k in 1usize..6, rounds in 1usize..6, seed in any::<u64>()) {
        let f = quad(2, 1.0);
        let h = schedule_fedac1(0.05, 0.5, k).unwrap();
        let mut seen = 0;
        let mut ok = true;
        fedac_run(&f, &RunConfig::new(m, k * rounds, k, seed), &h, &mut |s: &Snapshot<'_>| {
            if s.t % k == 0 {
                seen += 1;
                ok &= s.workers.iter().all(|w| w == &s.workers[0]);
            }
        }).unwrap();
        prop_assert!(ok);
        prop_assert_eq!(seen, rounds + 1);
    }

    #[test]
    fn parallel_workers_do_not_change_results(m in 1usize..9, k in 1usize..5, seed in any::<u64>()) {
        let f = quad(4, 1.0);
        let h = schedule_fedac2(0.05, 0.5, k).unwrap();
        let cfg = RunConfig::new(m, 4 * k, k, seed);
        let a = fedac_run(&f, &cfg, &h, &mut no_observer).unwrap();
        let b = fedac_run(&f, &cfg.clone().with_parallel_workers(true), &h, &mut no_observer).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn schedule_matrices_match_general_form(
        log_mu in -4.0f64..0.0,
        log_kappa in 0.0f64..4.0,
        u in 0.01f64..1.0,
        frac in 0.0f64..1.0,
        s in 0.0f64..1.0,
    ) {
        let mu = 10f64.powf(log_mu);
        let l = mu * 10f64.powf(log_kappa);
        let eta = u / l;
        let gamma = eta * ((eta / mu).sqrt() / eta).max(1.0).powf(frac);
        let h = mu + (l - mu) * s;
        // FedAc-I
        let alpha = 1.0 / (gamma * mu);
        let a = transfer_matrix_fedac1(mu, gamma, eta, h).unwrap();
        let b = transfer_matrix_general(alpha, alpha + 1.0, gamma, eta, h);
        prop_assert!((a.a11 - b.a11).abs() <= 1e-12 && (a.a12 - b.a12).abs() <= 1e-12);
        prop_assert!((a.a21 - b.a21).abs() <= 1e-9 * (1.0 + b.a21.abs()) && (a.a22 - b.a22).abs() <= 1e-12);
        // FedAc-II
        let alpha = 1.5 / (gamma * mu) - 0.5;
        let beta = (2.0 * alpha * alpha - 1.0) / (alpha - 1.0);
        if alpha > 1.0 + 1e-6 {
            let a = transfer_matrix_fedac2(mu, gamma, eta, h).unwrap();
            let b = transfer_matrix_general(alpha, beta, gamma, eta, h);
            for (x, y) in [(a.a11, b.a11), (a.a12, b.a12), (a.a21, b.a21), (a.a22, b.a22)] {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()), "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn spectral_norm_matches_power_iteration(e in prop::array::uniform4(-5.0f64..5.0)) {
        let a = TransferMatrix { a11: e[0], a12: e[1], a21: e[2], a22: e[3] };
        let exact = a.spectral_norm();
        prop_assert!((exact - power_norm(&a)).abs() <= 1e-9 * (1.0 + exact));
    }

    #[test]
    fn libsvm_round_trip(rows in prop::collection::vec(
        (prop::bool::ANY, prop::collection::btree_map(0usize..30, -100i32..100, 0..8)),
        1..20,
    )) {
        let rows: Vec<(f64, Vec<(usize, f64)>)> = rows
            .into_iter()
            .map(|(y, feats)| {
                let label = if y { 1.0 } else { -1.0 };
                (label, feats.into_iter().map(|(j, v)| (j, v as f64 / 8.0)).collect())
            })
            .collect();
        let ds = Dataset::from_rows(30, rows).unwrap();
        let text = ds.to_libsvm_string();
        let back = parse_libsvm(text.as_bytes(), Some(30)).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(back.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn records_csv_round_trip(values in prop::collection::vec(prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        Just(f64::INFINITY),
    ], 0..30)) {
        let records: Vec<EvalRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| EvalRecord {
                algorithm: Algorithm::ALL[i % 6],
                m: i + 1,
                k: 2 * i + 1,
                eta: 1.0 / (i as f64 + 3.0),
                seed: i as u64,
                t: 16 * i,
                suboptimality: v,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_records_csv(&p, &records).unwrap();
        prop_assert_eq!(read_records_csv(&p).unwrap(), records);
    }
}

#[test]
fn noiseless_fedac_ignores_synchronization() {
    let f = quad(5, 0.0);
    let init = vec![2.0, -1.0, 0.0, 3.0, 1.5];
    let h = schedule_fedac1(0.05, 0.5, 1).unwrap();
    let run = |k| {
        fedac_run(
            &f,
            &RunConfig::new(3, 100, k, 9).with_init(init.clone()),
            &h,
            &mut no_observer,
        )
        .unwrap()
    };
    let base = run(1);
    for k in [2, 5, 100] {
        for (a, b) in run(k).final_avg_w_ag.iter().zip(&base.final_avg_w_ag) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
