//! FedAc-I against FedAvg on a noisy quadratic with 16 workers that
//! synchronize every 32 steps.
//!
//!     cargo run --release --example quickstart

use fedac::algorithms::{fedac_run, fedavg_run, schedule_fedac1, RunConfig, Snapshot};
use fedac::objectives::Objective;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim = 20;
    let (mu, l) = (0.01, 1.0);
    let spectrum = (0..dim)
        .map(|j| mu + (l - mu) * j as f64 / (dim - 1) as f64)
        .collect();
    let f = Objective::quadratic(spectrum, vec![1.0; dim], 1.0)?;
    let cfg = RunConfig::new(16, 2048, 32, 7);

    let eta = 0.05;
    let hyper = schedule_fedac1(eta, mu, cfg.sync_interval)?;
    println!(
        "FedAc-I: eta={eta} gamma={:.4} alpha={:.2} beta={:.2}",
        hyper.gamma, hyper.alpha, hyper.beta
    );

    let mut fedac_curve = Vec::new();
    fedac_run(&f, &cfg, &hyper, &mut |s: &Snapshot<'_>| {
        if s.t % 256 == 0 {
            fedac_curve.push(f.eval(&s.avg_w_ag()).unwrap());
        }
    })?;
    let mut fedavg_curve = Vec::new();
    let avg = fedavg_run(&f, &cfg, eta, mu, &mut |s: &Snapshot<'_>| {
        if s.t % 256 == 0 {
            fedavg_curve.push(f.eval(&s.avg_w()).unwrap());
        }
    })?;

    println!("{:>6} {:>14} {:>14}", "t", "FedAc-I", "FedAvg");
    for (i, (a, b)) in fedac_curve.iter().zip(&fedavg_curve).enumerate() {
        println!("{:>6} {:>14.6e} {:>14.6e}", i * 256, a, b);
    }
    if let Some(w) = avg.weighted_avg_w {
        println!("FedAvg weighted average: {:.6e}", f.eval(&w)?);
    }
    Ok(())
}
