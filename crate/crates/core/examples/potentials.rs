//! Tracks the decentralized and centralized potentials and the worker
//! discrepancy of FedAc-II across synchronization rounds.
//!
//!     cargo run --release --example potentials

use fedac::algorithms::{fedac_run, schedule_fedac2, RunConfig, Snapshot};
use fedac::diagnostics::potential_report;
use fedac::objectives::Objective;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (mu, k) = (0.05, 16);
    let f = Objective::quadratic(vec![0.05, 0.2, 0.5, 1.0], vec![2.0, -1.0, 0.5, 0.0], 0.5)?;
    let w_star = [2.0, -1.0, 0.5, 0.0];
    let hyper = schedule_fedac2(0.1, mu, k)?;
    let cfg = RunConfig::new(8, 256, k, 3);

    println!("{:>5} {:>12} {:>12} {:>12}", "t", "psi", "phi", "max disc");
    let mut failure = None;
    fedac_run(&f, &cfg, &hyper, &mut |s: &Snapshot<'_>| {
        // just before and right after each synchronization
        if s.t % k == 0 || s.t % k == k - 1 {
            match potential_report(s.workers, &f, mu, &w_star, 0.0) {
                Ok(r) => println!(
                    "{:>5} {:>12.5e} {:>12.5e} {:>12.5e}",
                    s.t, r.psi, r.phi, r.discrepancy_max
                ),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
