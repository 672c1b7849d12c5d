//! Transformed norms of the FedAc-I and FedAc-II transfer matrices against
//! their uniform bounds, over a grid of step sizes.
//!
//!     cargo run --release --example norm_bounds

use fedac::diagnostics::norm_bound_sweep;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (mu, l) = (1e-3, 1.0);
    let mut grid = Vec::new();
    for eta in [1e-3f64, 1e-2, 1e-1, 1.0] {
        let top = (eta / mu).sqrt();
        for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
            grid.push((eta * (top / eta).powf(frac), eta));
        }
    }
    let report = norm_bound_sweep(mu, l, &grid, 101)?;
    println!(
        "{:>8} {:>9} {:>10} {:>10} {:>10} {:>10}",
        "eta", "gamma", "I", "I bound", "II", "II bound"
    );
    for r in &report.rows {
        println!(
            "{:>8.0e} {:>9.3e} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            r.eta, r.gamma, r.fedac1_max, r.fedac1_bound, r.fedac2_max, r.fedac2_bound
        );
    }
    println!("violations: {}", report.violations);
    Ok(())
}
