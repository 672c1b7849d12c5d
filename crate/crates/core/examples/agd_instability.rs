//! Exponential sensitivity of deterministic AGD to its starting point.
//!
//! Builds the piecewise-curvature objective for kappa = 25 and prints how a
//! 1e-9 perturbation of the start grows per 3-step block.
//!
//!     cargo run --release --example agd_instability

use fedac::diagnostics::{construct_instability_objective, instability_experiment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (mu, l) = (1.0, 25.0);
    for k in [1usize, 2, 4, 8] {
        let c = construct_instability_objective(l, mu, k, 0.5)?;
        let scale = c.w0.abs().max(c.w0_ag.abs());
        let eps = 1e-9 * scale;
        let r = instability_experiment(&c.objective, c.w0, c.w0_ag, l, mu, eps, k)?;
        println!(
            "K={k} delta={:.3e} block factor={:.6}",
            c.delta, r.block_factor
        );
        for (i, (ratio, err)) in r.ratios.iter().zip(&r.projector_rel_err).enumerate() {
            println!("  block {i}: ratio={ratio:.9} projector err={err:.2e}");
        }
        println!(
            "  |dw|={:.6e} (3 eps 1.024^K = {:.6e})  |dw_ag|={:.6e} (0.6 eps 1.024^K = {:.6e})",
            r.final_gap_w,
            3.0 * eps * 1.024f64.powi(k as i32),
            r.final_gap_ag,
            0.6 * eps * 1.024f64.powi(k as i32)
        );
    }
    Ok(())
}
