//! A small eta-tuning sweep on l2-regularized logistic regression over the
//! bundled a9a-like dataset, writing sweep.csv and records.csv.
//!
//!     cargo run --release --example logistic_sweep [out_dir]

use std::path::PathBuf;

use fedac::harness::{
    parse_config, prepare_problem, tune_and_sweep, write_records_csv, write_rows_csv,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fedac-logistic-sweep"));
    let cfg = parse_config(
        "objective = logistic
         data = adult-a9a-like.libsvm.gz
         dim = 123
         lambda = 1e-3
         T = 256
         eval_every = 64
         M = 4, 16
         K = 1, 16
         eta = 0.01, 0.1, 1
         seeds = 0, 1
         init_scale = 1",
        Some(&data),
    )?;
    let problem = prepare_problem(&cfg, Some(&out))?;
    println!(
        "F* = {:.10} after {} AGD steps",
        problem.optimum.f_star, problem.optimum.iterations
    );
    let result = tune_and_sweep(&problem, &cfg)?;
    for r in &result.rows {
        println!(
            "{:<10} M={:<3} K={:<3} eta={:<5} best={:.4e}",
            r.algorithm.as_str(),
            r.m,
            r.k,
            r.best_eta,
            r.best_suboptimality
        );
    }
    write_rows_csv(&out.join("sweep.csv"), &result.rows)?;
    write_records_csv(&out.join("records.csv"), &result.records())?;
    println!("wrote {}", out.display());
    Ok(())
}
