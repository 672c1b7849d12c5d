//! Parses a LibSVM file (gzip or plain) and prints its shape together with
//! the smoothness constants of the regularized logistic objective.
//!
//!     cargo run --release --example libsvm_stats [path] [lambda]

use std::path::PathBuf;

use fedac::dataio::{dataset_stats, load_libsvm};
use fedac::objectives::smoothness_bounds;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult-a9a-like.libsvm.gz")
    });
    let lambda: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1e-3);

    let ds = load_libsvm(&path, None)?;
    println!("{}", dataset_stats(&ds));
    let positives = ds.labels().iter().filter(|&&y| y > 0.0).count();
    println!("nnz={} positives={positives}", ds.nnz());
    let (mu, l) = smoothness_bounds(&ds, lambda)?;
    println!("lambda={lambda:e}: mu={mu:e} L={l:.6} kappa={:.1}", l / mu);
    println!("sha256 {}", ds.fingerprint());
    Ok(())
}
