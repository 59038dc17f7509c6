//! A short coverage study of uniform bands for the average derivative.
//!
//! Usage: `cargo run --release --example monte_carlo -- [replications]`.

use seriesqr::coupling::CouplingMethod;
use seriesqr::sim::{run_mc, McConfig, MethodDraws};

fn main() -> seriesqr::Result<()> {
    let replications = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let mut cfg = McConfig::standard(300, replications, 2024);
    cfg.methods = vec![MethodDraws::new(CouplingMethod::Pivotal, 500), MethodDraws::new(CouplingMethod::Gaussian, 500)];
    let report = run_mc(&cfg)?;
    println!("truth = {:.4}, {} replications, {} failed", report.truth, report.replications, report.failed);
    print!("{}", report.to_csv());
    Ok(())
}
