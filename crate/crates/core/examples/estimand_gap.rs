//! How far the best series approximation sits from the true conditional
//! quantile, by basis, measured on a large repeated sample.
//!
//! Usage: `cargo run --release --example estimand_gap -- [repeats]`.

use seriesqr::sim::{estimand_gap, DgpSpec, GapTarget};
use seriesqr::{BasisConfig, QuantileGrid};

fn main() -> seriesqr::Result<()> {
    let repeats = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let dgp = DgpSpec::calibrated(500);
    let grid = QuantileGrid::uniform(1, 9, 10)?;
    let w: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64 / 20.0).collect();
    let mut bases: Vec<(String, BasisConfig)> = (1..=6).map(|d| (format!("power{d}"), BasisConfig::power(d))).collect();
    bases.push(("bspline".into(), BasisConfig::quartile_bspline()));
    println!("{:>8} {:>10} {:>10} {:>12}", "basis", "rms", "sup", "rms d/dw");
    for (name, cfg) in &bases {
        let level = estimand_gap(&dgp, cfg, &grid, &w, repeats, GapTarget::Quantile, 1)?;
        let slope = estimand_gap(&dgp, cfg, &grid, &w, repeats, GapTarget::Derivative, 1)?;
        println!("{name:>8} {:>10.4} {:>10.4} {:>12.4}", level.l2(), level.sup(), slope.l2());
    }
    Ok(())
}
