//! Fits the quantile process on simulated data and reports the fitted
//! conditional quantiles next to the truth.

use seriesqr::sim::{generate_dgp, DgpSpec};
use seriesqr::{fit_process, make_basis, BasisConfig, Dataset, QuantileGrid};

fn main() -> seriesqr::Result<()> {
    let dgp = DgpSpec::calibrated(1000);
    let sample = generate_dgp(&dgp, 11)?;
    let basis = make_basis(&BasisConfig::quartile_bspline(), &sample.covariates)?;
    let data = Dataset::new(sample.y, &basis.design_matrix(&sample.covariates))?;
    let grid = QuantileGrid::new(vec![0.1, 0.25, 0.5, 0.75, 0.9])?;
    let proc = fit_process(&data, Some(&basis), &grid)?;
    println!("n = {}, m = {}, certificate ratio = {:.3e}", proc.n, proc.m(), proc.max_certificate_ratio());
    println!("{:>5} {:>6} {:>9} {:>9}", "u", "w", "fitted", "truth");
    for (k, &u) in grid.points().iter().enumerate() {
        for w in [0.1, 0.3] {
            let fitted: f64 = basis.eval(&[w]).iter().zip(&proc.betas[k]).map(|(a, b)| a * b).sum();
            println!("{u:>5.2} {w:>6.2} {fitted:>9.4} {:>9.4}", dgp.truth(u, &[w]));
        }
    }
    Ok(())
}
