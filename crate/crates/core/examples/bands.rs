//! Pointwise intervals and a uniform band for the derivative of the
//! conditional quantile in `w`, over a grid of quantile indices.

use seriesqr::coupling::draw_pivotal;
use seriesqr::inference::{pointwise_interval, t_star_process, uniform_band, CriticalValue};
use seriesqr::sim::{generate_dgp, DgpSpec};
use seriesqr::{fit_process, make_basis, BasisConfig, Dataset, FunctionalSpec, QuantileGrid};

fn main() -> seriesqr::Result<()> {
    let dgp = DgpSpec::calibrated(800);
    let sample = generate_dgp(&dgp, 21)?;
    let basis = make_basis(&BasisConfig::power(6), &sample.covariates)?;
    let data = Dataset::new(sample.y, &basis.design_matrix(&sample.covariates))?;
    let grid = QuantileGrid::uniform(2, 18, 20)?;
    let proc = fit_process(&data, Some(&basis), &grid)?;

    let points = [vec![0.1], vec![0.25], vec![0.4]];
    let spec = FunctionalSpec::derivative(&basis, &points, 0, grid.len())?;
    let draws = draw_pivotal(&data, &proc, 1000, 3)?;
    let t = t_star_process(&proc, &draws, &spec)?;
    let uniform = uniform_band(&t, 0.10, true)?;
    let pointwise = pointwise_interval(&t, 0.10, CriticalValue::CouplingQuantile)?;
    println!("k_n = {:.3}, delta_n = {:.3}", uniform.k[0], uniform.delta_n);
    println!("{:>5} {:>5} {:>8} {:>8} {:>19} {:>19}", "u", "w", "theta", "truth", "pointwise", "uniform");
    for (p, &(k, j)) in uniform.index.iter().enumerate() {
        if k % 4 != 0 {
            continue;
        }
        println!(
            "{:>5.2} {:>5.2} {:>8.3} {:>8.3} [{:>8.3},{:>8.3}] [{:>8.3},{:>8.3}]",
            grid.points()[k],
            points[j][0],
            uniform.theta_hat[p],
            dgp.g_prime(points[j][0]),
            pointwise.lower[p],
            pointwise.upper[p],
            uniform.lower[p],
            uniform.upper[p]
        );
    }
    let truth: Vec<f64> = uniform.index.iter().map(|&(_, j)| dgp.g_prime(points[j][0])).collect();
    // the band targets the series derivative; g' differs from it by the
    // approximation error, which is largest near the ends of the range
    let outside = truth
        .iter()
        .zip(uniform.lower.iter().zip(&uniform.upper))
        .filter(|(t, (l, u))| *t < *l || *t > *u)
        .count();
    println!("g'(w) outside the uniform band at {outside} of {} points", truth.len());
    Ok(())
}
