//! Compares the spread of the four couplings for one coefficient.
//!
//! Bootstraps refit the model for every draw; keep their draw counts small.

use seriesqr::coupling::{draw_gaussian, draw_gradient_bootstrap, draw_pivotal, draw_weighted_bootstrap};
use seriesqr::sim::{generate_dgp, DgpSpec};
use seriesqr::{fit_process, make_basis, BasisConfig, Dataset, GradientPath, ProcessDraws, QuantileGrid};

fn main() -> seriesqr::Result<()> {
    let sample = generate_dgp(&DgpSpec::calibrated(400), 5)?;
    let basis = make_basis(&BasisConfig::power(3), &sample.covariates)?;
    let data = Dataset::new(sample.y, &basis.design_matrix(&sample.covariates))?;
    let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75])?;
    let proc = fit_process(&data, Some(&basis), &grid)?;

    let runs: Vec<(&str, ProcessDraws)> = vec![
        ("pivotal", draw_pivotal(&data, &proc, 2000, 1)?),
        ("gaussian", draw_gaussian(&proc, 2000, 1)?),
        ("weighted", draw_weighted_bootstrap(&data, &proc, 200, 1)?),
        ("gradient", draw_gradient_bootstrap(&data, &proc, 200, 1, GradientPath::LinearTerm)?),
    ];
    println!("sd of sqrt(n)(beta_1* - beta_1) by quantile");
    for (name, d) in &runs {
        let sds: Vec<String> = (0..grid.len())
            .map(|k| {
                let x: Vec<f64> = (0..d.b).map(|b| d.draw(b, k)[1]).collect();
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
                format!("{:8.3}", var.sqrt())
            })
            .collect();
        println!("{name:>9} {}", sds.join(""));
    }
    Ok(())
}
