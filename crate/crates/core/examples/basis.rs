//! Evaluates the three series families on a small sample and prints the
//! terms and their derivatives at a few points.

use seriesqr::{make_basis, BasisConfig, Measure};

fn main() -> seriesqr::Result<()> {
    let sample: Vec<Vec<f64>> = (0..200).map(|i| vec![0.5 * (i as f64 + 0.5) / 200.0]).collect();
    for (name, cfg) in [
        ("linear", BasisConfig::linear()),
        ("power", BasisConfig::power(4)),
        ("bspline", BasisConfig::quartile_bspline()),
    ] {
        let basis = make_basis(&cfg, &sample)?;
        println!("{name}: m = {}, zeta = {:.3}", basis.m(), basis.zeta);
        for w in [0.05, 0.25, 0.45] {
            let z = basis.eval(&[w]);
            let dz = basis.eval_derivative(&[w], 0)?;
            println!("  w = {w:.2}  Z = {}  dZ = {}", fmt(&z), fmt(&dz));
        }
        let ell = basis.average_derivative_loading(&sample, 0, &Measure::Empirical)?;
        println!("  average-derivative loading {}", fmt(&ell));
    }
    Ok(())
}

fn fmt(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:+.3}")).collect();
    format!("[{}]", s.join(" "))
}
