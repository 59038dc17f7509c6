use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use seriesqr::coupling::{draw_pivotal, CouplingMethod};
use seriesqr::inference::{
    delta_n, empirical_quantile, estimates, pointwise_interval, sigma_hat, t_star_process, uniform_band, CriticalValue,
    TStatProcess,
};
use seriesqr::sim::{generate_dgp, DgpSpec};
use seriesqr::{
    fit_process, make_basis, BasisConfig, CoefficientProcess, Dataset, Error, FunctionalSpec, Measure, QuantileGrid,
};

fn identity_process(u: f64, n: usize, m: usize) -> CoefficientProcess {
    let grid = QuantileGrid::new(vec![u]).unwrap();
    CoefficientProcess::from_parts(
        grid,
        vec![vec![0.0; m]],
        DMatrix::identity(m, m),
        vec![DMatrix::identity(m, m)],
        vec![1.0],
        n,
        None,
        Vec::new(),
    )
    .unwrap()
}

fn dgp_fit(n: usize, seed: u64, grid: &QuantileGrid) -> (Dataset, CoefficientProcess, FunctionalSpec) {
    let sample = generate_dgp(&DgpSpec::calibrated(n), seed).unwrap();
    let basis = make_basis(&BasisConfig::power(4), &sample.covariates).unwrap();
    let data = Dataset::new(sample.y, &basis.design_matrix(&sample.covariates)).unwrap();
    let proc = fit_process(&data, Some(&basis), grid).unwrap();
    let spec = FunctionalSpec::average_derivative(&basis, &sample.covariates, 0, &Measure::Empirical, grid.len()).unwrap();
    (data, proc, spec)
}

/// `⌈pB⌉`-th order statistic computed with exact rational arithmetic on the
/// level `p = num/den`.
fn quantile_oracle(values: &[f64], num: u64, den: u64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let b = v.len() as u64;
    let idx = (num * b).div_ceil(den).max(1);
    v[idx as usize - 1]
}

#[test]
fn sigma_with_identity_matrices() {
    let proc = identity_process(0.5, 100, 3);
    let s = sigma_hat(&proc, &[1.0, 0.0, 0.0], 0).unwrap();
    assert!((s - 0.05).abs() < 1e-15);
    let s3 = sigma_hat(&proc, &[3.0, 0.0, 0.0], 0).unwrap();
    assert!((s3 - 0.15).abs() < 1e-15);
    assert!(matches!(sigma_hat(&proc, &[0.0; 3], 0), Err(Error::DegenerateFunctional)));
}

#[test]
fn t_star_with_identity_matrices_is_the_scaled_coordinate() {
    let n = 100;
    let proc = identity_process(0.5, n, 2);
    let data = Dataset::from_rows(vec![0.0; n], (0..n).flat_map(|i| [1.0, i as f64 / 50.0]).collect(), 2).unwrap();
    let draws = draw_pivotal(&data, &proc, 40, 3).unwrap();
    let spec = FunctionalSpec::custom(vec![vec![0.0, 1.0]], 1).unwrap();
    let t = t_star_process(&proc, &draws, &spec).unwrap();
    let sigma = sigma_hat(&proc, &[0.0, 1.0], 0).unwrap();
    for b in 0..40 {
        let expected = draws.draw(b, 0)[1] / ((n as f64).sqrt() * sigma);
        assert!((t.draw(b)[0] - expected).abs() <= 1e-15 * expected.abs().max(1.0));
    }
}

#[test]
fn sigma_in_gaussian_location_model() {
    let (n, sd) = (5000, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let data = Dataset::from_rows(y, vec![1.0; n], 1).unwrap();
    let proc = fit_process(&data, None, &QuantileGrid::new(vec![0.5]).unwrap()).unwrap();
    let s = sigma_hat(&proc, &[1.0], 0).unwrap();
    let target = sd * (2.0 * std::f64::consts::PI).sqrt() * 0.5 / (n as f64).sqrt();
    assert!((s - target).abs() / target < 0.15, "{s} vs {target}");
}

#[test]
fn t_star_is_centered_and_studentized() {
    let grid = QuantileGrid::new(vec![0.3, 0.5, 0.7]).unwrap();
    let (data, proc, spec) = dgp_fit(400, 5, &grid);
    let b = 4000;
    let draws = draw_pivotal(&data, &proc, b, 6).unwrap();
    let t = t_star_process(&proc, &draws, &spec).unwrap();
    for p in 0..t.len() {
        let x: Vec<f64> = (0..b).map(|i| t.draw(i)[p]).collect();
        let mean = x.iter().sum::<f64>() / b as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / b as f64;
        assert!(mean.abs() < 3.0 * (var / b as f64).sqrt(), "mean {mean}");
        let se_var = ((m4 - var * var) / b as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se_var, "variance {var} (se {se_var})");
    }
}

#[test]
fn loading_scale_leaves_t_statistics_unchanged() {
    let grid = QuantileGrid::new(vec![0.25, 0.75]).unwrap();
    let (data, proc, spec) = dgp_fit(200, 7, &grid);
    let draws = draw_pivotal(&data, &proc, 200, 8).unwrap();
    let scaled = FunctionalSpec::custom(spec.loadings.iter().map(|l| l.iter().map(|v| 4.0 * v).collect()).collect(), grid.len()).unwrap();
    let t1 = t_star_process(&proc, &draws, &spec).unwrap();
    let t4 = t_star_process(&proc, &draws, &scaled).unwrap();
    for (a, b) in t1.draws_t.iter().zip(&t4.draws_t) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    let (th1, s1) = estimates(&proc, &spec).unwrap();
    let (th4, s4) = estimates(&proc, &scaled).unwrap();
    for p in 0..th1.len() {
        assert!((th4[p] - 4.0 * th1[p]).abs() <= 1e-12 * th1[p].abs().max(1.0));
        assert!((s4[p] - 4.0 * s1[p]).abs() <= 1e-12 * s1[p]);
    }
    let u1 = uniform_band(&t1, 0.1, true).unwrap();
    let u4 = uniform_band(&t4, 0.1, true).unwrap();
    assert!((u1.k[0] - u4.k[0]).abs() <= 1e-12 * u1.k[0]);
}

#[test]
fn uniform_band_contains_pointwise_and_orders_in_alpha() {
    let grid = QuantileGrid::new(vec![0.2, 0.4, 0.6, 0.8]).unwrap();
    let (data, proc, spec) = dgp_fit(300, 9, &grid);
    let draws = draw_pivotal(&data, &proc, 500, 10).unwrap();
    let t = t_star_process(&proc, &draws, &spec).unwrap();
    let uni = uniform_band(&t, 0.1, true).unwrap();
    let pw = pointwise_interval(&t, 0.1, CriticalValue::CouplingQuantile).unwrap();
    for p in 0..t.len() {
        assert!(uni.lower[p] <= pw.lower[p] && pw.upper[p] <= uni.upper[p]);
        assert_eq!(uni.c[p], uni.k[p] + uni.delta_n);
        assert_eq!(pw.c[p], pw.k[p]);
    }
    let mut last = f64::INFINITY;
    for alpha in [0.01, 0.05, 0.1, 0.2, 0.5] {
        let c = uniform_band(&t, alpha, true).unwrap().c[0];
        assert!(c <= last);
        last = c;
    }
}

#[test]
fn band_width_identity() {
    // dyadic inputs: every operation is exact
    let t = TStatProcess {
        index: vec![(0, 0), (1, 0)],
        theta_hat: vec![0.75, -1.5],
        sigma_hat: vec![0.25, 0.5],
        draws_t: (0..64).map(|i| f64::from(i % 8) / 4.0).collect(),
        b: 32,
        n: 64,
        method: Some(CouplingMethod::Pivotal),
    };
    let band = uniform_band(&t, 0.25, false).unwrap();
    for p in 0..2 {
        assert_eq!(band.upper[p] - band.lower[p], 2.0 * band.c[p] * band.sigma_hat[p]);
    }
    // general inputs: equal up to the rounding of one addition and subtraction
    let grid = QuantileGrid::new(vec![0.3, 0.6]).unwrap();
    let (data, proc, spec) = dgp_fit(200, 11, &grid);
    let draws = draw_pivotal(&data, &proc, 100, 12).unwrap();
    let band = uniform_band(&t_star_process(&proc, &draws, &spec).unwrap(), 0.1, true).unwrap();
    for p in 0..band.lower.len() {
        let width = 2.0 * band.c[p] * band.sigma_hat[p];
        let scale = band.theta_hat[p].abs() + width;
        assert!((band.upper[p] - band.lower[p] - width).abs() <= 4.0 * f64::EPSILON * scale);
    }
}

#[test]
fn degenerate_draws_give_that_critical_value() {
    let t = TStatProcess {
        index: vec![(0, 0)],
        theta_hat: vec![1.0],
        sigma_hat: vec![1.0],
        draws_t: vec![-1.7; 50],
        b: 50,
        n: 100,
        method: None,
    };
    let band = pointwise_interval(&t, 0.1, CriticalValue::CouplingQuantile).unwrap();
    assert_eq!(band.k[0], 1.7);
}

#[test]
fn delta_decreases_and_satisfies_the_rate_condition() {
    let ns = [100usize, 1_000, 10_000, 100_000, 1_000_000, 10_000_000, 100_000_000];
    for w in ns.windows(2) {
        let (a, b) = (w[0], w[1]);
        assert!(delta_n(b) < delta_n(a));
        let la = (a as f64).ln();
        let lb = (b as f64).ln();
        assert!(delta_n(b) * lb.sqrt() < delta_n(a) * la.sqrt());
        assert!(delta_n(b) * lb > delta_n(a) * la);
    }
    assert!((1.0 / (4.0 * 4f64.powf(0.75)) - 0.08839).abs() < 1e-5);
}

#[test]
fn too_few_draws_is_an_error() {
    let t = TStatProcess {
        index: vec![(0, 0)],
        theta_hat: vec![0.0],
        sigma_hat: vec![1.0],
        draws_t: vec![0.0; 9],
        b: 9,
        n: 100,
        method: None,
    };
    assert!(matches!(uniform_band(&t, 0.1, true), Err(Error::TooFewDraws { .. })));
    assert!(pointwise_interval(&t, 0.1, CriticalValue::NormalQuantile).is_ok());
}

#[test]
fn empirical_quantile_matches_rational_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let b = rng.random_range(1..300);
        let values: Vec<f64> = (0..b)
            .map(|_| if rng.random_bool(0.3) { rng.random_range(0..5) as f64 } else { rng.random() })
            .collect();
        let den = 100;
        let num = rng.random_range(1..den);
        let p = num as f64 / den as f64;
        assert_eq!(empirical_quantile(&values, p).unwrap(), quantile_oracle(&values, num, den), "p = {p}, B = {b}");
    }
}

#[test]
fn pointwise_coverage_at_the_median() {
    // coverage of the 90% pointwise interval for the average derivative at
    // u = 0.5, against the fixed-design truth
    let spec_dgp = DgpSpec::calibrated(300);
    let grid = QuantileGrid::new(vec![0.5]).unwrap();
    let base = generate_dgp(&spec_dgp, 14).unwrap();
    let truth = spec_dgp.empirical_average_derivative(&base.covariates);
    let basis = make_basis(&BasisConfig::power(6), &base.covariates).unwrap();
    let z = basis.design_matrix(&base.covariates);
    let spec = FunctionalSpec::average_derivative(&basis, &base.covariates, 0, &Measure::Empirical, 1).unwrap();
    let reps = 200;
    let mut covered = 0;
    for r in 0..reps {
        let mut rng = seriesqr::rng::substream(14, seriesqr::rng::Domain::Outcome, r);
        let y = spec_dgp.draw_outcomes(&base.covariates, &mut rng);
        let data = Dataset::new(y, &z).unwrap();
        let proc = fit_process(&data, Some(&basis), &grid).unwrap();
        let draws = draw_pivotal(&data, &proc, 300, r).unwrap();
        let t = t_star_process(&proc, &draws, &spec).unwrap();
        let band = pointwise_interval(&t, 0.1, CriticalValue::CouplingQuantile).unwrap();
        covered += usize::from(band.contains(&[truth]));
    }
    let rate = covered as f64 / reps as f64;
    // 4 binomial standard errors around 0.9
    assert!((rate - 0.9).abs() < 4.0 * (0.09 / reps as f64).sqrt(), "coverage {rate}");
}

proptest! {
    #[test]
    fn quantile_is_an_order_statistic_with_the_right_cdf(
        values in proptest::collection::vec(-1e6f64..1e6, 1..200),
        p in 0.001f64..0.999,
    ) {
        let q = empirical_quantile(&values, p).unwrap();
        prop_assert!(values.contains(&q));
        let b = values.len() as f64;
        let at_or_below = values.iter().filter(|v| **v <= q).count() as f64;
        let below = values.iter().filter(|v| **v < q).count() as f64;
        prop_assert!(at_or_below / b >= p - 1e-9);
        prop_assert!(below / b < p + 1e-9);
    }
}
