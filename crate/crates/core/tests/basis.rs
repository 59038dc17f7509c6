use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seriesqr::basis::{bspline_values, KnotTiePolicy};
use seriesqr::{make_basis, BasisConfig, Error, Measure};

/// Textbook Cox–de Boor recursion with the right-closed convention at the
/// last knot.
fn cox_de_boor(knots: &[f64], i: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        let last = knots[knots.len() - 1];
        let inside = knots[i] <= x && x < knots[i + 1];
        let at_end = x == last && knots[i] < knots[i + 1] && knots[i + 1] == last;
        return if inside || at_end { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        v += (x - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, x);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, i + 1, p - 1, x);
    }
    v
}

fn uniform_sample(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| vec![rng.random_range(lo..hi)]).collect()
}

fn quartile_spline(seed: u64) -> seriesqr::BasisSpec {
    make_basis(&BasisConfig::quartile_bspline(), &uniform_sample(seed, 500, 0.0, 0.5)).unwrap()
}

#[test]
fn linear_basis_values_and_derivative() {
    let b = make_basis(&BasisConfig::linear(), &uniform_sample(1, 20, 0.0, 1.0)).unwrap();
    assert_eq!(b.m(), 2);
    assert_eq!(b.eval(&[0.3]), vec![1.0, 0.3]);
    assert_eq!(b.eval_derivative(&[0.7], 0).unwrap(), vec![0.0, 1.0]);
    let ell = b
        .average_derivative_loading(&uniform_sample(2, 30, 0.0, 1.0), 0, &Measure::Empirical)
        .unwrap();
    assert!((ell[0]).abs() < 1e-15 && (ell[1] - 1.0).abs() < 1e-12);
}

#[test]
fn raw_power_values_and_derivative() {
    let b = make_basis(&BasisConfig::raw_power(2), &uniform_sample(3, 20, -1.0, 1.0)).unwrap();
    assert_eq!(b.eval(&[0.0]), vec![1.0, 0.0, 0.0]);
    assert_eq!(b.eval_derivative(&[0.5], 0).unwrap(), vec![0.0, 1.0, 1.0]);
}

#[test]
fn derivative_index_out_of_range() {
    let b = make_basis(&BasisConfig::linear(), &uniform_sample(4, 10, 0.0, 1.0)).unwrap();
    assert!(matches!(b.eval_derivative(&[0.1], 1), Err(Error::CovariateOutOfRange { .. })));
}

#[test]
fn spline_knots_sit_at_sample_quartiles() {
    let sample = uniform_sample(5, 5001, 0.0, 1.0);
    let b = make_basis(&BasisConfig::quartile_bspline(), &sample).unwrap();
    let knots = b.knots.clone().unwrap();
    let mut w: Vec<f64> = sample.iter().map(|x| x[0]).collect();
    w.sort_by(f64::total_cmp);
    // 5001 points: the quartiles are order statistics 1250, 2500, 3750
    assert_eq!(&knots[4..7], &[w[1250], w[2500], w[3750]]);
    assert_eq!(knots[0], w[0]);
    assert_eq!(knots[knots.len() - 1], w[5000]);
    // intercept plus 7 - 1 spline functions
    assert_eq!(b.m(), 7);
}

#[test]
fn spline_matches_cox_de_boor_and_sums_to_one() {
    let b = quartile_spline(6);
    let knots = b.knots.clone().unwrap();
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let x = rng.random_range(lo..hi);
        let vals = bspline_values(&knots, x);
        let sum: f64 = vals.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12, "sum {sum} at {x}");
        for (i, v) in vals.iter().enumerate() {
            let oracle = cox_de_boor(&knots, i, 3, x);
            assert!((v - oracle).abs() < 1e-12, "B_{i}({x}) = {v} vs {oracle}");
        }
    }
}

#[test]
fn derivatives_match_central_differences() {
    let bases = [
        quartile_spline(8),
        make_basis(&BasisConfig::power(6), &uniform_sample(9, 400, 0.0, 0.5)).unwrap(),
        make_basis(&BasisConfig::power(3).with_extra_linear(2), &{
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            (0..100)
                .map(|_| vec![rng.random_range(0.0..1.0), rng.random(), rng.random()])
                .collect::<Vec<_>>()
        })
        .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let step = 1e-5;
    for b in &bases {
        let [lo, hi] = b.covariate_ranges[0];
        for _ in 0..20 {
            let mut x: Vec<f64> = b.covariate_ranges.iter().map(|r| rng.random_range(r[0]..r[1])).collect();
            x[0] = rng.random_range(lo + 2.0 * step..hi - 2.0 * step);
            for k in 0..b.dim() {
                let d = b.eval_derivative(&x, k).unwrap();
                let (mut up, mut down) = (x.clone(), x.clone());
                up[k] += step;
                down[k] -= step;
                let (fu, fd) = (b.eval(&up), b.eval(&down));
                for j in 0..b.m() {
                    let fd_est = (fu[j] - fd[j]) / (2.0 * step);
                    let scale = d[j].abs().max(1.0);
                    assert!(
                        (fd_est - d[j]).abs() <= 1e-6 * scale,
                        "term {j}, coordinate {k}: {} vs {fd_est}",
                        d[j]
                    );
                }
            }
        }
    }
}

#[test]
fn orthogonal_polynomials_are_orthonormal_under_the_uniform_law() {
    let b = make_basis(&BasisConfig::power(6), &uniform_sample(12, 50_000, -1.0, 1.0)).unwrap();
    assert_eq!(b.m(), 7);
    // midpoint rule on a fine grid of [-1, 1] against the uniform density
    let nodes = 20_000;
    let mut gram = vec![vec![0.0; 7]; 7];
    for i in 0..nodes {
        let x = -1.0 + (2.0 * i as f64 + 1.0) / nodes as f64;
        let z = b.eval(&[x]);
        for r in 0..7 {
            for c in 0..7 {
                gram[r][c] += z[r] * z[c] / nodes as f64;
            }
        }
    }
    for r in 0..7 {
        for c in 0..7 {
            let target = if r == c { 1.0 } else { 0.0 };
            assert!((gram[r][c] - target).abs() < 0.05, "G[{r}][{c}] = {}", gram[r][c]);
        }
    }
}

#[test]
fn zeta_bounds_the_series_norm() {
    let bases = [
        quartile_spline(13),
        make_basis(&BasisConfig::power(6), &uniform_sample(14, 300, 0.0, 0.5)).unwrap(),
        make_basis(&BasisConfig::linear(), &uniform_sample(15, 300, -2.0, 3.0)).unwrap(),
    ];
    for b in &bases {
        let [lo, hi] = b.covariate_ranges[0];
        for i in 0..10_001 {
            let x = lo + (hi - lo) * i as f64 / 10_000.0;
            let norm = b.eval(&[x]).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= b.zeta * (1.0 + 1e-12), "{norm} > {}", b.zeta);
        }
    }
}

#[test]
fn design_gram_is_positive_definite() {
    for (seed, cfg) in [(16, BasisConfig::quartile_bspline()), (17, BasisConfig::power(6))] {
        let sample = uniform_sample(seed, 200, 0.0, 0.5);
        let b = make_basis(&cfg, &sample).unwrap();
        let z = b.design_matrix(&sample);
        let g = z.transpose() * &z / 200.0;
        assert!((&g - g.transpose()).abs().max() < 1e-14);
        let eig = seriesqr::linalg::sym_eigenvalues(&g);
        assert!(eig.iter().all(|e| *e > 0.0), "{eig:?}");
    }
}

#[test]
fn degenerate_sample_knot_ties() {
    // most mass on one value: the interior quartiles coincide
    let mut sample: Vec<Vec<f64>> = vec![vec![1.0]; 90];
    sample.extend((0..10).map(|i| vec![i as f64 / 5.0]));
    let mut cfg = BasisConfig::quartile_bspline();
    let nudged = make_basis(&cfg, &sample).unwrap();
    let knots = nudged.knots.clone().unwrap();
    assert!(knots[3..knots.len() - 3].windows(2).all(|w| w[0] < w[1]));
    cfg.knot_ties = KnotTiePolicy::Error;
    match make_basis(&cfg, &sample) {
        Err(Error::DuplicateKnots { quantiles, .. }) => assert_eq!(quantiles, vec![0.25, 0.5]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn extrapolation_is_flagged() {
    let b = make_basis(&BasisConfig::power(2), &uniform_sample(18, 50, 0.0, 1.0)).unwrap();
    assert!(!b.eval_flagged(&[0.5]).extrapolated);
    assert!(b.eval_flagged(&[1.5]).extrapolated);
}

#[test]
fn conditional_measure_renormalizes_on_the_slice() {
    let sample = vec![vec![0.1, 0.0], vec![0.2, 1.0], vec![0.3, 1.0], vec![0.4, 0.0]];
    match Measure::slice(&sample, 1, 1.0, 0.0).unwrap() {
        Measure::Weights(w) => assert_eq!(w, vec![0.0, 0.5, 0.5, 0.0]),
        other => panic!("{other:?}"),
    }
    let b = make_basis(&BasisConfig::linear().with_extra_linear(1), &sample).unwrap();
    let bad = Measure::Weights(vec![0.5, 0.5, 0.5, 0.0]);
    assert!(matches!(
        b.average_derivative_loading(&sample, 0, &bad),
        Err(Error::WeightsNotNormalized { .. })
    ));
}

proptest! {
    #[test]
    fn partition_of_unity_for_random_knots(
        mut interior in proptest::collection::vec(0.01f64..0.99, 1..6),
        x in 0.0f64..1.0,
    ) {
        interior.sort_by(f64::total_cmp);
        interior.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let mut knots = vec![0.0; 4];
        knots.extend(&interior);
        knots.extend([1.0; 4]);
        let vals = bspline_values(&knots, x);
        prop_assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(vals.iter().all(|v| *v >= -1e-15));
        for (i, v) in vals.iter().enumerate() {
            prop_assert!((v - cox_de_boor(&knots, i, 3, x)).abs() < 1e-12);
        }
    }
}
