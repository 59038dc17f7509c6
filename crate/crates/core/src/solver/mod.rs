//! Weighted, linearly perturbed quantile regression at a single quantile.
//!
//! The problem solved is
//!
//! ```text
//! minimize   (1/n) Σ_i w_i ρ_u(y_i − z_i'β) − p'β / √n
//! ```
//!
//! where `ρ_u(z) = (u − 1{z<0}) z` and `p` is an optional perturbation
//! vector (the gradient bootstrap supplies `p = 𝕌*(u)`). The solver runs a
//! primal-dual interior point method on the dual LP, crosses over to a basic
//! solution interpolating `m` observations, and finishes with exact
//! edge-descent pivots. The returned coefficients are therefore always a
//! vertex of the LP and `n_interpolated` is well defined.

mod ipm;
mod vertex;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Residuals within this multiple of the response scale count as zero.
pub const INTERPOLATION_TOL: f64 = 1e-9;

/// Check function `ρ_u(z) = (u − 1{z<0}) z`.
pub fn check_loss(z: f64, u: f64) -> f64 {
    if z < 0.0 {
        (u - 1.0) * z
    } else {
        u * z
    }
}

/// Responses, design rows and optional observation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    /// Row-major `n x m`.
    z: Vec<f64>,
    m: usize,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, z: &DMatrix<f64>) -> Result<Self> {
        let (n, m) = z.shape();
        let mut rows = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                rows.push(z[(i, j)]);
            }
        }
        Self::from_rows(y, rows, m)
    }

    /// Builds a dataset from a row-major design buffer.
    pub fn from_rows(y: Vec<f64>, z: Vec<f64>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("design has no columns"));
        }
        if z.len() != y.len() * m {
            return Err(invalid(format!(
                "design has {} entries, expected {} x {m}",
                z.len(),
                y.len()
            )));
        }
        if y.len() < m {
            return Err(invalid(format!("n = {} is smaller than m = {m}", y.len())));
        }
        if y.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        Ok(Self {
            y,
            z,
            m,
            weights: None,
        })
    }

    /// Same data with observation weights (all strictly positive).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n() {
            return Err(invalid("weight vector length differs from n"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("weights must be finite and positive"));
        }
        Ok(Self {
            weights: Some(weights),
            ..self.clone()
        })
    }

    /// Same data without weights.
    pub fn unweighted(&self) -> Self {
        Self {
            weights: None,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.m..(i + 1) * self.m]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), self.m, &self.z)
    }

    /// Appends one observation (used by the augmented-observation bootstrap).
    pub fn augmented(&self, y: f64, z: &[f64], weight: f64) -> Result<Self> {
        if z.len() != self.m {
            return Err(invalid("augmented row has the wrong length"));
        }
        let mut out = self.clone();
        out.y.push(y);
        out.z.extend_from_slice(z);
        if let Some(w) = out.weights.as_mut() {
            w.push(weight);
        } else if weight != 1.0 {
            let mut w = vec![1.0; self.n()];
            w.push(weight);
            out.weights = Some(w);
        }
        Ok(out)
    }

    pub(crate) fn fitted(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    pub(crate) fn response_scale(&self) -> f64 {
        let s = self.y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// `ζ̂ = max_i ‖w_i Z_i‖`.
    pub fn max_weighted_row_norm(&self) -> f64 {
        (0..self.n())
            .map(|i| self.weight(i) * self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Result of one quantile regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrFit {
    pub beta: Vec<f64>,
    pub u: f64,
    /// Attained value of the (weighted, perturbed) mean objective.
    pub objective: f64,
    pub n_interpolated: usize,
    pub perturbation: Option<Vec<f64>>,
    /// Indices of the `m` observations interpolated by the returned vertex.
    pub basis: Vec<usize>,
}

/// Solver tuning. The defaults match the documented behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative duality-gap tolerance of the interior point phase.
    pub gap_tol: f64,
    pub max_ipm_iter: usize,
    /// Start the vertex phase from this basis and skip the interior point phase.
    pub warm_start: Option<Vec<usize>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-10,
            max_ipm_iter: 200,
            warm_start: None,
        }
    }
}

fn check_u(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("quantile index {u} outside (0, 1)")))
    }
}

/// Mean objective `(1/n) Σ w_i ρ_u(y_i − z_i'β) − p'β/√n`.
pub fn objective(data: &Dataset, u: f64, beta: &[f64], perturbation: Option<&[f64]>) -> f64 {
    let n = data.n() as f64;
    let loss: f64 = (0..data.n())
        .map(|i| data.weight(i) * check_loss(data.y[i] - data.fitted(i, beta), u))
        .sum();
    let lin = perturbation.map_or(0.0, |p| p.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>());
    loss / n - lin / n.sqrt()
}

fn finish(data: &Dataset, u: f64, beta: Vec<f64>, basis: Vec<usize>, p: Option<&[f64]>) -> QrFit {
    let tol = INTERPOLATION_TOL * data.response_scale();
    let n_interpolated = (0..data.n())
        .filter(|&i| (data.y[i] - data.fitted(i, &beta)).abs() <= tol)
        .count();
    QrFit {
        objective: objective(data, u, &beta, p),
        beta,
        u,
        n_interpolated,
        perturbation: p.map(<[f64]>::to_vec),
        basis,
    }
}

/// Solves the quantile regression at `u`, optionally with a linear perturbation.
pub fn solve_qr(data: &Dataset, u: f64, perturbation: Option<&[f64]>) -> Result<QrFit> {
    solve_qr_with(data, u, perturbation, &SolveOptions::default())
}

pub fn solve_qr_with(
    data: &Dataset,
    u: f64,
    perturbation: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<QrFit> {
    check_u(u)?;
    if let Some(p) = perturbation {
        if p.len() != data.m() || p.iter().any(|v| !v.is_finite()) {
            return Err(invalid("perturbation must be a finite m-vector"));
        }
    }
    // sum-scale linear term
    let sqrt_n = (data.n() as f64).sqrt();
    let c: Vec<f64> = match perturbation {
        Some(p) => p.iter().map(|v| v * sqrt_n).collect(),
        None => vec![0.0; data.m()],
    };

    let start = match opts.warm_start.as_deref() {
        Some(h) if vertex::valid_basis(data, h) => h.to_vec(),
        _ => {
            linalg::check_full_column_rank(&data.design())?;
            let ipm = ipm::solve(data, u, &c, opts.gap_tol, opts.max_ipm_iter)?;
            vertex::crossover(data, &ipm.beta).ok_or_else(|| {
                // a full-rank design always admits m independent rows
                Error::NoConvergence {
                    iterations: ipm.iterations,
                    gap: ipm.gap,
                }
            })?
        }
    };
    let (beta, basis) = vertex::descend(data, u, &c, start)?;
    Ok(finish(data, u, beta, basis, perturbation))
}

/// Exhaustive search over all `m`-subsets of observations (test oracle).
///
/// Every vertex of the LP interpolates `m` observations, so the minimum over
/// exact-interpolation fits is the global minimum. Limited to `n ≤ 15, m ≤ 3`.
pub fn brute_force_oracle(data: &Dataset, u: f64, perturbation: Option<&[f64]>) -> Result<QrFit> {
    check_u(u)?;
    let (n, m) = (data.n(), data.m());
    if n > 15 || m > 3 {
        return Err(invalid("brute-force oracle limited to n <= 15, m <= 3"));
    }
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        let a = DMatrix::from_fn(m, m, |r, c| data.row(subset[r])[c]);
        let b = nalgebra::DVector::from_iterator(m, subset.iter().map(|&i| data.y[i]));
        if a.determinant().abs() > 1e-12 {
            if let Some(beta) = linalg::solve_square(&a, &b) {
                let beta: Vec<f64> = beta.iter().copied().collect();
                let obj = objective(data, u, &beta, perturbation);
                if best.as_ref().is_none_or(|(o, _, _)| obj < *o) {
                    best = Some((obj, beta, subset.clone()));
                }
            }
        }
        // next combination in lexicographic order
        let mut k = m;
        while k > 0 && subset[k - 1] == n - m + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        subset[k - 1] += 1;
        for j in k..m {
            subset[j] = subset[j - 1] + 1;
        }
    }
    let (_, beta, basis) = best.ok_or(Error::RankDeficient {
        column: m - 1,
        span: (0..m - 1).collect(),
    })?;
    Ok(finish(data, u, beta, basis, perturbation))
}

/// Subgradient certificate `√n ‖E_n[w_i Z_i (1{Y_i ≤ Z_i'β} − u)] + A_n‖` with
/// `A_n = −p/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub value: f64,
    /// `m ζ̂ / √n` with `ζ̂ = max_i ‖w_i Z_i‖`.
    pub bound: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.value <= self.bound
    }
}

pub fn certificate(fit: &QrFit, data: &Dataset) -> Certificate {
    let (n, m) = (data.n(), data.m());
    let nf = n as f64;
    let mut grad = vec![0.0; m];
    for i in 0..n {
        let ind = if data.y[i] <= data.fitted(i, &fit.beta) {
            1.0
        } else {
            0.0
        };
        let s = data.weight(i) * (ind - fit.u);
        for (g, z) in grad.iter_mut().zip(data.row(i)) {
            *g += s * z;
        }
    }
    let a_n = fit.perturbation.as_deref();
    let norm = grad
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let v = g / nf - a_n.map_or(0.0, |p| p[j] / nf.sqrt());
            v * v
        })
        .sum::<f64>()
        .sqrt();
    Certificate {
        value: nf.sqrt() * norm,
        bound: m as f64 * data.max_weighted_row_norm() / nf.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept_only(y: &[f64]) -> Dataset {
        Dataset::from_rows(y.to_vec(), vec![1.0; y.len()], 1).unwrap()
    }

    #[test]
    fn check_loss_values() {
        assert_eq!(check_loss(0.0, 0.3), 0.0);
        assert_eq!(check_loss(2.0, 0.5), 1.0);
        assert_eq!(check_loss(-2.0, 0.25), 1.5);
    }

    #[test]
    fn order_statistic_quantile() {
        let fit = solve_qr(&intercept_only(&[1.0, 2.0, 3.0, 4.0, 5.0]), 0.25, None).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
        assert_eq!(fit.n_interpolated, 1);
    }

    #[test]
    fn sample_median() {
        let data = intercept_only(&[3.0, 1.0, 2.0]);
        let fit = solve_qr(&data, 0.5, None).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
        let oracle = brute_force_oracle(&data, 0.5, None).unwrap();
        assert_eq!(oracle.beta, vec![2.0]);
        // ρ(1−2) + ρ(3−2) = 0.5 + 0.5, averaged over n = 3
        assert!((oracle.objective * 3.0 - 1.0).abs() < 1e-15);
        assert!(certificate(&fit, &data).holds());
    }

    #[test]
    fn zero_perturbation_is_the_unperturbed_problem() {
        let data = intercept_only(&[0.3, 1.7, -0.2, 0.9, 2.2, 1.1]);
        let a = solve_qr(&data, 0.4, None).unwrap();
        let b = solve_qr(&data, 0.4, Some(&[0.0])).unwrap();
        assert_eq!(a.objective, b.objective);
        let oa = brute_force_oracle(&data, 0.4, None).unwrap();
        let ob = brute_force_oracle(&data, 0.4, Some(&[0.0])).unwrap();
        assert_eq!(oa.beta, ob.beta);
    }

    #[test]
    fn rank_deficient_design_is_reported() {
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let data = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], &z).unwrap();
        assert!(matches!(
            solve_qr(&data, 0.5, None),
            Err(Error::RankDeficient { column: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = intercept_only(&[1.0, 2.0]);
        assert!(solve_qr(&data, 0.0, None).is_err());
        assert!(solve_qr(&data, 1.0, None).is_err());
        assert!(data.with_weights(vec![1.0, 0.0]).is_err());
        assert!(Dataset::from_rows(vec![1.0], vec![1.0, 2.0], 2).is_err());
        assert!(Dataset::from_rows(vec![f64::NAN, 1.0], vec![1.0, 1.0], 1).is_err());
    }

    #[test]
    fn weighted_median_follows_weights() {
        let data = intercept_only(&[1.0, 2.0, 3.0])
            .with_weights(vec![5.0, 1.0, 1.0])
            .unwrap();
        let fit = solve_qr(&data, 0.5, None).unwrap();
        assert_eq!(fit.beta, vec![1.0]);
    }
}
