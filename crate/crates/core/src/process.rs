//! The quantile regression coefficient process over a grid, with the Gram
//! matrix `Σ̂ = E_n[Z Z']` and Powell estimates of the Jacobians `J(u)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{sample_quantile, BasisSpec};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, EIGEN_FLOOR};
use crate::normal;
use crate::solver::{self, certificate, Dataset, SolveOptions};

/// Strictly increasing quantile indices inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileGrid {
    points: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("quantile grid is empty"));
        }
        if points.iter().any(|u| !(*u > 0.0 && *u < 1.0)) {
            return Err(invalid("quantile grid points must lie in (0, 1)"));
        }
        if points.windows(2).any(|p| p[0] >= p[1]) {
            return Err(invalid("quantile grid must be strictly increasing"));
        }
        Ok(Self { points })
    }

    /// `lo, lo + step, ..., hi` computed as `(a + i) / denom` to avoid drift.
    pub fn uniform(lo_num: u32, hi_num: u32, denom: u32) -> Result<Self> {
        Self::new(
            (lo_num..=hi_num)
                .map(|k| f64::from(k) / f64::from(denom))
                .collect(),
        )
    }

    /// The grid `0.10, 0.11, ..., 0.90` (81 points).
    pub fn default_grid() -> Self {
        Self::uniform(10, 90, 100).expect("static grid")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point equal to `u` (within 1e-12).
    pub fn index_of(&self, u: f64) -> Option<usize> {
        self.points.iter().position(|p| (p - u).abs() <= 1e-12)
    }
}

impl TryFrom<Vec<f64>> for QuantileGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileGrid> for Vec<f64> {
    fn from(g: QuantileGrid) -> Self {
        g.points
    }
}

/// Per-quantile solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub objective: f64,
    pub n_interpolated: usize,
    pub certificate: f64,
    pub certificate_bound: f64,
    pub basis: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessOptions {
    /// Level entering the Hall-Sheather bandwidth.
    pub bandwidth_alpha: f64,
    /// Warm-start each grid point from the previous vertex.
    pub warm_start: bool,
}

impl Default for ProcessOptions {
    fn default() -> Self {
        Self {
            bandwidth_alpha: 0.05,
            warm_start: true,
        }
    }
}

/// `β̂(u)` over a grid together with `Σ̂`, `Ĵ(u)` and the bandwidths used.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProcess {
    pub grid: QuantileGrid,
    /// One row per grid point.
    pub betas: Vec<Vec<f64>>,
    pub gram: DMatrix<f64>,
    pub jacobians: Vec<DMatrix<f64>>,
    /// Residual-scale Powell bandwidths.
    pub bandwidths: Vec<f64>,
    pub n: usize,
    pub basis: Option<BasisSpec>,
    pub diagnostics: Vec<FitDiagnostics>,
    jacobian_inverses: Vec<DMatrix<f64>>,
}

impl CoefficientProcess {
    /// Assembles a process from stored parts (e.g. a reloaded artifact).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: QuantileGrid,
        betas: Vec<Vec<f64>>,
        gram: DMatrix<f64>,
        jacobians: Vec<DMatrix<f64>>,
        bandwidths: Vec<f64>,
        n: usize,
        basis: Option<BasisSpec>,
        diagnostics: Vec<FitDiagnostics>,
    ) -> Result<Self> {
        let g = grid.len();
        let m = gram.nrows();
        if betas.len() != g || jacobians.len() != g || bandwidths.len() != g {
            return Err(Error::GridMismatch(format!(
                "grid has {g} points but process parts have {}/{}/{} entries",
                betas.len(),
                jacobians.len(),
                bandwidths.len()
            )));
        }
        if gram.ncols() != m
            || betas.iter().any(|b| b.len() != m)
            || jacobians.iter().any(|j| j.shape() != (m, m))
        {
            return Err(invalid("inconsistent process dimensions"));
        }
        let jacobian_inverses = jacobians
            .iter()
            .map(|j| linalg::floored_inverse(j, EIGEN_FLOOR))
            .collect();
        Ok(Self {
            grid,
            betas,
            gram,
            jacobians,
            bandwidths,
            n,
            basis,
            diagnostics,
            jacobian_inverses,
        })
    }

    pub fn m(&self) -> usize {
        self.gram.nrows()
    }

    /// `Ĵ⁻¹(u_k)` after flooring the eigenvalues at `1e-10 · trace / m`.
    pub fn jacobian_inverse(&self, k: usize) -> &DMatrix<f64> {
        &self.jacobian_inverses[k]
    }

    /// Largest certificate-to-bound ratio over the grid (≤ 1 when all hold).
    pub fn max_certificate_ratio(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.certificate / d.certificate_bound)
            .fold(0.0, f64::max)
    }
}

/// `Σ̂ = (1/n) Z'Z` (unweighted), exactly symmetric.
pub fn estimate_gram(data: &Dataset) -> DMatrix<f64> {
    gram_over(data, |_| true)
}

fn gram_over(data: &Dataset, keep: impl Fn(usize) -> bool) -> DMatrix<f64> {
    let m = data.m();
    let mut g = DMatrix::<f64>::zeros(m, m);
    for i in 0..data.n() {
        if !keep(i) {
            continue;
        }
        let row = data.row(i);
        for j in 0..m {
            for k in 0..=j {
                g[(j, k)] += row[j] * row[k];
            }
        }
    }
    let n = data.n() as f64;
    for j in 0..m {
        for k in 0..=j {
            g[(j, k)] /= n;
            g[(k, j)] = g[(j, k)];
        }
    }
    g
}

/// Hall-Sheather bandwidth on the quantile scale,
/// `n^{-1/3} z_{1−α/2}^{2/3} [1.5 φ(Φ⁻¹(u))² / (2Φ⁻¹(u)² + 1)]^{1/3}`,
/// clipped so that `[u − h, u + h] ⊂ (0, 1)`.
pub fn hall_sheather_bandwidth(u: f64, n: usize, alpha: f64) -> f64 {
    let x = normal::quantile(u);
    let f = normal::pdf(x);
    let z = normal::quantile(1.0 - alpha / 2.0);
    let h = (n as f64).powf(-1.0 / 3.0)
        * z.powf(2.0 / 3.0)
        * (1.5 * f * f / (2.0 * x * x + 1.0)).powf(1.0 / 3.0);
    h.min(0.999 * u.min(1.0 - u))
}

/// Converts a quantile-scale bandwidth to the residual scale the Powell
/// window needs: `(Φ⁻¹(u+h) − Φ⁻¹(u−h)) · min(sd(r), IQR(r)/1.34)`.
pub fn residual_bandwidth(u: f64, h: f64, residuals: &[f64]) -> f64 {
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = sample_quantile(&sorted, 0.75) - sample_quantile(&sorted, 0.25);
    let sd = var.sqrt();
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        _ => iqr / 1.34,
    };
    (normal::quantile(u + h) - normal::quantile(u - h)) * spread
}

/// Powell estimate `Ĵ(u) = (1/2h) E_n[1{|Y − Z'β| ≤ h} Z Z']`.
pub fn estimate_jacobian(data: &Dataset, beta: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("bandwidth must be positive, got {h}")));
    }
    let inside: Vec<bool> = (0..data.n())
        .map(|i| (data.y()[i] - data.fitted(i, beta)).abs() <= h)
        .collect();
    if !inside.iter().any(|b| *b) {
        return Err(Error::EmptyPowellWindow { h });
    }
    let mut j = gram_over(data, |i| inside[i]);
    let two_h = 2.0 * h;
    j.iter_mut().for_each(|v| *v /= two_h);
    Ok(j)
}

/// Fits `β̂(u)` at every grid point and estimates `Σ̂` and `Ĵ(u)`.
pub fn fit_process(data: &Dataset, basis: Option<&BasisSpec>, grid: &QuantileGrid) -> Result<CoefficientProcess> {
    fit_process_with(data, basis, grid, &ProcessOptions::default())
}

pub fn fit_process_with(
    data: &Dataset,
    basis: Option<&BasisSpec>,
    grid: &QuantileGrid,
    opts: &ProcessOptions,
) -> Result<CoefficientProcess> {
    if let Some(b) = basis {
        if b.m() != data.m() {
            return Err(invalid(format!(
                "basis has {} terms but the design has {} columns",
                b.m(),
                data.m()
            )));
        }
    }
    let data = data.unweighted();
    let n = data.n();
    let mut betas = Vec::with_capacity(grid.len());
    let mut jacobians = Vec::with_capacity(grid.len());
    let mut bandwidths = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());
    let mut warm: Option<Vec<usize>> = None;
    for &u in grid.points() {
        let sopts = SolveOptions {
            warm_start: if opts.warm_start { warm.take() } else { None },
            ..SolveOptions::default()
        };
        let fit = solver::solve_qr_with(&data, u, None, &sopts)?;
        let cert = certificate(&fit, &data);
        let resid: Vec<f64> = (0..n).map(|i| data.y()[i] - data.fitted(i, &fit.beta)).collect();
        let hu = hall_sheather_bandwidth(u, n, opts.bandwidth_alpha);
        let h = residual_bandwidth(u, hu, &resid);
        jacobians.push(estimate_jacobian(&data, &fit.beta, h)?);
        bandwidths.push(h);
        diagnostics.push(FitDiagnostics {
            objective: fit.objective,
            n_interpolated: fit.n_interpolated,
            certificate: cert.value,
            certificate_bound: cert.bound,
            basis: fit.basis.clone(),
        });
        warm = Some(fit.basis.clone());
        betas.push(fit.beta);
    }
    CoefficientProcess::from_parts(
        grid.clone(),
        betas,
        estimate_gram(&data),
        jacobians,
        bandwidths,
        n,
        basis.cloned(),
        diagnostics,
    )
}
