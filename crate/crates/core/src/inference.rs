//! Linear functionals `θ̂(u, w) = ℓ(w)'β̂(u)`, their standard errors, and
//! pointwise or uniform confidence statements built from coupled draws.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, Measure};
use crate::coupling::{CouplingMethod, ProcessDraws};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::normal;
use crate::process::CoefficientProcess;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Value,
    Derivative,
    AverageDerivative,
    ConditionalAverageDerivative,
    /// Loadings supplied directly.
    Custom,
}

/// Loadings `ℓ(w)` and the index set `I` of `(grid index, loading index)`
/// pairs over which they are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    pub k: Option<usize>,
    /// The `w` value attached to each loading (a point, or the conditioning
    /// value; empty for unconditional averages).
    pub labels: Vec<Vec<f64>>,
    pub loadings: Vec<Vec<f64>>,
    pub index: Vec<(usize, usize)>,
}

impl FunctionalSpec {
    /// Product index set: every grid point with every loading.
    pub fn new(kind: FunctionalKind, k: Option<usize>, labels: Vec<Vec<f64>>, loadings: Vec<Vec<f64>>, grid_len: usize) -> Result<Self> {
        if loadings.is_empty() || grid_len == 0 {
            return Err(invalid("the index set must be non-empty"));
        }
        let m = loadings[0].len();
        if loadings.iter().any(|l| l.len() != m) {
            return Err(invalid("loadings must share one length"));
        }
        let index = (0..grid_len)
            .flat_map(|g| (0..loadings.len()).map(move |j| (g, j)))
            .collect();
        Ok(Self {
            kind,
            k,
            labels,
            loadings,
            index,
        })
    }

    pub fn custom(loadings: Vec<Vec<f64>>, grid_len: usize) -> Result<Self> {
        let labels = vec![Vec::new(); loadings.len()];
        Self::new(FunctionalKind::Custom, None, labels, loadings, grid_len)
    }

    /// `ℓ(w) = Z(w)`: the conditional quantile function at each point.
    pub fn value(basis: &BasisSpec, points: &[Vec<f64>], grid_len: usize) -> Result<Self> {
        if let Some(x) = points.iter().find(|x| x.len() != basis.dim()) {
            return Err(invalid(format!("point has {} coordinates, basis expects {}", x.len(), basis.dim())));
        }
        let loadings = points.iter().map(|x| basis.eval(x)).collect();
        Self::new(FunctionalKind::Value, None, points.to_vec(), loadings, grid_len)
    }

    /// `ℓ(w) = ∂_{x_k} Z(w)`.
    pub fn derivative(basis: &BasisSpec, points: &[Vec<f64>], k: usize, grid_len: usize) -> Result<Self> {
        let loadings = points
            .iter()
            .map(|x| basis.eval_derivative(x, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(FunctionalKind::Derivative, Some(k), points.to_vec(), loadings, grid_len)
    }

    /// `ℓ = ∫ ∂_{x_k} Z(x) dμ(x)`.
    pub fn average_derivative(basis: &BasisSpec, sample: &[Vec<f64>], k: usize, measure: &Measure, grid_len: usize) -> Result<Self> {
        let l = basis.average_derivative_loading(sample, k, measure)?;
        Self::new(FunctionalKind::AverageDerivative, Some(k), vec![Vec::new()], vec![l], grid_len)
    }

    /// Average derivative in `x_k` over the sample points whose coordinate
    /// `coord` lies within `tol` of each conditioning value.
    pub fn conditional_average_derivative(
        basis: &BasisSpec,
        sample: &[Vec<f64>],
        k: usize,
        coord: usize,
        values: &[f64],
        tol: f64,
        grid_len: usize,
    ) -> Result<Self> {
        let loadings = values
            .iter()
            .map(|&v| {
                let mu = Measure::slice(sample, coord, v, tol)?;
                basis.average_derivative_loading(sample, k, &mu)
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = values.iter().map(|v| vec![*v]).collect();
        Self::new(FunctionalKind::ConditionalAverageDerivative, Some(k), labels, loadings, grid_len)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// `σ̂ = √(u(1−u) ℓ'Ĵ⁻¹Σ̂Ĵ⁻¹ℓ / n)` at grid point `k`.
pub fn sigma_hat(proc: &CoefficientProcess, ell: &[f64], k: usize) -> Result<f64> {
    if ell.len() != proc.m() {
        return Err(invalid("loading length differs from the number of terms"));
    }
    if ell.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateFunctional);
    }
    let u = proc.grid.points()[k];
    let a = linalg::mat_vec(proc.jacobian_inverse(k), ell);
    let q = linalg::quad_form(&proc.gram, &a, &a);
    let s2 = u * (1.0 - u) * q / proc.n as f64;
    if s2 > 0.0 && s2.is_finite() {
        Ok(s2.sqrt())
    } else {
        Err(Error::DegenerateFunctional)
    }
}

/// Point estimates, standard errors and coupled t-statistics over `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TStatProcess {
    pub index: Vec<(usize, usize)>,
    pub theta_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    /// `B × |I|`, draw-major.
    pub draws_t: Vec<f64>,
    pub b: usize,
    pub n: usize,
    pub method: Option<CouplingMethod>,
}

impl TStatProcess {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn draw(&self, b: usize) -> &[f64] {
        let p = self.len();
        &self.draws_t[b * p..(b + 1) * p]
    }
}

/// `θ̂` and `σ̂` over the index set, without draws.
pub fn estimates(proc: &CoefficientProcess, spec: &FunctionalSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut theta = Vec::with_capacity(spec.len());
    let mut sigma = Vec::with_capacity(spec.len());
    for &(k, j) in &spec.index {
        if k >= proc.grid.len() {
            return Err(Error::GridMismatch(format!("index refers to grid point {k}")));
        }
        let ell = &spec.loadings[j];
        theta.push(ell.iter().zip(&proc.betas[k]).map(|(a, b)| a * b).sum());
        sigma.push(sigma_hat(proc, ell, k)?);
    }
    Ok((theta, sigma))
}

/// `t*_b(u, w) = ℓ(w)'V_b(u) / (√n σ̂(u, w))` for every draw.
pub fn t_star_process(proc: &CoefficientProcess, draws: &ProcessDraws, spec: &FunctionalSpec) -> Result<TStatProcess> {
    if draws.grid != proc.grid {
        return Err(Error::GridMismatch("draws and process use different grids".into()));
    }
    if draws.m != proc.m() {
        return Err(invalid("draws and process have different numbers of terms"));
    }
    let (theta_hat, sigma_hat) = estimates(proc, spec)?;
    let sqrt_n = (proc.n as f64).sqrt();
    let mut draws_t = Vec::with_capacity(draws.b * spec.len());
    for b in 0..draws.b {
        for (p, &(k, j)) in spec.index.iter().enumerate() {
            let v = draws.draw(b, k);
            let num: f64 = spec.loadings[j].iter().zip(v).map(|(a, x)| a * x).sum();
            draws_t.push(num / (sqrt_n * sigma_hat[p]));
        }
    }
    Ok(TStatProcess {
        index: spec.index.clone(),
        theta_hat,
        sigma_hat,
        draws_t,
        b: draws.b,
        n: proc.n,
        method: Some(draws.method),
    })
}

/// Smallest order statistic whose empirical CDF reaches `p`, i.e. the
/// `⌈pB⌉`-th smallest value (1-based).
pub fn empirical_quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() || !(p > 0.0 && p < 1.0) {
        return Err(invalid("empirical quantile needs values and p in (0, 1)"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    Ok(sorted[order_statistic(p, b) - 1])
}

/// `⌈pB⌉` with products that land within rounding of an integer taken as
/// that integer (so `0.9 · 10` selects the 9th value).
fn order_statistic(p: f64, b: usize) -> usize {
    let x = p * b as f64;
    let r = x.round();
    let idx = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
    (idx as usize).clamp(1, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalValue {
    NormalQuantile,
    CouplingQuantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    Pointwise,
    Uniform,
}

/// `δ_n = 1 / (4 (ln n)^{3/4})`.
pub fn delta_n(n: usize) -> f64 {
    1.0 / (4.0 * (n as f64).ln().powf(0.75))
}

/// Lower and upper envelopes over `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub kind: BandKind,
    pub index: Vec<(usize, usize)>,
    pub theta_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `k_n(1−α)` at each point (constant for uniform bands).
    pub k: Vec<f64>,
    /// Critical value actually applied, `k + δ_n` for uniform bands.
    pub c: Vec<f64>,
    pub delta_n: f64,
    pub alpha: f64,
    pub method: Option<CouplingMethod>,
    pub critical: CriticalValue,
}

impl ConfidenceBand {
    fn build(kind: BandKind, t: &TStatProcess, k: Vec<f64>, delta_n: f64, alpha: f64, critical: CriticalValue) -> Self {
        let c: Vec<f64> = k.iter().map(|v| v + delta_n).collect();
        let half: Vec<f64> = c.iter().zip(&t.sigma_hat).map(|(c, s)| c * s).collect();
        Self {
            kind,
            index: t.index.clone(),
            lower: t.theta_hat.iter().zip(&half).map(|(x, h)| x - h).collect(),
            upper: t.theta_hat.iter().zip(&half).map(|(x, h)| x + h).collect(),
            theta_hat: t.theta_hat.clone(),
            sigma_hat: t.sigma_hat.clone(),
            k,
            c,
            delta_n,
            alpha,
            method: t.method,
            critical,
        }
    }

    /// Whether `truth` lies inside the band at every index point.
    pub fn contains(&self, truth: &[f64]) -> bool {
        truth.len() == self.lower.len()
            && truth
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| *l <= *t && *t <= *u)
    }

    /// Mean of `upper − lower` over `I`.
    pub fn mean_length(&self) -> f64 {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).sum::<f64>() / self.lower.len() as f64
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_enough_draws(b: usize, alpha: f64) -> Result<()> {
    if (b as f64) * alpha < 1.0 {
        Err(Error::TooFewDraws { draws: b, alpha })
    } else {
        Ok(())
    }
}

/// Pointwise `(1−α)` intervals `θ̂ ± k_n σ̂`.
pub fn pointwise_interval(t: &TStatProcess, alpha: f64, critical: CriticalValue) -> Result<ConfidenceBand> {
    check_alpha(alpha)?;
    let k = match critical {
        CriticalValue::NormalQuantile => vec![normal::quantile(1.0 - alpha / 2.0); t.len()],
        CriticalValue::CouplingQuantile => {
            check_enough_draws(t.b, alpha)?;
            (0..t.len())
                .map(|p| {
                    let abs: Vec<f64> = (0..t.b).map(|b| t.draw(b)[p].abs()).collect();
                    empirical_quantile(&abs, 1.0 - alpha)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(ConfidenceBand::build(BandKind::Pointwise, t, k, 0.0, alpha, critical))
}

/// `‖t*_b‖_I = max over I of |t*_b|` for each draw.
pub fn max_t_stats(t: &TStatProcess) -> Vec<f64> {
    (0..t.b)
        .map(|b| t.draw(b).iter().fold(0.0_f64, |a, v| a.max(v.abs())))
        .collect()
}

/// Uniform `(1−α)` band `θ̂ ± (k_n + δ_n) σ̂`; pass `with_delta = false` for
/// the unadjusted `c_n = k_n`.
pub fn uniform_band(t: &TStatProcess, alpha: f64, with_delta: bool) -> Result<ConfidenceBand> {
    check_alpha(alpha)?;
    check_enough_draws(t.b, alpha)?;
    let kn = empirical_quantile(&max_t_stats(t), 1.0 - alpha)?;
    let delta = if with_delta { delta_n(t.n) } else { 0.0 };
    Ok(ConfidenceBand::build(
        BandKind::Uniform,
        t,
        vec![kn; t.len()],
        delta,
        alpha,
        CriticalValue::CouplingQuantile,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tstat(draws: Vec<f64>, b: usize, p: usize) -> TStatProcess {
        TStatProcess {
            index: (0..p).map(|i| (i, 0)).collect(),
            theta_hat: vec![0.0; p],
            sigma_hat: vec![1.0; p],
            draws_t: draws,
            b,
            n: 100,
            method: None,
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(empirical_quantile(&[5.0, 3.0, 1.0, 2.0, 4.0], 0.8).unwrap(), 4.0);
        assert_eq!(empirical_quantile(&[2.5; 7], 0.33).unwrap(), 2.5);
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.9).unwrap(), 9.0);
        assert_eq!(empirical_quantile(&v, 0.91).unwrap(), 10.0);
    }

    #[test]
    fn delta_at_e_to_the_fourth() {
        // ln n = 4 up to the rounding of n to an integer; evaluate the formula directly
        let d = 1.0 / (4.0 * 4f64.powf(0.75));
        assert!((d - 0.08838834764831845).abs() < 1e-15);
        assert!((delta_n(55) - 1.0 / (4.0 * 55f64.ln().powf(0.75))).abs() == 0.0);
    }

    #[test]
    fn normal_critical_value() {
        let t = tstat(vec![0.0; 10], 10, 1);
        let band = pointwise_interval(&t, 0.10, CriticalValue::NormalQuantile).unwrap();
        assert!((band.k[0] - 1.6448536269514722).abs() < 1e-12);
    }

    #[test]
    fn too_few_draws() {
        let t = tstat(vec![0.0; 5], 5, 1);
        assert!(matches!(uniform_band(&t, 0.1, true), Err(Error::TooFewDraws { .. })));
    }

    #[test]
    fn singleton_uniform_equals_pointwise() {
        let draws: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let t = tstat(draws, 50, 1);
        let u = uniform_band(&t, 0.1, false).unwrap();
        let p = pointwise_interval(&t, 0.1, CriticalValue::CouplingQuantile).unwrap();
        assert_eq!(u.k, p.k);
    }
}
