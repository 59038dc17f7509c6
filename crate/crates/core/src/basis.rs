//! Series terms `Z(x)` for the linear, orthogonal-polynomial and cubic
//! B-spline families.
//!
//! A covariate vector is `x = (w, v_1, ..., v_k)`. The family acts on the first
//! coordinate `w`; the `k` extra coordinates enter linearly. The term layout is
//!
//! ```text
//! [1 (if intercept)] [family block in w] [v_1 ... v_k]
//! ```

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const SPLINE_DEGREE: usize = 3;
const ZETA_GRID: usize = 10_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    PowerPoly,
    CubicBSpline,
}

/// What to do when two requested knot quantiles land on the same value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotTiePolicy {
    /// Push colliding knots apart by `1e-9 * range` and log a warning.
    #[default]
    Nudge,
    /// Refuse the sample.
    Error,
}

/// User-facing basis configuration (the `basis` block of a config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub family: Family,
    /// Polynomial degree (power family only).
    #[serde(default)]
    pub degree: Option<usize>,
    /// Raw monomials instead of orthogonalized polynomials (power family only).
    #[serde(default)]
    pub raw: bool,
    /// Knot positions as quantile levels of `w`; first and last are the boundary knots.
    #[serde(default)]
    pub knot_quantiles: Option<Vec<f64>>,
    #[serde(default)]
    pub extra_linear_covariates: usize,
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub knot_ties: KnotTiePolicy,
}

fn default_true() -> bool {
    true
}

impl BasisConfig {
    pub fn linear() -> Self {
        Self {
            family: Family::Linear,
            degree: None,
            raw: false,
            knot_quantiles: None,
            extra_linear_covariates: 0,
            intercept: true,
            knot_ties: KnotTiePolicy::Nudge,
        }
    }

    pub fn power(degree: usize) -> Self {
        Self {
            family: Family::PowerPoly,
            degree: Some(degree),
            ..Self::linear()
        }
    }

    pub fn raw_power(degree: usize) -> Self {
        Self {
            raw: true,
            ..Self::power(degree)
        }
    }

    pub fn cubic_bspline(knot_quantiles: &[f64]) -> Self {
        Self {
            family: Family::CubicBSpline,
            knot_quantiles: Some(knot_quantiles.to_vec()),
            ..Self::linear()
        }
    }

    /// The five-knot spline at the quartiles of `w`, boundaries included.
    pub fn quartile_bspline() -> Self {
        Self::cubic_bspline(&[0.0, 0.25, 0.5, 0.75, 1.0])
    }

    pub fn with_extra_linear(mut self, k: usize) -> Self {
        self.extra_linear_covariates = k;
        self
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }
}

/// Orthonormal polynomial terms stored as coefficients on Legendre polynomials
/// of the normalized coordinate `t = 2 (w - lo) / (hi - lo) - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OrthoPoly {
    lo: f64,
    hi: f64,
    /// Row `j` holds term `j` in the Legendre basis (lower triangular).
    coeffs: Vec<Vec<f64>>,
}

/// A constructed series basis. Immutable; evaluation is pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub config: BasisConfig,
    /// Per-covariate `[min, max]` of the construction sample.
    pub covariate_ranges: Vec<[f64; 2]>,
    /// Full knot vector with boundary knots repeated `degree + 1` times.
    pub knots: Option<Vec<f64>>,
    ortho: Option<OrthoPoly>,
    m: usize,
    /// `max ‖Z(x)‖` over a dense grid of the covariate box.
    pub zeta: f64,
}

/// Series values at one point together with an extrapolation flag.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    pub values: Vec<f64>,
    pub extrapolated: bool,
}

/// Integrating measure for averaged derivative loadings.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    /// Equal mass on every sample point.
    Empirical,
    /// Explicit point masses (must sum to 1).
    Weights(Vec<f64>),
}

impl Measure {
    /// Empirical measure restricted to the sample points whose coordinate
    /// `coord` equals `value` (within `tol`), renormalized to mass 1.
    pub fn slice(sample: &[Vec<f64>], coord: usize, value: f64, tol: f64) -> Result<Self> {
        let hits: Vec<bool> = sample
            .iter()
            .map(|x| x.get(coord).is_some_and(|c| (c - value).abs() <= tol))
            .collect();
        let count = hits.iter().filter(|h| **h).count();
        if count == 0 {
            return Err(invalid(format!(
                "no sample point with covariate {coord} equal to {value}"
            )));
        }
        let mass = 1.0 / count as f64;
        Ok(Measure::Weights(
            hits.into_iter()
                .map(|h| if h { mass } else { 0.0 })
                .collect(),
        ))
    }
}

/// Builds a basis from its configuration and a covariate sample (rows are
/// covariate vectors).
pub fn make_basis(config: &BasisConfig, sample: &[Vec<f64>]) -> Result<BasisSpec> {
    if sample.is_empty() {
        return Err(invalid("covariate sample is empty"));
    }
    let dim = 1 + config.extra_linear_covariates;
    let mut ranges = vec![[f64::INFINITY, f64::NEG_INFINITY]; dim];
    for (i, x) in sample.iter().enumerate() {
        if x.len() != dim {
            return Err(invalid(format!(
                "covariate row {i} has {} entries, basis expects {dim}",
                x.len()
            )));
        }
        for (r, v) in ranges.iter_mut().zip(x) {
            if !v.is_finite() {
                return Err(invalid(format!("non-finite covariate in row {i}")));
            }
            r[0] = r[0].min(*v);
            r[1] = r[1].max(*v);
        }
    }
    let w: Vec<f64> = sample.iter().map(|x| x[0]).collect();

    let mut spec = BasisSpec {
        config: config.clone(),
        covariate_ranges: ranges,
        knots: None,
        ortho: None,
        m: 0,
        zeta: 0.0,
    };

    let block = match config.family {
        Family::Linear => 1,
        Family::PowerPoly => {
            let degree = config
                .degree
                .ok_or_else(|| invalid("power basis requires a degree"))?;
            if degree == 0 {
                return Err(invalid("polynomial degree must be at least 1"));
            }
            if !config.raw {
                spec.ortho = Some(orthonormal_poly(&w, degree)?);
            }
            degree
        }
        Family::CubicBSpline => {
            let qs = config
                .knot_quantiles
                .as_deref()
                .ok_or_else(|| invalid("B-spline basis requires knot quantiles"))?;
            let knots = quantile_knots(&w, qs, config.knot_ties)?;
            let n_basis = knots.len() - SPLINE_DEGREE - 1;
            spec.knots = Some(knots);
            if config.intercept {
                n_basis - 1
            } else {
                n_basis
            }
        }
    };
    spec.m = usize::from(config.intercept) + block + config.extra_linear_covariates;
    spec.zeta = spec.sup_norm_bound();
    Ok(spec)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quantile_knots(w: &[f64], qs: &[f64], policy: KnotTiePolicy) -> Result<Vec<f64>> {
    if qs.len() < 2 {
        return Err(invalid("need at least two knot quantiles (the boundaries)"));
    }
    if qs.iter().any(|q| !(0.0..=1.0).contains(q)) || qs.windows(2).any(|p| p[0] >= p[1]) {
        return Err(invalid("knot quantiles must be strictly increasing in [0, 1]"));
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = sorted[sorted.len() - 1] - sorted[0];
    if range <= 0.0 {
        return Err(Error::DuplicateKnots {
            quantiles: qs.to_vec(),
            value: sorted[0],
        });
    }
    let mut values: Vec<f64> = qs.iter().map(|&q| sample_quantile(&sorted, q)).collect();
    for i in 1..values.len() {
        if values[i] <= values[i - 1] {
            match policy {
                KnotTiePolicy::Error => {
                    return Err(Error::DuplicateKnots {
                        quantiles: vec![qs[i - 1], qs[i]],
                        value: values[i],
                    })
                }
                KnotTiePolicy::Nudge => {
                    let moved = values[i - 1] + 1e-9 * range;
                    warn!(
                        "knot quantiles {} and {} collide at {}; moving the latter to {}",
                        qs[i - 1],
                        qs[i],
                        values[i],
                        moved
                    );
                    values[i] = moved;
                }
            }
        }
    }
    let (a, b) = (values[0], values[values.len() - 1]);
    let mut knots = vec![a; SPLINE_DEGREE + 1];
    knots.extend_from_slice(&values[1..values.len() - 1]);
    knots.extend(std::iter::repeat_n(b, SPLINE_DEGREE + 1));
    Ok(knots)
}

/// Legendre polynomials `P_0..P_d` and their derivatives at `t`.
fn legendre(t: f64, degree: usize, out: &mut [f64], dout: &mut [f64]) {
    out[0] = 1.0;
    dout[0] = 0.0;
    if degree == 0 {
        return;
    }
    out[1] = t;
    dout[1] = 1.0;
    for k in 1..degree {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * t * out[k] - kf * out[k - 1]) / (kf + 1.0);
        dout[k + 1] = dout[k - 1] + (2.0 * kf + 1.0) * out[k];
    }
}

fn orthonormal_poly(w: &[f64], degree: usize) -> Result<OrthoPoly> {
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(invalid("polynomial basis needs a non-degenerate covariate range"));
    }
    let k = degree + 1;
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let (mut p, mut dp) = (vec![0.0; k], vec![0.0; k]);
    for &x in w {
        let t = 2.0 * (x - lo) / (hi - lo) - 1.0;
        legendre(t, degree, &mut p, &mut dp);
        for i in 0..k {
            for j in 0..=i {
                gram[(i, j)] += p[i] * p[j];
            }
        }
    }
    let n = w.len() as f64;
    for i in 0..k {
        for j in 0..=i {
            gram[(i, j)] /= n;
            gram[(j, i)] = gram[(i, j)];
        }
    }
    let chol = gram.cholesky().ok_or_else(|| {
        invalid(format!(
            "sample has too few distinct covariate values for degree {degree}"
        ))
    })?;
    let l = chol.l();
    let linv = l
        .try_inverse()
        .ok_or_else(|| invalid("singular polynomial Gram matrix"))?;
    let coeffs = (0..k)
        .map(|i| (0..k).map(|j| if j <= i { linv[(i, j)] } else { 0.0 }).collect())
        .collect();
    Ok(OrthoPoly { lo, hi, coeffs })
}

impl OrthoPoly {
    fn eval(&self, x: f64, deriv: bool, out: &mut Vec<f64>, skip_constant: bool) {
        let k = self.coeffs.len();
        let (mut p, mut dp) = (vec![0.0; k], vec![0.0; k]);
        let scale = 2.0 / (self.hi - self.lo);
        let t = scale * (x - self.lo) - 1.0;
        legendre(t, k - 1, &mut p, &mut dp);
        let src = if deriv { &dp } else { &p };
        let start = usize::from(skip_constant);
        for row in &self.coeffs[start..] {
            let mut s: f64 = row.iter().zip(src.iter()).map(|(c, v)| c * v).sum();
            if deriv {
                s *= scale;
            }
            out.push(s);
        }
    }
}

/// Locates the knot span `μ` with `t_μ ≤ x < t_{μ+1}`, clamped to the valid
/// range so points outside the boundary knots use the end polynomial pieces.
fn find_span(knots: &[f64], degree: usize, x: f64) -> usize {
    let n_basis = knots.len() - degree - 1;
    let (lo, hi) = (degree, n_basis - 1);
    if x >= knots[hi + 1] {
        return hi;
    }
    if x <= knots[lo] {
        return lo;
    }
    let mut span = lo;
    while span < hi && x >= knots[span + 1] {
        span += 1;
    }
    span
}

/// The `degree + 1` non-zero B-splines of order `degree` on `span`
/// (de Boor's triangular recurrence).
fn nonzero_basis(knots: &[f64], span: usize, degree: usize, x: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// All cubic B-spline values at `x`.
pub fn bspline_values(knots: &[f64], x: f64) -> Vec<f64> {
    let n_basis = knots.len() - SPLINE_DEGREE - 1;
    let span = find_span(knots, SPLINE_DEGREE, x);
    let local = nonzero_basis(knots, span, SPLINE_DEGREE, x);
    let mut out = vec![0.0; n_basis];
    for (r, v) in local.into_iter().enumerate() {
        out[span - SPLINE_DEGREE + r] = v;
    }
    out
}

/// All cubic B-spline first derivatives at `x`.
pub fn bspline_derivatives(knots: &[f64], x: f64) -> Vec<f64> {
    let p = SPLINE_DEGREE;
    let n_basis = knots.len() - p - 1;
    let span = find_span(knots, p, x);
    // quadratic B-splines N_{span-2..span, 2}
    let lower = nonzero_basis(knots, span, p - 1, x);
    let quad = |i: isize| -> f64 {
        let first = span as isize - (p as isize - 1);
        let r = i - first;
        if r < 0 || r as usize >= lower.len() {
            0.0
        } else {
            lower[r as usize]
        }
    };
    let mut out = vec![0.0; n_basis];
    for i in (span - p)..=span {
        let ii = i as isize;
        let d1 = knots[i + p] - knots[i];
        let d2 = knots[i + p + 1] - knots[i + 1];
        let a = if d1 > 0.0 { p as f64 / d1 * quad(ii) } else { 0.0 };
        let b = if d2 > 0.0 { p as f64 / d2 * quad(ii + 1) } else { 0.0 };
        out[i] = a - b;
    }
    out
}

impl BasisSpec {
    /// Number of series terms `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of covariates the basis consumes.
    pub fn dim(&self) -> usize {
        1 + self.config.extra_linear_covariates
    }

    pub fn family(&self) -> Family {
        self.config.family
    }

    fn block(&self, w: f64, deriv: bool, out: &mut Vec<f64>) {
        match self.config.family {
            Family::Linear => out.push(if deriv { 1.0 } else { w }),
            Family::PowerPoly => {
                let degree = self.config.degree.unwrap_or(1);
                match &self.ortho {
                    Some(op) => op.eval(w, deriv, out, true),
                    None => {
                        for k in 1..=degree {
                            let v = if deriv {
                                k as f64 * w.powi(k as i32 - 1)
                            } else {
                                w.powi(k as i32)
                            };
                            out.push(v);
                        }
                    }
                }
            }
            Family::CubicBSpline => {
                let knots = self.knots.as_deref().expect("spline basis without knots");
                let vals = if deriv {
                    bspline_derivatives(knots, w)
                } else {
                    bspline_values(knots, w)
                };
                let start = usize::from(self.config.intercept);
                out.extend_from_slice(&vals[start..]);
            }
        }
    }

    /// Series vector `Z(x)`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        let mut out = Vec::with_capacity(self.m);
        if self.config.intercept {
            out.push(1.0);
        }
        self.block(x[0], false, &mut out);
        out.extend_from_slice(&x[1..]);
        out
    }

    /// `Z(x)` plus a flag telling whether `x` leaves the construction box.
    pub fn eval_flagged(&self, x: &[f64]) -> BasisValues {
        BasisValues {
            values: self.eval(x),
            extrapolated: self.is_extrapolation(x),
        }
    }

    pub fn is_extrapolation(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.covariate_ranges)
            .any(|(v, r)| *v < r[0] || *v > r[1])
    }

    /// `∂Z(x)/∂x_k`.
    pub fn eval_derivative(&self, x: &[f64], k: usize) -> Result<Vec<f64>> {
        let dim = self.dim();
        if k >= dim {
            return Err(Error::CovariateOutOfRange { index: k, dim });
        }
        let mut out = Vec::with_capacity(self.m);
        if self.config.intercept {
            out.push(0.0);
        }
        if k == 0 {
            self.block(x[0], true, &mut out);
            out.extend(std::iter::repeat_n(0.0, dim - 1));
        } else {
            let mut block = Vec::new();
            self.block(x[0], false, &mut block);
            out.extend(std::iter::repeat_n(0.0, block.len()));
            out.extend((1..dim).map(|j| if j == k { 1.0 } else { 0.0 }));
        }
        Ok(out)
    }

    /// `n x m` design matrix of `Z(x_i)`.
    pub fn design_matrix(&self, rows: &[Vec<f64>]) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(rows.len(), self.m);
        for (i, x) in rows.iter().enumerate() {
            for (j, v) in self.eval(x).into_iter().enumerate() {
                z[(i, j)] = v;
            }
        }
        z
    }

    /// Loading of the averaged-derivative functional:
    /// `ℓ = Σ_j μ_j ∂_{x_k} Z(x_j)`.
    pub fn average_derivative_loading(
        &self,
        sample: &[Vec<f64>],
        k: usize,
        mu: &Measure,
    ) -> Result<Vec<f64>> {
        if sample.is_empty() {
            return Err(invalid("empty sample for average derivative"));
        }
        let weights: Vec<f64> = match mu {
            Measure::Empirical => vec![1.0 / sample.len() as f64; sample.len()],
            Measure::Weights(w) => {
                if w.len() != sample.len() {
                    return Err(invalid("measure weights and sample differ in length"));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-10 {
                    return Err(Error::WeightsNotNormalized { sum });
                }
                w.clone()
            }
        };
        let mut ell = vec![0.0; self.m];
        for (x, &wt) in sample.iter().zip(&weights) {
            if wt == 0.0 {
                continue;
            }
            for (acc, d) in ell.iter_mut().zip(self.eval_derivative(x, k)?) {
                *acc += wt * d;
            }
        }
        Ok(ell)
    }

    fn sup_norm_bound(&self) -> f64 {
        let [lo, hi] = self.covariate_ranges[0];
        let mut best: f64 = 0.0;
        let mut buf = Vec::with_capacity(self.m);
        for i in 0..ZETA_GRID {
            let w = if hi > lo {
                lo + (hi - lo) * i as f64 / (ZETA_GRID - 1) as f64
            } else {
                lo
            };
            buf.clear();
            self.block(w, false, &mut buf);
            let s: f64 = buf.iter().map(|v| v * v).sum();
            best = best.max(s);
        }
        let extra: f64 = self.covariate_ranges[1..]
            .iter()
            .map(|r| (r[0] * r[0]).max(r[1] * r[1]))
            .sum();
        (best + extra + f64::from(u8::from(self.config.intercept))).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn linear_identity_case() {
        let spec = make_basis(&BasisConfig::linear(), &column(&[0.0, 1.0, 2.0])).unwrap();
        assert_eq!(spec.m(), 2);
        assert_eq!(spec.eval(&[0.3]), vec![1.0, 0.3]);
        assert_eq!(spec.eval_derivative(&[0.7], 0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn raw_power_values_and_derivatives() {
        let spec = make_basis(&BasisConfig::raw_power(2), &column(&[-1.0, 0.0, 1.0])).unwrap();
        assert_eq!(spec.m(), 3);
        assert_eq!(spec.eval(&[0.0]), vec![1.0, 0.0, 0.0]);
        assert_eq!(spec.eval_derivative(&[0.5], 0).unwrap(), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn derivative_index_out_of_range() {
        let spec = make_basis(&BasisConfig::linear(), &column(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            spec.eval_derivative(&[0.5], 1),
            Err(Error::CovariateOutOfRange { index: 1, dim: 1 })
        ));
    }

    #[test]
    fn extra_linear_covariates_enter_raw() {
        let sample = vec![vec![0.0, 2.0], vec![1.0, -3.0], vec![0.5, 1.0]];
        let spec = make_basis(&BasisConfig::linear().with_extra_linear(1), &sample).unwrap();
        assert_eq!(spec.eval(&[0.5, 4.0]), vec![1.0, 0.5, 4.0]);
        assert_eq!(spec.eval_derivative(&[0.5, 4.0], 1).unwrap(), vec![0.0, 0.0, 1.0]);
        // zeta covers the worst corner: 1 + 1 + 9
        assert!((spec.zeta - 11f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quartile_knots_are_sample_quantiles() {
        let w: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let spec = make_basis(&BasisConfig::quartile_bspline(), &column(&w)).unwrap();
        let knots = spec.knots.as_ref().unwrap();
        assert_eq!(knots.len(), 11);
        assert_eq!(&knots[..4], &[0.0; 4]);
        assert!((knots[4] - 0.25).abs() < 1e-15);
        assert!((knots[5] - 0.5).abs() < 1e-15);
        assert!((knots[6] - 0.75).abs() < 1e-15);
        assert_eq!(&knots[7..], &[1.0; 4]);
        assert_eq!(spec.m(), 7);
        assert_eq!(spec.eval(&[0.3])[0], 1.0);
    }

    #[test]
    fn tied_knots_error_or_nudge() {
        // more than half the sample sits at zero: quantiles 0, 0.25 and 0.5 collide
        let mut w = vec![0.0; 60];
        w.extend((1..=40).map(|i| i as f64));
        let strict = BasisConfig {
            knot_ties: KnotTiePolicy::Error,
            ..BasisConfig::quartile_bspline()
        };
        match make_basis(&strict, &column(&w)) {
            Err(Error::DuplicateKnots { quantiles, .. }) => assert_eq!(quantiles, vec![0.0, 0.25]),
            other => panic!("expected duplicate knots, got {other:?}"),
        }
        let spec = make_basis(&BasisConfig::quartile_bspline(), &column(&w)).unwrap();
        let knots = spec.knots.unwrap();
        assert!(knots[3..8].windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn constant_sample_is_rejected_for_splines() {
        assert!(make_basis(&BasisConfig::quartile_bspline(), &column(&[1.0; 10])).is_err());
    }

    #[test]
    fn empty_sample_is_rejected() {
        assert!(make_basis(&BasisConfig::linear(), &[]).is_err());
    }

    #[test]
    fn slice_measure_renormalizes() {
        let sample = vec![vec![0.1, 1.0], vec![0.2, 0.0], vec![0.3, 1.0]];
        let Measure::Weights(w) = Measure::slice(&sample, 1, 1.0, 0.0).unwrap() else {
            unreachable!()
        };
        assert_eq!(w, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let spec = make_basis(&BasisConfig::linear(), &column(&[0.0, 1.0])).unwrap();
        let err = spec
            .average_derivative_loading(&column(&[0.0, 1.0]), 0, &Measure::Weights(vec![0.5, 0.6]))
            .unwrap_err();
        assert!(matches!(err, Error::WeightsNotNormalized { .. }));
    }
}
