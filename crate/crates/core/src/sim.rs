//! Monte Carlo lab: a sinusoidal location model, coverage studies of uniform
//! bands for the average derivative, and estimand-gap diagnostics.
//!
//! The outcome model is
//!
//! ```text
//! Y = g(W) + V'β + σ Φ⁻¹(U),   U ~ Uniform(0, 1) independent of (W, V),
//! g(w) = α₀ + α₁ w + α₂ sin(2πw) + α₃ cos(2πw) + α₄ sin(4πw) + α₅ cos(4πw),
//! ```
//!
//! so the conditional `u`-quantile is `g(w) + v'β + σ Φ⁻¹(u)` and its
//! derivative in `w` does not depend on `u`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{make_basis, BasisConfig, BasisSpec, Measure};
use crate::coupling::{self, CouplingMethod, GradientPath, ProcessDraws};
use crate::error::{invalid, Error, Result};
use crate::inference::{self, FunctionalSpec};
use crate::monotone::GridFunction;
use crate::normal;
use crate::process::{self, QuantileGrid};
use crate::rng::{self, Domain};
use crate::solver::{self, Dataset};

/// How the linear covariates `V` are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum VDesign {
    /// No `V` block.
    None,
    /// `V` held at one value for every observation; absorbed by the intercept
    /// and left out of the basis.
    Fixed { values: Vec<f64> },
    /// Independent `Uniform(0, 1)` coordinates entering the basis linearly.
    Uniform { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    /// `(α₀, …, α₅)`.
    pub g_coeffs: [f64; 6],
    #[serde(default)]
    pub beta_v: Vec<f64>,
    pub sigma: f64,
    /// `W ~ Uniform(w_range[0], w_range[1])`.
    pub w_range: [f64; 2],
    #[serde(default = "no_v")]
    pub v: VDesign,
    pub n: usize,
}

fn no_v() -> VDesign {
    VDesign::None
}

/// One simulated sample. `covariates[i]` holds `W_i` followed by the `V`
/// coordinates that enter the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub covariates: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl DgpSpec {
    /// Default calibration: `W ~ Uniform(0, 1/2)`, `σ = 0.3`, and an
    /// average derivative of exactly `−0.75`.
    pub fn calibrated(n: usize) -> Self {
        Self {
            g_coeffs: [1.0, 0.25, 0.1, 0.25, 0.02, 0.01],
            beta_v: Vec::new(),
            sigma: 0.3,
            w_range: [0.0, 0.5],
            v: VDesign::None,
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be positive"));
        }
        if !(self.w_range[0] < self.w_range[1]) {
            return Err(invalid("w_range must be increasing"));
        }
        if self.n == 0 {
            return Err(invalid("n must be positive"));
        }
        let vdim = match &self.v {
            VDesign::None => 0,
            VDesign::Fixed { values } => values.len(),
            VDesign::Uniform { dim } => *dim,
        };
        if vdim != self.beta_v.len() {
            return Err(invalid(format!(
                "beta_v has {} entries but V has {vdim}",
                self.beta_v.len()
            )));
        }
        Ok(())
    }

    /// Number of `V` coordinates that enter the basis.
    pub fn basis_extra_covariates(&self) -> usize {
        match self.v {
            VDesign::Uniform { dim } => dim,
            _ => 0,
        }
    }

    pub fn g(&self, w: f64) -> f64 {
        let a = &self.g_coeffs;
        a[0] + a[1] * w
            + a[2] * (2.0 * PI * w).sin()
            + a[3] * (2.0 * PI * w).cos()
            + a[4] * (4.0 * PI * w).sin()
            + a[5] * (4.0 * PI * w).cos()
    }

    pub fn g_prime(&self, w: f64) -> f64 {
        let a = &self.g_coeffs;
        a[1] + 2.0 * PI * (a[2] * (2.0 * PI * w).cos() - a[3] * (2.0 * PI * w).sin())
            + 4.0 * PI * (a[4] * (4.0 * PI * w).cos() - a[5] * (4.0 * PI * w).sin())
    }

    fn v_shift(&self, x: &[f64]) -> f64 {
        match &self.v {
            VDesign::None => 0.0,
            VDesign::Fixed { values } => values.iter().zip(&self.beta_v).map(|(v, b)| v * b).sum(),
            VDesign::Uniform { .. } => x[1..].iter().zip(&self.beta_v).map(|(v, b)| v * b).sum(),
        }
    }

    /// `θ(u, x) = g(w) + v'β + σΦ⁻¹(u)`.
    pub fn truth(&self, u: f64, x: &[f64]) -> f64 {
        self.g(x[0]) + self.v_shift(x) + self.sigma * normal::quantile(u)
    }

    /// `∫ g'(w) dw / (b − a)` over the `W` law by composite Simpson quadrature.
    pub fn true_average_derivative(&self) -> f64 {
        let [a, b] = self.w_range;
        let k = 4000;
        let h = (b - a) / k as f64;
        let mut s = self.g_prime(a) + self.g_prime(b);
        for i in 1..k {
            let w = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * self.g_prime(w);
        }
        s * h / 3.0 / (b - a)
    }

    /// Average of `g'(W_i)` over a covariate sample.
    pub fn empirical_average_derivative(&self, covariates: &[Vec<f64>]) -> f64 {
        covariates.iter().map(|x| self.g_prime(x[0])).sum::<f64>() / covariates.len() as f64
    }

    pub fn draw_covariates(&self, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let [a, b] = self.w_range;
        (0..self.n)
            .map(|_| {
                let mut x = vec![a + (b - a) * r.random::<f64>()];
                if let VDesign::Uniform { dim } = self.v {
                    x.extend((0..dim).map(|_| r.random::<f64>()));
                }
                x
            })
            .collect()
    }

    /// Outcomes for fixed covariates.
    pub fn draw_outcomes(&self, covariates: &[Vec<f64>], r: &mut ChaCha8Rng) -> Vec<f64> {
        covariates
            .iter()
            .map(|x| {
                let u: f64 = r.random();
                // U = 0 has probability 2^-53; keep Φ⁻¹ finite
                let u = u.max(f64::MIN_POSITIVE);
                self.g(x[0]) + self.v_shift(x) + self.sigma * normal::quantile(u)
            })
            .collect()
    }
}

/// Draws covariates from the design stream and outcomes from the outcome
/// stream of `seed`.
pub fn generate_dgp(spec: &DgpSpec, seed: u64) -> Result<SimSample> {
    spec.validate()?;
    let covariates = spec.draw_covariates(&mut rng::substream(seed, Domain::Design, 0));
    let y = spec.draw_outcomes(&covariates, &mut rng::substream(seed, Domain::Outcome, 0));
    Ok(SimSample { covariates, y })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedBasis {
    pub name: String,
    pub basis: BasisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodDraws {
    pub method: CouplingMethod,
    /// Defaults to 1,000 for simulation couplings and 199 for bootstraps.
    #[serde(default)]
    pub draws: Option<usize>,
}

impl MethodDraws {
    pub fn new(method: CouplingMethod, draws: usize) -> Self {
        Self {
            method,
            draws: Some(draws),
        }
    }

    pub fn count(&self) -> usize {
        self.draws.unwrap_or_else(|| self.method.default_draws())
    }
}

/// Test hook replacing every band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandOverride {
    /// `(−∞, ∞)`; coverage must be 100.
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dgp: DgpSpec,
    pub bases: Vec<NamedBasis>,
    #[serde(default = "QuantileGrid::default_grid")]
    pub grid: QuantileGrid,
    pub methods: Vec<MethodDraws>,
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Add `δ_n` to the critical value.
    #[serde(default = "yes")]
    pub delta_adjustment: bool,
    #[serde(skip)]
    pub band_override: Option<BandOverride>,
}

fn default_alpha() -> f64 {
    0.10
}

fn yes() -> bool {
    true
}

impl McConfig {
    /// Linear, degree-6 orthogonal polynomial and quartile-knot cubic
    /// B-spline bases with pivotal and weighted-bootstrap bands.
    pub fn standard(n: usize, replications: usize, seed: u64) -> Self {
        let bases = vec![
            NamedBasis {
                name: "linear".into(),
                basis: BasisConfig::linear(),
            },
            NamedBasis {
                name: "power".into(),
                basis: BasisConfig::power(6),
            },
            NamedBasis {
                name: "bspline".into(),
                basis: BasisConfig::quartile_bspline(),
            },
        ];
        Self {
            dgp: DgpSpec::calibrated(n),
            bases,
            grid: QuantileGrid::default_grid(),
            methods: vec![
                MethodDraws::new(CouplingMethod::Pivotal, 500),
                MethodDraws::new(CouplingMethod::Weighted, 199),
            ],
            replications,
            alpha: 0.10,
            seed,
            delta_adjustment: true,
            band_override: None,
        }
    }
}

/// One Table-1 style row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub basis: String,
    pub method: CouplingMethod,
    /// Grid average of `|mean_r θ̂(u) − θ|`.
    pub bias: f64,
    /// Grid average of the pointwise root mean squared error.
    pub rmse: f64,
    /// Grid average of `mean_r σ̂(u) / sd_r θ̂(u)`.
    pub se_sd: f64,
    /// Percentage of replications whose band contains `θ` on the whole grid.
    pub cover: f64,
    /// Mean band length.
    pub length: f64,
    /// Mean of `k_n(1−α)`.
    pub stat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub replications: usize,
    pub failed: usize,
    pub seed: u64,
    /// `θ`: the average derivative over the fixed covariate sample.
    pub truth: f64,
    pub config: McConfig,
}

impl McReport {
    pub fn row(&self, basis: &str, method: CouplingMethod) -> Option<&McRow> {
        self.rows.iter().find(|r| r.basis == basis && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("basis,method,bias,rmse,se_sd,cover,length,stat\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4},{:.1},{:.4},{:.4}\n",
                r.basis,
                r.method.name(),
                r.bias,
                r.rmse,
                r.se_sd,
                r.cover,
                r.length,
                r.stat
            ));
        }
        out
    }
}

struct BasisOutcome {
    theta: Vec<f64>,
    sigma: Vec<f64>,
    /// `(covered, mean length, k_n)` per method.
    bands: Vec<(bool, f64, f64)>,
}

struct Prepared {
    name: String,
    basis: BasisSpec,
    design: nalgebra::DMatrix<f64>,
    functional: FunctionalSpec,
}

fn draws_for(
    method: CouplingMethod,
    data: &Dataset,
    proc: &process::CoefficientProcess,
    b: usize,
    seed: u64,
) -> Result<ProcessDraws> {
    match method {
        CouplingMethod::Pivotal => coupling::draw_pivotal(data, proc, b, seed),
        CouplingMethod::Gaussian => coupling::draw_gaussian(proc, b, seed),
        CouplingMethod::Weighted => coupling::draw_weighted_bootstrap(data, proc, b, seed),
        CouplingMethod::Gradient => coupling::draw_gradient_bootstrap(data, proc, b, seed, GradientPath::LinearTerm),
    }
}

fn replicate(cfg: &McConfig, prepared: &[Prepared], covariates: &[Vec<f64>], truth: f64, r: usize) -> Result<Vec<BasisOutcome>> {
    let y = cfg
        .dgp
        .draw_outcomes(covariates, &mut rng::substream(cfg.seed, Domain::Outcome, r as u64));
    let draw_seed = rng::substream_seed(cfg.seed, Domain::Replication, r as u64);
    prepared
        .iter()
        .map(|p| {
            let data = Dataset::new(y.clone(), &p.design)?;
            let proc = process::fit_process(&data, Some(&p.basis), &cfg.grid)?;
            let (theta, sigma) = inference::estimates(&proc, &p.functional)?;
            let bands = cfg
                .methods
                .iter()
                .map(|md| {
                    let draws = draws_for(md.method, &data, &proc, md.count(), draw_seed)?;
                    let t = inference::t_star_process(&proc, &draws, &p.functional)?;
                    let mut band = inference::uniform_band(&t, cfg.alpha, cfg.delta_adjustment)?;
                    if cfg.band_override == Some(BandOverride::Infinite) {
                        band.lower.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
                        band.upper.iter_mut().for_each(|v| *v = f64::INFINITY);
                    }
                    let truth_vec = vec![truth; band.lower.len()];
                    Ok((band.contains(&truth_vec), band.mean_length(), band.k[0]))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BasisOutcome { theta, sigma, bands })
        })
        .collect()
}

/// Runs the coverage study for the average derivative in `W` over the grid.
///
/// Covariates are drawn once and held fixed across replications; the target
/// is the average of `g'(W_i)` over them. Replications that fail are
/// excluded and counted; more than 5% failures is an error.
pub fn run_mc(cfg: &McConfig) -> Result<McReport> {
    cfg.dgp.validate()?;
    if cfg.replications < 10 {
        return Err(invalid("at least 10 replications are required"));
    }
    if cfg.bases.is_empty() || cfg.methods.is_empty() {
        return Err(invalid("at least one basis and one method are required"));
    }
    let covariates = cfg.dgp.draw_covariates(&mut rng::substream(cfg.seed, Domain::Design, 0));
    let truth = cfg.dgp.empirical_average_derivative(&covariates);
    let extra = cfg.dgp.basis_extra_covariates();
    let prepared = cfg
        .bases
        .iter()
        .map(|nb| {
            let bc = nb.basis.clone().with_extra_linear(extra);
            let basis = make_basis(&bc, &covariates)?;
            let design = basis.design_matrix(&covariates);
            let functional = FunctionalSpec::average_derivative(&basis, &covariates, 0, &Measure::Empirical, cfg.grid.len())?;
            Ok(Prepared {
                name: nb.name.clone(),
                basis,
                design,
                functional,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<Result<Vec<BasisOutcome>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(cfg, &prepared, &covariates, truth, r))
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    for (r, o) in outcomes.iter().enumerate() {
        if let Err(e) = o {
            log::warn!("replication {r} failed: {e}");
        }
    }
    if failed * 20 > cfg.replications {
        return Err(Error::TooManyFailures {
            failed,
            total: cfg.replications,
        });
    }
    let ok: Vec<&Vec<BasisOutcome>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let reps = ok.len() as f64;
    let g = cfg.grid.len();

    let mut rows = Vec::new();
    for (bi, p) in prepared.iter().enumerate() {
        let (mut bias, mut rmse, mut se_sd) = (0.0, 0.0, 0.0);
        for k in 0..g {
            let mean = ok.iter().map(|o| o[bi].theta[k]).sum::<f64>() / reps;
            let mse = ok.iter().map(|o| (o[bi].theta[k] - truth).powi(2)).sum::<f64>() / reps;
            let var = ok.iter().map(|o| (o[bi].theta[k] - mean).powi(2)).sum::<f64>() / (reps - 1.0);
            let se = ok.iter().map(|o| o[bi].sigma[k]).sum::<f64>() / reps;
            bias += (mean - truth).abs();
            rmse += mse.sqrt();
            se_sd += se / var.sqrt();
        }
        for (mi, md) in cfg.methods.iter().enumerate() {
            let covered = ok.iter().filter(|o| o[bi].bands[mi].0).count();
            rows.push(McRow {
                basis: p.name.clone(),
                method: md.method,
                bias: bias / g as f64,
                rmse: rmse / g as f64,
                se_sd: se_sd / g as f64,
                cover: 100.0 * covered as f64 / reps,
                length: ok.iter().map(|o| o[bi].bands[mi].1).sum::<f64>() / reps,
                stat: ok.iter().map(|o| o[bi].bands[mi].2).sum::<f64>() / reps,
            });
        }
    }
    Ok(McReport {
        rows,
        replications: cfg.replications,
        failed,
        seed: cfg.seed,
        truth,
        config: cfg.clone(),
    })
}

/// What the estimand gap compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapTarget {
    /// `Z(w)'β(u) − θ(u, w)`.
    #[default]
    Quantile,
    /// `∂_w Z(w)'β(u) − g'(w)`.
    Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimandGap {
    /// Axes `[u grid, w grid]`.
    pub gap: GridFunction,
    pub target: GapTarget,
    pub mega_n: usize,
}

impl EstimandGap {
    /// Root mean square of the gap over the grid.
    pub fn l2(&self) -> f64 {
        let v = &self.gap.values;
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    pub fn sup(&self) -> f64 {
        self.gap.values.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

/// Fits the series quantile regression on a mega-sample (the base covariate
/// sample repeated `repeats` times, fresh outcomes) and compares the fit with
/// the truth on `grid × w_points`, with any `V` held at its mean.
pub fn estimand_gap(
    dgp: &DgpSpec,
    basis_config: &BasisConfig,
    grid: &QuantileGrid,
    w_points: &[f64],
    repeats: usize,
    target: GapTarget,
    seed: u64,
) -> Result<EstimandGap> {
    dgp.validate()?;
    if repeats == 0 || w_points.is_empty() {
        return Err(invalid("estimand gap needs repeats ≥ 1 and evaluation points"));
    }
    let base = dgp.draw_covariates(&mut rng::substream(seed, Domain::Design, 0));
    let extra = dgp.basis_extra_covariates();
    let basis = make_basis(&basis_config.clone().with_extra_linear(extra), &base)?;
    let mega: Vec<Vec<f64>> = (0..repeats).flat_map(|_| base.iter().cloned()).collect();
    let y = dgp.draw_outcomes(&mega, &mut rng::substream(seed, Domain::MegaSample, 0));
    let data = Dataset::new(y, &basis.design_matrix(&mega))?;
    let betas = grid
        .points()
        .par_iter()
        .map(|&u| solver::solve_qr(&data, u, None).map(|f| f.beta))
        .collect::<Result<Vec<_>>>()?;

    let v_mean = vec![0.5; extra];
    let mut values = Vec::with_capacity(grid.len() * w_points.len());
    for (k, &u) in grid.points().iter().enumerate() {
        for &w in w_points {
            let mut x = vec![w];
            x.extend_from_slice(&v_mean);
            let (fit_loading, truth) = match target {
                GapTarget::Quantile => (basis.eval(&x), dgp.truth(u, &x)),
                GapTarget::Derivative => (basis.eval_derivative(&x, 0)?, dgp.g_prime(w)),
            };
            let fitted: f64 = fit_loading.iter().zip(&betas[k]).map(|(a, b)| a * b).sum();
            values.push(fitted - truth);
        }
    }
    Ok(EstimandGap {
        gap: GridFunction::new(vec![grid.points().to_vec(), w_points.to_vec()], values)?,
        target,
        mega_n: data.n(),
    })
}
