//! Simulated copies of the scaled coefficient process `√n(β̂(·) − β(·))`.
//!
//! Four couplings are available:
//!
//! * pivotal: `Ĵ⁻¹(u) 𝕌*(u)` with `𝕌*(u) = n^{-1/2} Σ Z_i (u − 1{U_i ≤ u})`;
//! * Gaussian: `Ĵ⁻¹(u) Σ̂^{1/2} BB(u)` for an `m`-vector of Brownian bridges;
//! * weighted bootstrap: `√n(β̂ᵇ(u) − β̂(u))` with exponential weights;
//! * gradient bootstrap: `√n(β̂*(u) − β̂(u))` where `β̂*` minimizes the
//!   objective perturbed by `−𝕌*(u)'β/√n`.
//!
//! Draw `b` always consumes the substream `(seed, method, b)`, so results do
//! not depend on the number of threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::process::{CoefficientProcess, QuantileGrid};
use crate::rng::{self, Domain};
use crate::solver::{self, Dataset, SolveOptions};

pub const DEFAULT_SIMULATION_DRAWS: usize = 1000;
pub const DEFAULT_BOOTSTRAP_DRAWS: usize = 199;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMethod {
    Pivotal,
    Gaussian,
    #[serde(alias = "weighted_bootstrap")]
    Weighted,
    #[serde(alias = "gradient_bootstrap")]
    Gradient,
}

impl CouplingMethod {
    pub fn default_draws(self) -> usize {
        match self {
            Self::Pivotal | Self::Gaussian => DEFAULT_SIMULATION_DRAWS,
            Self::Weighted | Self::Gradient => DEFAULT_BOOTSTRAP_DRAWS,
        }
    }

    /// Bootstrap methods refit on the raw data.
    pub fn needs_data(self) -> bool {
        matches!(self, Self::Weighted | Self::Gradient)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Pivotal => "pivotal",
            Self::Gaussian => "gaussian",
            Self::Weighted => "weighted",
            Self::Gradient => "gradient",
        }
    }
}

/// How the gradient bootstrap imposes its linear perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientPath {
    /// Pass `𝕌*(u)` to the solver as a linear term.
    #[default]
    LinearTerm,
    /// Append the observation `(Y_{n+1}, X_{n+1}) = (n max|Y_i|, √n 𝕌*(u)/u)`,
    /// which contributes `−𝕌*(u)'β/√n` as long as its residual stays positive.
    AugmentedObservation,
}

/// `B` draws of the scaled process on a grid, stored draw-major, then grid
/// point, then coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessDraws {
    pub method: CouplingMethod,
    pub seed: u64,
    pub b: usize,
    pub grid: QuantileGrid,
    pub m: usize,
    pub draws: Vec<f64>,
}

impl ProcessDraws {
    fn assemble(method: CouplingMethod, seed: u64, grid: &QuantileGrid, m: usize, per_draw: Vec<Vec<f64>>) -> Result<Self> {
        let b = per_draw.len();
        if b == 0 {
            return Err(invalid("at least one draw is required"));
        }
        let draws: Vec<f64> = per_draw.into_iter().flatten().collect();
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence {
                iterations: 0,
                gap: f64::NAN,
            });
        }
        Ok(Self {
            method,
            seed,
            b,
            grid: grid.clone(),
            m,
            draws,
        })
    }

    /// Draw `b` at grid point `k`.
    pub fn draw(&self, b: usize, k: usize) -> &[f64] {
        let start = (b * self.grid.len() + k) * self.m;
        &self.draws[start..start + self.m]
    }
}

/// Sample path of `𝕌*(·)` on the grid for one set of uniforms; one row per
/// grid point.
///
/// The same `U_1, …, U_n` serve every grid point.
pub fn score_from_uniforms(data: &Dataset, grid: &QuantileGrid, uniforms: &[f64]) -> Vec<Vec<f64>> {
    let (n, m) = (data.n(), data.m());
    let mut total = vec![0.0; m];
    for i in 0..n {
        for (t, z) in total.iter_mut().zip(data.row(i)) {
            *t += z;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| uniforms[a].total_cmp(&uniforms[b]).then(a.cmp(&b)));
    let sqrt_n = (n as f64).sqrt();
    let mut below = vec![0.0; m];
    let mut next = 0;
    grid.points()
        .iter()
        .map(|&u| {
            while next < n && uniforms[order[next]] <= u {
                for (s, z) in below.iter_mut().zip(data.row(order[next])) {
                    *s += z;
                }
                next += 1;
            }
            total
                .iter()
                .zip(&below)
                .map(|(t, s)| (u * t - s) / sqrt_n)
                .collect()
        })
        .collect()
}

/// `𝕌*(·)` for draw `index` of the pivotal stream rooted at `seed`.
pub fn pivotal_score(data: &Dataset, grid: &QuantileGrid, seed: u64, domain: Domain, index: u64) -> Vec<Vec<f64>> {
    let mut r = rng::substream(seed, domain, index);
    let uniforms: Vec<f64> = (0..data.n()).map(|_| r.random::<f64>()).collect();
    score_from_uniforms(data, grid, &uniforms)
}

/// `m` independent standard Brownian bridges sampled exactly on the grid by
/// sequential conditional Gaussians; one row per grid point.
pub fn brownian_bridge(grid: &QuantileGrid, m: usize, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut prev_u = 0.0;
    let mut prev = vec![0.0; m];
    let mut out = Vec::with_capacity(grid.len());
    for &u in grid.points() {
        // BB(u) | BB(s) ~ N(BB(s)(1−u)/(1−s), (u−s)(1−u)/(1−s))
        let ratio = (1.0 - u) / (1.0 - prev_u);
        let sd = ((u - prev_u) * ratio).sqrt();
        for x in prev.iter_mut() {
            let e: f64 = r.sample(StandardNormal);
            *x = *x * ratio + sd * e;
        }
        out.push(prev.clone());
        prev_u = u;
    }
    out
}

/// `Σ̂^{1/2} BB(·)` for draw `index` of the Gaussian stream.
pub fn gaussian_score(gram_sqrt: &nalgebra::DMatrix<f64>, grid: &QuantileGrid, seed: u64, index: u64) -> Vec<Vec<f64>> {
    let m = gram_sqrt.nrows();
    let mut r = rng::substream(seed, Domain::Gaussian, index);
    brownian_bridge(grid, m, &mut r)
        .into_iter()
        .map(|bb| linalg::mat_vec(gram_sqrt, &bb))
        .collect()
}

fn project(proc: &CoefficientProcess, score: Vec<Vec<f64>>) -> Vec<f64> {
    score
        .iter()
        .enumerate()
        .flat_map(|(k, s)| linalg::mat_vec(proc.jacobian_inverse(k), s))
        .collect()
}

fn check_draws(b: usize) -> Result<()> {
    if b == 0 {
        Err(invalid("the number of draws must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_data(data: &Dataset, proc: &CoefficientProcess) -> Result<()> {
    if data.n() != proc.n || data.m() != proc.m() {
        return Err(invalid(format!(
            "data ({} x {}) does not match the fitted process ({} x {})",
            data.n(),
            data.m(),
            proc.n,
            proc.m()
        )));
    }
    Ok(())
}

/// Pivotal coupling `Ĵ⁻¹(u) 𝕌*(u)`.
pub fn draw_pivotal(data: &Dataset, proc: &CoefficientProcess, b: usize, seed: u64) -> Result<ProcessDraws> {
    check_draws(b)?;
    check_data(data, proc)?;
    let per_draw: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|i| project(proc, pivotal_score(data, &proc.grid, seed, Domain::Pivotal, i as u64)))
        .collect();
    ProcessDraws::assemble(CouplingMethod::Pivotal, seed, &proc.grid, proc.m(), per_draw)
}

/// Gaussian coupling `Ĵ⁻¹(u) Σ̂^{1/2} BB(u)`.
pub fn draw_gaussian(proc: &CoefficientProcess, b: usize, seed: u64) -> Result<ProcessDraws> {
    check_draws(b)?;
    let root = linalg::sym_sqrt(&proc.gram);
    let per_draw: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|i| project(proc, gaussian_score(&root, &proc.grid, seed, i as u64)))
        .collect();
    ProcessDraws::assemble(CouplingMethod::Gaussian, seed, &proc.grid, proc.m(), per_draw)
}

fn refit_grid(
    data: &Dataset,
    proc: &CoefficientProcess,
    perturbation: impl Fn(usize) -> Option<Vec<f64>>,
) -> Result<Vec<f64>> {
    let sqrt_n = (proc.n as f64).sqrt();
    let mut out = Vec::with_capacity(proc.grid.len() * proc.m());
    let mut previous: Option<Vec<usize>> = None;
    for (k, &u) in proc.grid.points().iter().enumerate() {
        // the refit at the previous grid point is usually a few pivots away
        let warm = previous
            .take()
            .or_else(|| proc.diagnostics.get(k).map(|d| d.basis.clone()));
        let opts = SolveOptions {
            warm_start: warm,
            ..SolveOptions::default()
        };
        let p = perturbation(k);
        let fit = solver::solve_qr_with(data, u, p.as_deref(), &opts)?;
        previous = Some(fit.basis.clone());
        out.extend(fit.beta.iter().zip(&proc.betas[k]).map(|(a, b)| sqrt_n * (a - b)));
    }
    Ok(out)
}

fn exponential_weights(n: usize, seed: u64, domain: Domain, index: u64) -> Vec<f64> {
    let mut r = rng::substream(seed, domain, index);
    (0..n).map(|_| r.sample::<f64, _>(Exp1)).collect()
}

/// Weighted bootstrap with i.i.d. standard exponential weights.
///
/// A draw whose refit fails is retried once with weights from the retry
/// stream; a second failure is reported.
pub fn draw_weighted_bootstrap(data: &Dataset, proc: &CoefficientProcess, b: usize, seed: u64) -> Result<ProcessDraws> {
    check_draws(b)?;
    check_data(data, proc)?;
    let n = data.n();
    let per_draw = (0..b)
        .into_par_iter()
        .map(|i| {
            let w = exponential_weights(n, seed, Domain::WeightedBootstrap, i as u64);
            match refit_grid(&data.with_weights(w)?, proc, |_| None) {
                Ok(d) => Ok(d),
                Err(e) if !e.is_user_error() => {
                    log::warn!("weighted bootstrap draw {i} failed ({e}); retrying");
                    let w = exponential_weights(n, seed, Domain::Retry, i as u64);
                    refit_grid(&data.with_weights(w)?, proc, |_| None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ProcessDraws::assemble(CouplingMethod::Weighted, seed, &proc.grid, proc.m(), per_draw)
}

/// Weighted bootstrap with caller-supplied weight vectors, one per draw.
pub fn draw_weighted_bootstrap_with_weights(
    data: &Dataset,
    proc: &CoefficientProcess,
    weights: &[Vec<f64>],
) -> Result<ProcessDraws> {
    check_draws(weights.len())?;
    check_data(data, proc)?;
    let per_draw = weights
        .par_iter()
        .map(|w| refit_grid(&data.with_weights(w.clone())?, proc, |_| None))
        .collect::<Result<Vec<_>>>()?;
    ProcessDraws::assemble(CouplingMethod::Weighted, 0, &proc.grid, proc.m(), per_draw)
}

/// Gradient bootstrap `√n(β̂*(u) − β̂(u))`.
///
/// A draw whose refit fails (typically an unbounded perturbed problem) is
/// retried once with uniforms from the retry stream; a second failure is
/// reported.
pub fn draw_gradient_bootstrap(
    data: &Dataset,
    proc: &CoefficientProcess,
    b: usize,
    seed: u64,
    via: GradientPath,
) -> Result<ProcessDraws> {
    check_draws(b)?;
    check_data(data, proc)?;
    let per_draw = (0..b)
        .into_par_iter()
        .map(|i| {
            let score = pivotal_score(data, &proc.grid, seed, Domain::GradientBootstrap, i as u64);
            match gradient_draw(data, proc, &score, via) {
                Ok(d) => Ok(d),
                // at finite n the perturbed objective can be unbounded below
                Err(e) if !e.is_user_error() => {
                    log::warn!("gradient bootstrap draw {i} failed ({e}); retrying");
                    let score = pivotal_score(data, &proc.grid, seed, Domain::GradientRetry, i as u64);
                    gradient_draw(data, proc, &score, via)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ProcessDraws::assemble(CouplingMethod::Gradient, seed, &proc.grid, proc.m(), per_draw)
}

/// Gradient bootstrap with caller-supplied score paths `𝕌*(·)`, one per draw.
pub fn draw_gradient_bootstrap_with_scores(
    data: &Dataset,
    proc: &CoefficientProcess,
    scores: &[Vec<Vec<f64>>],
    via: GradientPath,
) -> Result<ProcessDraws> {
    check_draws(scores.len())?;
    check_data(data, proc)?;
    let per_draw = scores
        .par_iter()
        .map(|s| gradient_draw(data, proc, s, via))
        .collect::<Result<Vec<_>>>()?;
    ProcessDraws::assemble(CouplingMethod::Gradient, 0, &proc.grid, proc.m(), per_draw)
}

fn gradient_draw(data: &Dataset, proc: &CoefficientProcess, score: &[Vec<f64>], via: GradientPath) -> Result<Vec<f64>> {
    if score.len() != proc.grid.len() {
        return Err(Error::GridMismatch(format!(
            "score path has {} points, grid has {}",
            score.len(),
            proc.grid.len()
        )));
    }
    match via {
        GradientPath::LinearTerm => refit_grid(data, proc, |k| Some(score[k].clone())),
        GradientPath::AugmentedObservation => {
            let sqrt_n = (proc.n as f64).sqrt();
            let mut out = Vec::with_capacity(proc.grid.len() * proc.m());
            for (k, &u) in proc.grid.points().iter().enumerate() {
                let fit = solve_augmented(data, u, &score[k], proc.diagnostics.get(k).map(|d| d.basis.clone()))?;
                out.extend(fit.beta.iter().zip(&proc.betas[k]).map(|(a, b)| sqrt_n * (a - b)));
            }
            Ok(out)
        }
    }
}

/// Solves the perturbed problem through an appended observation and checks
/// that the observation stayed strictly above the fit.
pub fn solve_augmented(data: &Dataset, u: f64, score: &[f64], warm: Option<Vec<usize>>) -> Result<solver::QrFit> {
    let n = data.n() as f64;
    let x: Vec<f64> = score.iter().map(|s| n.sqrt() * s / u).collect();
    let y_aug = n * data.y().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let aug = data.augmented(y_aug, &x, 1.0)?;
    let opts = SolveOptions {
        warm_start: warm,
        ..SolveOptions::default()
    };
    let fit = solver::solve_qr_with(&aug, u, None, &opts)?;
    let fitted: f64 = x.iter().zip(&fit.beta).map(|(a, b)| a * b).sum();
    if !(y_aug > fitted) {
        return Err(Error::AugmentedGuard { u, y_aug, fitted });
    }
    Ok(fit)
}
