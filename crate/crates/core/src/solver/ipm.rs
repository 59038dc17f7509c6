//! Mehrotra predictor-corrector interior point method for the dual of the
//! weighted quantile regression LP.
//!
//! With upper bounds `U_i = w_i` and `b = Z'U (1−u) − c` the dual reads
//!
//! ```text
//! minimize  −y'a   subject to  Z'a = b,  0 ≤ a ≤ U
//! ```
//!
//! and the regression coefficients are minus the multipliers of `Z'a = b`.

use nalgebra::{DMatrix, DVector};

use super::Dataset;
use crate::error::{Error, Result};

pub(super) struct IpmOutcome {
    pub beta: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

const STEP_FRACTION: f64 = 0.99995;

fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

pub(super) fn solve(data: &Dataset, u: f64, c: &[f64], gap_tol: f64, max_iter: usize) -> Result<IpmOutcome> {
    let (n, m) = (data.n(), data.m());
    let y = data.y();
    let ub: Vec<f64> = (0..n).map(|i| data.weight(i)).collect();

    let mut b = vec![0.0; m];
    for i in 0..n {
        for (bj, zj) in b.iter_mut().zip(data.row(i)) {
            *bj += (1.0 - u) * ub[i] * zj;
        }
    }
    for (bj, cj) in b.iter_mut().zip(c) {
        *bj -= cj;
    }

    // primal start in the interior of the box
    let mut a: Vec<f64> = ub.iter().map(|w| (1.0 - u) * w).collect();
    let mut s: Vec<f64> = ub.iter().map(|w| u * w).collect();

    // dual start from least squares of q = −y on Z
    let q: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut zq = DVector::<f64>::zeros(m);
    for i in 0..n {
        let row = data.row(i);
        for j in 0..m {
            zq[j] += row[j] * q[i];
            for k in 0..=j {
                gram[(j, k)] += row[j] * row[k];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            gram[(k, j)] = gram[(j, k)];
        }
    }
    let mut beta: Vec<f64> = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&zq).iter().copied().collect(),
        None => vec![0.0; m],
    };
    let beta_cap = 1e10 * (1.0 + beta.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    let resid: Vec<f64> = (0..n).map(|i| q[i] - data.fitted(i, &beta)).collect();
    let spread = resid.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    let shift = 0.1 * spread + 1e-8 * data.response_scale();
    let mut z: Vec<f64> = resid.iter().map(|r| r.max(0.0) + shift).collect();
    let mut w: Vec<f64> = resid.iter().map(|r| (-r).max(0.0) + shift).collect();

    let scale = 1.0 + y.iter().map(|v| v.abs()).sum::<f64>();
    let mut gap = f64::INFINITY;
    let mut theta = vec![0.0; n];
    let mut rd = vec![0.0; n];

    for iter in 0..max_iter {
        // residuals
        let mut rp = b.clone();
        for i in 0..n {
            for (r, zj) in rp.iter_mut().zip(data.row(i)) {
                *r -= a[i] * zj;
            }
        }
        for i in 0..n {
            rd[i] = q[i] - data.fitted(i, &beta) - z[i] + w[i];
        }
        let comp: f64 = (0..n).map(|i| a[i] * z[i] + s[i] * w[i]).sum();
        gap = comp / scale;
        let rp_norm = rp.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let rd_norm = rd.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gap <= gap_tol && rp_norm <= 1e-8 * scale && rd_norm <= 1e-8 * scale {
            return Ok(IpmOutcome {
                beta: beta.iter().map(|v| -v).collect(),
                gap,
                iterations: iter,
            });
        }
        // an infeasible dual box means the regression objective is unbounded;
        // the multipliers then diverge
        if beta.iter().any(|v| v.abs() > beta_cap) {
            return Err(Error::Unbounded { u });
        }
        let mu = comp / (2 * n) as f64;

        for i in 0..n {
            theta[i] = 1.0 / (z[i] / a[i] + w[i] / s[i]);
        }
        let mut normal = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            let row = data.row(i);
            for j in 0..m {
                let t = theta[i] * row[j];
                for k in 0..=j {
                    normal[(j, k)] += t * row[k];
                }
            }
        }
        let mut ridge = 0.0;
        for j in 0..m {
            for k in 0..j {
                normal[(k, j)] = normal[(j, k)];
            }
            ridge = f64::max(ridge, normal[(j, j)]);
        }
        let chol = match normal.clone().cholesky() {
            Some(ch) => ch,
            None => {
                let mut reg = normal;
                for j in 0..m {
                    reg[(j, j)] += 1e-12 * ridge.max(1.0);
                }
                reg.cholesky().ok_or(Error::NoConvergence {
                    iterations: iter,
                    gap,
                })?
            }
        };

        // direction for complementarity targets r3 (a∘z) and r4 (s∘w)
        let direction = |r3: &[f64], r4: &[f64]| {
            let g: Vec<f64> = (0..n).map(|i| rd[i] - r3[i] / a[i] + r4[i] / s[i]).collect();
            let mut rhs = DVector::from_column_slice(&rp);
            for i in 0..n {
                let t = theta[i] * g[i];
                for (j, zj) in data.row(i).iter().enumerate() {
                    rhs[j] += t * zj;
                }
            }
            let dbeta = chol.solve(&rhs);
            let dbeta: Vec<f64> = dbeta.iter().copied().collect();
            let da: Vec<f64> = (0..n)
                .map(|i| theta[i] * (data.fitted(i, &dbeta) - g[i]))
                .collect();
            let dz: Vec<f64> = (0..n).map(|i| (r3[i] - z[i] * da[i]) / a[i]).collect();
            let dw: Vec<f64> = (0..n).map(|i| (r4[i] + w[i] * da[i]) / s[i]).collect();
            (dbeta, da, dz, dw)
        };

        // predictor
        let r3: Vec<f64> = (0..n).map(|i| -a[i] * z[i]).collect();
        let r4: Vec<f64> = (0..n).map(|i| -s[i] * w[i]).collect();
        let (_, da, dz, dw) = direction(&r3, &r4);
        let ds: Vec<f64> = da.iter().map(|v| -v).collect();
        let ap = max_step(&a, &da).min(max_step(&s, &ds)).min(1.0);
        let ad = max_step(&z, &dz).min(max_step(&w, &dw)).min(1.0);
        let mu_aff: f64 = (0..n)
            .map(|i| {
                (a[i] + ap * da[i]) * (z[i] + ad * dz[i]) + (s[i] + ap * ds[i]) * (w[i] + ad * dw[i])
            })
            .sum::<f64>()
            / (2 * n) as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector
        let r3: Vec<f64> = (0..n)
            .map(|i| sigma * mu - a[i] * z[i] - da[i] * dz[i])
            .collect();
        let r4: Vec<f64> = (0..n)
            .map(|i| sigma * mu - s[i] * w[i] - ds[i] * dw[i])
            .collect();
        let (dbeta, da, dz, dw) = direction(&r3, &r4);
        let ds: Vec<f64> = da.iter().map(|v| -v).collect();
        let ap = (STEP_FRACTION * max_step(&a, &da).min(max_step(&s, &ds))).min(1.0);
        let ad = (STEP_FRACTION * max_step(&z, &dz).min(max_step(&w, &dw))).min(1.0);
        if ap < 1e-14 && ad < 1e-14 {
            break;
        }
        for i in 0..n {
            a[i] += ap * da[i];
            // keep a + s = U exactly
            s[i] = ub[i] - a[i];
            if s[i] <= 0.0 || a[i] <= 0.0 {
                let eps = 1e-14 * ub[i];
                a[i] = a[i].clamp(eps, ub[i] - eps);
                s[i] = ub[i] - a[i];
            }
            z[i] += ad * dz[i];
            w[i] += ad * dw[i];
        }
        for (bj, dj) in beta.iter_mut().zip(&dbeta) {
            *bj += ad * dj;
        }
    }

    // The vertex phase repairs moderate inaccuracy; give up only when the
    // interior point phase is far from optimal.
    if gap <= 1e-6 {
        Ok(IpmOutcome {
            beta: beta.iter().map(|v| -v).collect(),
            gap,
            iterations: max_iter,
        })
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            gap,
        })
    }
}
