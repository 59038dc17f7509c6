//! Basic solutions and exact edge-descent pivoting.
//!
//! A vertex is described by `m` observations `h` whose design rows are
//! linearly independent; its coefficients interpolate them exactly,
//! `β = Z_h⁻¹ y_h`. From a vertex the objective is convex and piecewise linear
//! along each of the `2m` edges that release one interpolated observation
//! upward or downward. The vertex is optimal iff no edge has a negative
//! directional derivative; otherwise we follow the steepest edge and stop at
//! the breakpoint where the slope turns non-negative.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use super::{Dataset, INTERPOLATION_TOL};
use crate::error::{Error, Result};

/// Breakpoint `(step, slope jump, observation)`, ordered so that a max-heap
/// pops the smallest step first (ties by observation index).
struct Break((f64, f64, usize));

impl PartialEq for Break {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Break {}

impl PartialOrd for Break {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Break {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0 .0.total_cmp(&self.0 .0).then(other.0 .2.cmp(&self.0 .2))
    }
}

fn basis_matrix(data: &Dataset, h: &[usize]) -> DMatrix<f64> {
    let m = data.m();
    DMatrix::from_fn(m, m, |r, c| data.row(h[r])[c])
}

pub(super) fn valid_basis(data: &Dataset, h: &[usize]) -> bool {
    let m = data.m();
    if h.len() != m || h.iter().any(|&i| i >= data.n()) {
        return false;
    }
    let mut seen = h.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len() == m && basis_matrix(data, h).try_inverse().is_some_and(|inv| inv.iter().all(|v| v.is_finite()))
}

/// Picks `m` linearly independent observations with the smallest absolute
/// residuals at `beta`.
pub(super) fn crossover(data: &Dataset, beta: &[f64]) -> Option<Vec<usize>> {
    let (n, m) = (data.n(), data.m());
    let mut order: Vec<usize> = (0..n).collect();
    let resid: Vec<f64> = (0..n).map(|i| (data.y()[i] - data.fitted(i, beta)).abs()).collect();
    order.sort_by(|&a, &b| resid[a].total_cmp(&resid[b]).then(a.cmp(&b)));
    let mut chosen = Vec::with_capacity(m);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(m);
    for i in order {
        let row = DVector::from_column_slice(data.row(i));
        let norm0 = row.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = row;
        for _ in 0..2 {
            for q in &ortho {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 * norm0 {
            ortho.push(v / norm);
            chosen.push(i);
            if chosen.len() == m {
                return Some(chosen);
            }
        }
    }
    None
}

/// Runs edge-descent pivots from the vertex `h` to an optimal vertex.
///
/// `c` is the sum-scale linear term: the objective is `Σ w_i ρ_u(r_i) − c'β`.
pub(super) fn descend(data: &Dataset, u: f64, c: &[f64], mut h: Vec<usize>) -> Result<(Vec<f64>, Vec<usize>)> {
    let (n, m) = (data.n(), data.m());
    let y = data.y();
    let tol = INTERPOLATION_TOL * data.response_scale();
    let l1_mass: f64 = (0..n)
        .map(|i| data.weight(i) * data.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .sum::<f64>()
        + c.iter().map(|v| v.abs()).sum::<f64>();
    let max_iter = 50 * n + 1000;

    let mut in_basis = vec![false; n];
    let mut resid = vec![0.0; n];
    let mut breaks: Vec<Break> = Vec::with_capacity(n);

    for iter in 0..=max_iter {
        let bmat = basis_matrix(data, &h);
        let binv = bmat.try_inverse().ok_or(Error::NoConvergence {
            iterations: iter,
            gap: f64::NAN,
        })?;
        let yh = DVector::from_iterator(m, h.iter().map(|&i| y[i]));
        let beta: Vec<f64> = (&binv * yh).iter().copied().collect();

        in_basis.iter_mut().for_each(|v| *v = false);
        for &i in &h {
            in_basis[i] = true;
        }
        let mut g = vec![0.0; m];
        let mut degenerate = Vec::new();
        for i in 0..n {
            let r = y[i] - data.fitted(i, &beta);
            resid[i] = r;
            if in_basis[i] {
                continue;
            }
            if r.abs() <= tol {
                degenerate.push(i);
                continue;
            }
            let psi = if r > 0.0 { -u } else { 1.0 - u };
            let s = data.weight(i) * psi;
            for (gj, zj) in g.iter_mut().zip(data.row(i)) {
                *gj += s * zj;
            }
        }
        for (gj, cj) in g.iter_mut().zip(c) {
            *gj -= cj;
        }
        // v = Binv' (g − c): directional derivative part of edge k
        let v: Vec<f64> = (0..m)
            .map(|k| (0..m).map(|j| binv[(j, k)] * g[j]).sum())
            .collect();
        // rows of degenerate points expressed in edge coordinates
        let deg_coords: Vec<(f64, Vec<f64>)> = degenerate
            .iter()
            .map(|&i| {
                let zi = data.row(i);
                let t = (0..m).map(|k| (0..m).map(|j| binv[(j, k)] * zi[j]).sum()).collect();
                (data.weight(i), t)
            })
            .collect();
        let one_sided = |a: f64| if a > 0.0 { (1.0 - u) * a } else { -u * a };

        let mut best: Option<(f64, f64, usize, f64)> = None; // (score, slope, k, sign)
        for k in 0..m {
            let dnorm = (0..m).map(|j| binv[(j, k)].powi(2)).sum::<f64>().sqrt();
            let dmax = (0..m).map(|j| binv[(j, k)].abs()).fold(0.0, f64::max);
            let eps = 1e-11 * l1_mass * dmax;
            let wk = data.weight(h[k]);
            for sign in [1.0, -1.0] {
                let mut slope = sign * v[k] + wk * if sign > 0.0 { 1.0 - u } else { u };
                for (wt, t) in &deg_coords {
                    slope += wt * one_sided(sign * t[k]);
                }
                if slope < -eps {
                    let score = slope / dnorm;
                    if best.is_none_or(|(s, ..)| score < s) {
                        best = Some((score, slope, k, sign));
                    }
                }
            }
        }
        let Some((_, mut slope, k, sign)) = best else {
            return Ok((beta, h));
        };
        if iter == max_iter {
            break;
        }

        let d: Vec<f64> = (0..m).map(|j| sign * binv[(j, k)]).collect();
        breaks.clear();
        for i in 0..n {
            if in_basis[i] || resid[i].abs() <= tol {
                continue;
            }
            let a = data.fitted(i, &d);
            if a == 0.0 {
                continue;
            }
            let t = resid[i] / a;
            if t > 0.0 {
                breaks.push(Break((t, data.weight(i) * a.abs(), i)));
            }
        }
        // the line search usually stops after a few breakpoints, so pop them
        // from a heap instead of sorting all of them
        let mut heap = BinaryHeap::from(std::mem::take(&mut breaks));
        let mut entering = None;
        while let Some(Break((_, jump, i))) = heap.pop() {
            slope += jump;
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        breaks = heap.into_vec();
        let Some(i) = entering else {
            return Err(Error::Unbounded { u });
        };
        h[k] = i;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        gap: f64::NAN,
    })
}
