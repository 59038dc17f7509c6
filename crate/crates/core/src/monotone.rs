//! Monotonization of functions on one- or two-dimensional grids.
//!
//! Every operator here is monotone-neutral (leaves monotone input bit-exactly
//! unchanged), weakly contracts sup-norm distances and preserves pointwise
//! order, so monotonizing both envelopes of a confidence band keeps its
//! coverage and never lengthens it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Values on a rectangular grid, stored row-major (the first axis varies
/// slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(invalid("grid functions have one or two axes"));
        }
        for a in &axes {
            if a.is_empty() || a.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(invalid("grid axes must be non-empty and strictly increasing"));
            }
        }
        let size: usize = axes.iter().map(Vec::len).product();
        if values.len() != size {
            return Err(invalid(format!("expected {size} values, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid function values must be finite"));
        }
        Ok(Self { axes, values })
    }

    /// One-axis function with the axis `0, 1, …, len − 1`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let axis = (0..values.len()).map(|i| i as f64).collect();
        Self::new(vec![axis], values)
    }

    pub fn shape(&self) -> (usize, usize) {
        match self.axes.len() {
            1 => (self.axes[0].len(), 1),
            _ => (self.axes[0].len(), self.axes[1].len()),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.shape().1 + j]
    }

    /// Weakly increasing along every axis.
    pub fn is_monotone(&self) -> bool {
        let (r, c) = self.shape();
        (0..r).all(|i| (1..c).all(|j| self.get(i, j - 1) <= self.get(i, j)))
            && (1..r).all(|i| (0..c).all(|j| self.get(i - 1, j) <= self.get(i, j)))
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            axes: self.axes.clone(),
            values,
        }
    }
}

/// Sup-norm distance between two functions on the same grid.
pub fn sup_distance(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Operator {
    Rearrange,
    Isotonic,
    /// `λ · rearrangement + (1 − λ) · isotonic projection`.
    Combination { lambda: f64 },
}

impl Operator {
    fn validate(self) -> Result<()> {
        match self {
            Self::Combination { lambda } if !(0.0..=1.0).contains(&lambda) => {
                Err(invalid(format!("combination weight {lambda} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    fn apply_1d(self, v: &[f64]) -> Vec<f64> {
        match self {
            Self::Rearrange => rearrange_values(v),
            Self::Isotonic => pava(v),
            Self::Combination { lambda } => combine(&rearrange_values(v), &pava(v), lambda),
        }
    }
}

/// Order of the two sequential passes for two-axis grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiMode {
    /// Mean of the two sequential orders.
    #[default]
    AverageOverOrders,
    /// Along the first axis, then the second.
    FirstAxisFirst,
    /// Along the second axis, then the first.
    SecondAxisFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Increasing,
    Decreasing,
}

fn rearrange_values(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    // stable, so equal values keep their order
    out.sort_by(f64::total_cmp);
    out
}

/// Pool-adjacent-violators: the L2 projection onto non-decreasing vectors.
fn pava(v: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 > s1 / c1 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s0 + s1, c0 + c1);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(v.len());
    for (s, c) in blocks {
        let mean = s / c as f64;
        out.extend(std::iter::repeat_n(mean, c));
    }
    out
}

/// `λ r + (1 − λ) p`, kept between `r` and `p` so that equal inputs pass
/// through unchanged and rounding cannot break the ordering.
fn combine(r: &[f64], p: &[f64], lambda: f64) -> Vec<f64> {
    r.iter()
        .zip(p)
        .map(|(&a, &b)| {
            let x = lambda * a + (1.0 - lambda) * b;
            x.clamp(a.min(b), a.max(b))
        })
        .collect()
}

fn along_first(gf: &GridFunction, op: Operator) -> Vec<f64> {
    let (r, c) = gf.shape();
    let mut out = gf.values.clone();
    for j in 0..c {
        let col: Vec<f64> = (0..r).map(|i| out[i * c + j]).collect();
        for (i, v) in op.apply_1d(&col).into_iter().enumerate() {
            out[i * c + j] = v;
        }
    }
    out
}

fn along_second(values: &[f64], shape: (usize, usize), op: Operator) -> Vec<f64> {
    let (r, c) = shape;
    let mut out = Vec::with_capacity(values.len());
    for i in 0..r {
        out.extend(op.apply_1d(&values[i * c..(i + 1) * c]));
    }
    out
}

fn apply(gf: &GridFunction, op: Operator, mode: MultiMode) -> Result<GridFunction> {
    op.validate()?;
    if gf.axes.len() == 1 {
        return Ok(gf.with_values(op.apply_1d(&gf.values)));
    }
    let shape = gf.shape();
    let first_then_second = || {
        let a = along_first(gf, op);
        along_second(&a, shape, op)
    };
    let second_then_first = || {
        let b = gf.with_values(along_second(&gf.values, shape, op));
        along_first(&b, op)
    };
    let values = match mode {
        MultiMode::FirstAxisFirst => first_then_second(),
        MultiMode::SecondAxisFirst => second_then_first(),
        MultiMode::AverageOverOrders => first_then_second()
            .iter()
            .zip(second_then_first())
            .map(|(a, b)| if *a == b { b } else { 0.5 * a + 0.5 * b })
            .collect(),
    };
    Ok(gf.with_values(values))
}

/// Increasing rearrangement of a one-axis function.
pub fn rearrange_1d(gf: &GridFunction) -> Result<GridFunction> {
    if gf.axes.len() != 1 {
        return Err(invalid("rearrange_1d needs a one-axis function"));
    }
    apply(gf, Operator::Rearrange, MultiMode::default())
}

/// Rearrangement of a two-axis function.
pub fn rearrange_multi(gf: &GridFunction, mode: MultiMode) -> Result<GridFunction> {
    if gf.axes.len() != 2 {
        return Err(invalid("rearrange_multi needs a two-axis function"));
    }
    apply(gf, Operator::Rearrange, mode)
}

/// Isotonic (pool-adjacent-violators) projection of a one-axis function.
pub fn isotonic_project(gf: &GridFunction) -> Result<GridFunction> {
    if gf.axes.len() != 1 {
        return Err(invalid("isotonic_project needs a one-axis function"));
    }
    apply(gf, Operator::Isotonic, MultiMode::default())
}

/// Reverses the value order along `axis`.
fn flip(gf: &GridFunction, axis: usize) -> GridFunction {
    let (r, c) = gf.shape();
    let values = (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .map(|(i, j)| match axis {
            0 => gf.get(r - 1 - i, j),
            _ => gf.get(i, c - 1 - j),
        })
        .collect();
    gf.with_values(values)
}

fn flip_all(gf: &GridFunction, directions: &[Direction]) -> GridFunction {
    let mut out = gf.clone();
    for (axis, d) in directions.iter().enumerate() {
        if *d == Direction::Decreasing {
            out = flip(&out, axis);
        }
    }
    out
}

/// Applies `op` with the requested direction along each axis; decreasing
/// axes are reversed, monotonized upward and reversed back.
pub fn monotonize(gf: &GridFunction, op: Operator, mode: MultiMode, directions: &[Direction]) -> Result<GridFunction> {
    if directions.len() != gf.axes.len() {
        return Err(invalid("one direction per axis is required"));
    }
    let flipped = flip_all(gf, directions);
    Ok(flip_all(&apply(&flipped, op, mode)?, directions))
}

/// Monotonizes both envelopes of a band with the same operator.
pub fn monotonize_band(
    lower: &GridFunction,
    upper: &GridFunction,
    op: Operator,
    mode: MultiMode,
    directions: &[Direction],
) -> Result<(GridFunction, GridFunction)> {
    if lower.axes != upper.axes {
        return Err(invalid("band envelopes live on different grids"));
    }
    Ok((
        monotonize(lower, op, mode, directions)?,
        monotonize(upper, op, mode, directions)?,
    ))
}

/// Intersects a band with the set of monotone functions: the lower envelope
/// becomes its running maximum and the upper one its reverse running minimum.
///
/// Unlike [`monotonize_band`] this can produce an empty band when the truth
/// is not monotone; check [`band_is_empty`].
pub fn intersect_band(
    lower: &GridFunction,
    upper: &GridFunction,
    directions: &[Direction],
) -> Result<(GridFunction, GridFunction)> {
    if lower.axes != upper.axes || directions.len() != lower.axes.len() {
        return Err(invalid("band envelopes and directions do not match"));
    }
    let lo = flip_all(lower, directions);
    let hi = flip_all(upper, directions);
    let (r, c) = lo.shape();
    let mut lv = lo.values.clone();
    let mut hv = hi.values.clone();
    for i in 0..r {
        for j in 0..c {
            let mut best = lv[i * c + j];
            if i > 0 {
                best = best.max(lv[(i - 1) * c + j]);
            }
            if j > 0 {
                best = best.max(lv[i * c + j - 1]);
            }
            lv[i * c + j] = best;
        }
    }
    for i in (0..r).rev() {
        for j in (0..c).rev() {
            let mut best = hv[i * c + j];
            if i + 1 < r {
                best = best.min(hv[(i + 1) * c + j]);
            }
            if j + 1 < c {
                best = best.min(hv[i * c + j + 1]);
            }
            hv[i * c + j] = best;
        }
    }
    Ok((
        flip_all(&lo.with_values(lv), directions),
        flip_all(&hi.with_values(hv), directions),
    ))
}

pub fn band_is_empty(lower: &GridFunction, upper: &GridFunction) -> bool {
    lower.values.iter().zip(&upper.values).any(|(l, u)| l > u)
}
