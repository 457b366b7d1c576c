//! Weighted moving averages, recursive composition, and exact lag
//! arithmetic.
//!
//! A weight vector indexes bars by age: index 0 is the most recent price,
//! index i the price i bars ago, with a fixed one-bar step. Its lag is the
//! weighted mean age `sum(w_i * i) / sum(w_i)`; a unit-sum filter with lag L
//! reproduces a linear trend delayed by exactly L bars. Composing a moving
//! average with itself k times convolves the weights k-fold and multiplies
//! the lag by k, which is what makes the zero-lag DEMA/TEMA combinations
//! solvable as a small linear system.

use crate::error::{Error, Result};

/// Omitted tail mass at which geometric EMA weights are truncated.
pub const EMA_TAIL_TOLERANCE: f64 = 1e-8;

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Finite moving-average weights, most recent bar first.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Wraps raw weights. They must be finite, non-empty, and have a
    /// non-zero sum.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument(
                "weight vector must be non-empty".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum == 0.0 {
            return Err(Error::ZeroWeightSum);
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when the weights sum to 1 within 1e-12, as required for
    /// averaging use.
    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }

    /// Rescales the weights to unit sum.
    pub fn normalized(&self) -> Self {
        let sum = self.sum();
        Self {
            weights: self.weights.iter().map(|w| w / sum).collect(),
        }
    }

    /// Weighted mean age of the filter, in bars.
    pub fn lag(&self) -> Result<f64> {
        let sum = self.sum();
        if sum == 0.0 {
            return Err(Error::ZeroWeightSum);
        }
        let weighted_age: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(age, w)| w * age as f64)
            .sum();
        Ok(weighted_age / sum)
    }

    /// Weights of the k-fold recursive application of this moving average:
    /// the k-fold self-convolution. Output length is `k*(len-1) + 1`.
    pub fn compose(&self, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument(
                "composition order must be >= 1".into(),
            ));
        }
        let mut out = self.weights.clone();
        for _ in 1..k {
            out = convolve(&out, &self.weights);
        }
        Ok(Self { weights: out })
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Equal weights over `period` bars.
pub fn sma(period: usize) -> Result<WeightVector> {
    if period < 1 {
        return Err(Error::InvalidArgument(format!(
            "period must be >= 1, got {period}"
        )));
    }
    WeightVector::new(vec![1.0 / period as f64; period])
}

/// Geometric weights with `alpha = 2 / (period + 1)`, truncated at the
/// smallest length where the omitted tail mass drops below
/// [`EMA_TAIL_TOLERANCE`], then renormalized to unit sum.
pub fn ema(period: usize) -> Result<WeightVector> {
    if period < 1 {
        return Err(Error::InvalidArgument(format!(
            "period must be >= 1, got {period}"
        )));
    }
    let alpha = 2.0 / (period as f64 + 1.0);
    let decay = 1.0 - alpha;
    let mut weights = Vec::new();
    let mut w = alpha;
    let mut tail = 1.0;
    loop {
        weights.push(w);
        tail *= decay;
        if tail < EMA_TAIL_TOLERANCE {
            break;
        }
        w *= decay;
    }
    Ok(WeightVector::new(weights)?.normalized())
}

/// A smoothed series. The first `warmup` slots are copies of the raw input;
/// the filter output proper starts at index `warmup`.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub values: Vec<f64>,
    pub warmup: usize,
}

impl Smoothed {
    pub fn is_warmup(&self, t: usize) -> bool {
        t < self.warmup
    }
}

/// Applies a normalized weight vector to a price series
/// (`out[t] = sum_i w_i * price[t-i]`).
///
/// Defined for `t >= len(w) - 1`; earlier slots copy the raw price and are
/// flagged via `warmup`.
pub fn weighted_ma(prices: &[f64], w: &WeightVector) -> Result<Smoothed> {
    let n = w.len();
    if prices.len() < n {
        return Err(Error::SeriesTooShort {
            len: prices.len(),
            needed: n,
        });
    }
    if !w.is_normalized() {
        return Err(Error::InvalidArgument(
            "weights must be normalized to unit sum for averaging".into(),
        ));
    }
    let mut values = Vec::with_capacity(prices.len());
    values.extend_from_slice(&prices[..n - 1]);
    for t in n - 1..prices.len() {
        let mut acc = 0.0;
        for (age, &wi) in w.weights.iter().enumerate() {
            acc += wi * prices[t - age];
        }
        values.push(acc);
    }
    Ok(Smoothed {
        values,
        warmup: n - 1,
    })
}

/// EMA recursion in increment form, seeded on the first price. The
/// increment form keeps constant inputs exactly constant.
fn ema_series(prices: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(prices.len());
    let mut e = prices[0];
    for &p in prices {
        e += alpha * (p - e);
        out.push(e);
    }
    out
}

/// Double EMA: `2*EMA - EMA(EMA)`, computed recursively in O(n).
///
/// Equals `weighted_ma` with the combined weights `2*w - compose(w, 2)`
/// within truncation error; the warm-up region matches that expanded form
/// (`2*(len(w)-1)` leading slots copy the raw price).
pub fn dema(prices: &[f64], period: usize) -> Result<Smoothed> {
    let w = ema(period)?;
    let warmup = 2 * (w.len() - 1);
    if prices.len() < warmup + 1 {
        return Err(Error::SeriesTooShort {
            len: prices.len(),
            needed: warmup + 1,
        });
    }
    let alpha = 2.0 / (period as f64 + 1.0);
    let e1 = ema_series(prices, alpha);
    let e2 = ema_series(&e1, alpha);
    let values = prices
        .iter()
        .zip(e1.iter().zip(&e2))
        .enumerate()
        .map(|(t, (&p, (&a, &b)))| if t < warmup { p } else { 2.0 * a - b })
        .collect();
    Ok(Smoothed { values, warmup })
}

/// Triple EMA: `3*EMA - 3*EMA(EMA) + EMA(EMA(EMA))`.
pub fn tema(prices: &[f64], period: usize) -> Result<Smoothed> {
    let w = ema(period)?;
    let warmup = 3 * (w.len() - 1);
    if prices.len() < warmup + 1 {
        return Err(Error::SeriesTooShort {
            len: prices.len(),
            needed: warmup + 1,
        });
    }
    let alpha = 2.0 / (period as f64 + 1.0);
    let e1 = ema_series(prices, alpha);
    let e2 = ema_series(&e1, alpha);
    let e3 = ema_series(&e2, alpha);
    let values = prices
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            if t < warmup {
                p
            } else {
                3.0 * e1[t] - 3.0 * e2[t] + e3[t]
            }
        })
        .collect();
    Ok(Smoothed { values, warmup })
}

/// Coefficients applied to MA, MA composed twice, and MA composed three
/// times. Unit coefficient sum is the averaging constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCombination {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LinearCombination {
    pub fn coefficient_sum(&self) -> f64 {
        self.a + self.b + self.c
    }

    /// Expands `a*w + b*compose(w,2) + c*compose(w,3)` into a single weight
    /// vector, zero-padding the shorter terms. Orders with a zero
    /// coefficient contribute nothing, including to the length.
    pub fn combined_weights(&self, w: &WeightVector) -> Result<WeightVector> {
        let highest = if self.c != 0.0 {
            3
        } else if self.b != 0.0 {
            2
        } else {
            1
        };
        let mut out = vec![0.0; highest * (w.len() - 1) + 1];
        for (order, coeff) in [(1, self.a), (2, self.b), (3, self.c)] {
            if order > highest || coeff == 0.0 {
                continue;
            }
            for (i, &v) in w.compose(order)?.weights().iter().enumerate() {
                out[i] += coeff * v;
            }
        }
        WeightVector::new(out)
    }
}

/// Solves for the unique unit-sum, zero-lag combination of recursive moving
/// averages: order 2 yields `(2, -1)` (the double MA), order 3 with the
/// extra constraint `c = 1` yields `(3, -3, 1)` (the triple MA).
pub fn solve_zero_lag(order: usize) -> Result<LinearCombination> {
    // Rows: unit coefficient sum; zero combined lag (lag of the k-th
    // composition is k times the base lag); order pin for c.
    let (matrix, rhs) = match order {
        2 => (
            [[1.0, 1.0, 1.0], [1.0, 2.0, 3.0], [0.0, 0.0, 1.0]],
            [1.0, 0.0, 0.0],
        ),
        3 => (
            [[1.0, 1.0, 1.0], [1.0, 2.0, 3.0], [0.0, 0.0, 1.0]],
            [1.0, 0.0, 1.0],
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "zero-lag combinations are defined for orders 2 and 3, got {other}"
            )))
        }
    };
    let [a, b, c] = solve3(matrix, rhs)
        .ok_or_else(|| Error::InvalidArgument("singular zero-lag system".into()))?;
    Ok(LinearCombination { a, b, c })
}

/// 3x3 Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col] == 0.0 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}
