//! From logits to conditional probabilities, survival curves and predictions.

use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// Logistic function, evaluated without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `f_k = P(T > t_k | T > t_{k-1}, X)` for `k = 1..K-1`.
///
/// Sigmoids of finite logits lie in `(0, 1)` mathematically; in `f64` they
/// saturate to exactly 0 or 1 beyond `|z| ~ 37`, so the stored values are only
/// guaranteed to lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondProbs(Vec<f64>);

impl CondProbs {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid(
                "conditional probabilities need at least one bin",
            ));
        }
        if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(
                "conditional probabilities must lie in [0, 1]",
            ));
        }
        Ok(CondProbs(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn num_bins(&self) -> usize {
        self.0.len() + 1
    }
}

/// `S_k = f_1 * ... * f_k` on the edges of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve<'g> {
    values: Vec<f64>,
    grid: &'g TimeGrid,
}

impl<'g> SurvivalCurve<'g> {
    /// Wraps precomputed curve values; they must be nonincreasing in `[0, 1]`.
    pub fn from_values(values: Vec<f64>, grid: &'g TimeGrid) -> Result<Self> {
        if values.len() + 1 != grid.num_bins() {
            return Err(Error::shape(format!(
                "curve has {} points, grid has {} edges",
                values.len(),
                grid.num_bins() - 1
            )));
        }
        if values.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::invalid("survival values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("survival values must be nonincreasing"));
        }
        Ok(SurvivalCurve { values, grid })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &'g TimeGrid {
        self.grid
    }

    /// Curve value at bin `bin`, clamped to the last edge for `bin = K`.
    pub fn at_bin(&self, bin: usize) -> f64 {
        self.values[bin.clamp(1, self.values.len()) - 1]
    }
}

pub fn conditional_probs(logits: &[f64]) -> Result<CondProbs> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::invalid("logits must be finite"));
    }
    CondProbs::new(logits.iter().map(|&z| sigmoid(z)).collect())
}

/// Cumulative product of conditional probabilities.
pub fn survival_curve<'g>(probs: &CondProbs, grid: &'g TimeGrid) -> Result<SurvivalCurve<'g>> {
    if probs.num_bins() != grid.num_bins() {
        return Err(Error::shape(format!(
            "{} conditional probabilities for a {}-bin grid",
            probs.values().len(),
            grid.num_bins()
        )));
    }
    let values = probs
        .values()
        .iter()
        .scan(1.0, |acc, &f| {
            *acc *= f;
            Some(*acc)
        })
        .collect();
    Ok(SurvivalCurve { values, grid })
}

/// Predicted bin: `1 + #{k : f_k > 0.5}`.
pub fn predict_bin(probs: &CondProbs) -> usize {
    1 + probs.values().iter().filter(|&&f| f > 0.5).count()
}

/// Time at which the piecewise-linear curve through `(0, 1), (t_1, S_1), ...`
/// first reaches 0.5; `T_max` if it never does.
pub fn median_crossing_time(curve: &SurvivalCurve<'_>) -> f64 {
    let grid = curve.grid;
    let mut prev_t = 0.0;
    let mut prev_s = 1.0;
    for (k, &s) in curve.values.iter().enumerate() {
        let t = grid.edge(k + 1);
        if s <= 0.5 {
            // prev_s > 0.5 >= s, so the slope is nonzero
            return prev_t + (prev_s - 0.5) / (prev_s - s) * (t - prev_t);
        }
        prev_t = t;
        prev_s = s;
    }
    grid.t_max()
}
