//! Equidistant discretization of the follow-up axis.
//!
//! A grid with `K` bins stores the `K - 1` upper edges `t_1 < ... < t_{K-1}`.
//! Bin `k` covers the left-open, right-closed interval `(t_{k-1}, t_k]` with
//! `t_0 = 0`; bin `K` is the catch-all `(t_{K-1}, inf)`. Bin indices are 1-based
//! throughout the crate.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct TimeGrid {
    edges: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    edges: Vec<f64>,
    num_bins: usize,
}

impl TryFrom<GridRepr> for TimeGrid {
    type Error = Error;

    fn try_from(repr: GridRepr) -> Result<Self> {
        if repr.num_bins != repr.edges.len() + 1 {
            return Err(Error::invalid(format!(
                "num_bins {} does not match {} edges",
                repr.num_bins,
                repr.edges.len()
            )));
        }
        TimeGrid::from_edges(repr.edges)
    }
}

impl From<TimeGrid> for GridRepr {
    fn from(grid: TimeGrid) -> Self {
        let num_bins = grid.num_bins();
        GridRepr {
            edges: grid.edges,
            num_bins,
        }
    }
}

impl TimeGrid {
    /// Builds a grid from explicit upper edges.
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::invalid("a time grid needs at least one edge"));
        }
        if edges.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(Error::invalid("grid edges must be finite and positive"));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid edges must be strictly increasing"));
        }
        Ok(TimeGrid { edges })
    }

    /// Equidistant grid over `[0, max(times)]`.
    ///
    /// Without an explicit bin count, `K` is the square root of the number of
    /// observations rounded half up, floored at 2.
    pub fn fit(times: &[f64], num_bins: Option<usize>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("cannot build a time grid from no times"));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::invalid(format!(
                "times must be finite and nonnegative, got {t}"
            )));
        }
        let t_max = times.iter().copied().fold(0.0_f64, f64::max);
        if t_max <= 0.0 {
            return Err(Error::invalid("all times are zero"));
        }
        let k = match num_bins {
            Some(k) if k < 2 => {
                return Err(Error::invalid(format!("num_bins must be >= 2, got {k}")))
            }
            Some(k) => k,
            None => sqrt_bin_count(times.len()),
        };
        let width = t_max / (k - 1) as f64;
        let mut edges: Vec<f64> = (1..k - 1).map(|i| i as f64 * width).collect();
        edges.push(t_max);
        TimeGrid::from_edges(edges)
    }

    /// Number of bins `K`.
    pub fn num_bins(&self) -> usize {
        self.edges.len() + 1
    }

    /// The `K - 1` upper edges.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Upper edge of bin `k` (1-based, `k <= K - 1`); `edge(0)` is 0.
    pub fn edge(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.edges[k - 1]
        }
    }

    pub fn t_max(&self) -> f64 {
        *self.edges.last().expect("grid has at least one edge")
    }

    /// Bin index in `1..=K` of a nonnegative time.
    pub fn discretize(&self, time: f64) -> Result<usize> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::invalid(format!(
                "time must be finite and nonnegative, got {time}"
            )));
        }
        Ok(self.edges.partition_point(|&e| e < time) + 1)
    }
}

/// `max(2, round_half_up(sqrt(n)))` in integer arithmetic.
pub fn sqrt_bin_count(n: usize) -> usize {
    let r = n.isqrt();
    // sqrt(n) >= r + 0.5  <=>  n >= r^2 + r + 0.25  <=>  n > r^2 + r
    let rounded = if n > r * r + r { r + 1 } else { r };
    rounded.max(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_bin(time: f64, edges: &[f64]) -> usize {
        for (i, e) in edges.iter().enumerate() {
            if time <= *e {
                return i + 1;
            }
        }
        edges.len() + 1
    }

    #[test]
    fn hundred_observations_give_ten_bins() {
        let mut times: Vec<f64> = (0..100).map(|i| i as f64 * 0.9).collect();
        times[0] = 90.0;
        let grid = TimeGrid::fit(&times, None).unwrap();
        assert_eq!(grid.num_bins(), 10);
        let expected: Vec<f64> = (1..=9).map(|k| 10.0 * k as f64).collect();
        assert_eq!(grid.edges(), expected.as_slice());
    }

    #[test]
    fn two_bins_single_edge_at_max() {
        let grid = TimeGrid::fit(&[0.0, 5.0], Some(2)).unwrap();
        assert_eq!(grid.edges(), &[5.0]);
        assert_eq!(grid.num_bins(), 2);
    }

    #[test]
    fn bin_count_rounds_half_up() {
        // 17^2 = 289 <= 320 and 17.5^2 = 306.25 < 320 < 18^2 = 324
        assert_eq!(sqrt_bin_count(320), 18);
        assert_eq!(sqrt_bin_count(224), 15);
        assert_eq!(sqrt_bin_count(100), 10);
        assert_eq!(sqrt_bin_count(1), 2);
        assert_eq!(sqrt_bin_count(0), 2);
        for n in 1..5000usize {
            let r = sqrt_bin_count(n);
            let s = (n as f64).sqrt();
            assert_eq!(r, ((s + 0.5).floor() as usize).max(2), "n = {n}");
        }
    }

    #[test]
    fn last_edge_is_exactly_t_max() {
        let times = [0.3, 1.7, 33.3333, 7.1];
        for k in 2..20 {
            let grid = TimeGrid::fit(&times, Some(k)).unwrap();
            assert_eq!(grid.t_max(), 33.3333);
            assert_eq!(grid.num_bins(), k);
        }
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(TimeGrid::fit(&[], None).is_err());
        assert!(TimeGrid::fit(&[0.0, 0.0], None).is_err());
        assert!(TimeGrid::fit(&[1.0, 2.0], Some(1)).is_err());
        assert!(TimeGrid::fit(&[1.0, -2.0], None).is_err());
        assert!(TimeGrid::fit(&[1.0, f64::NAN], None).is_err());
    }

    #[test]
    fn closed_right_endpoint_and_catch_all() {
        let grid = TimeGrid::fit(&[50.0], Some(6)).unwrap();
        assert_eq!(grid.discretize(grid.edge(3)).unwrap(), 3);
        assert_eq!(grid.discretize(grid.t_max() + 1.0).unwrap(), 6);
        assert_eq!(grid.discretize(0.0).unwrap(), 1);
        assert!(grid.discretize(-1.0).is_err());
        assert!(grid.discretize(f64::INFINITY).is_err());
    }

    #[test]
    fn discretize_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = TimeGrid::fit(&[87.5], Some(13)).unwrap();
        for _ in 0..1000 {
            let t = rng.random_range(0.0..100.0);
            assert_eq!(grid.discretize(t).unwrap(), naive_bin(t, grid.edges()));
        }
    }

    #[test]
    fn edges_and_midpoints_round_trip() {
        let grid = TimeGrid::fit(&[40.5], Some(9)).unwrap();
        let width = grid.edge(1);
        for k in 1..grid.num_bins() {
            assert_eq!(grid.discretize(grid.edge(k)).unwrap(), k);
            assert_eq!(grid.discretize(grid.edge(k) + width * 1e-6).unwrap(), k + 1);
            let mid = 0.5 * (grid.edge(k - 1) + grid.edge(k));
            assert_eq!(grid.discretize(mid).unwrap(), k);
        }
    }

    #[test]
    fn serde_shape_and_validation() {
        let grid = TimeGrid::from_edges(vec![1.0, 2.5]).unwrap();
        let json = serde_json::to_string(&grid).unwrap();
        assert_eq!(json, r#"{"edges":[1.0,2.5],"num_bins":3}"#);
        let back: TimeGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(back, grid);
        assert!(serde_json::from_str::<TimeGrid>(r#"{"edges":[1.0,2.5],"num_bins":4}"#).is_err());
        assert!(serde_json::from_str::<TimeGrid>(r#"{"edges":[2.0,1.0],"num_bins":3}"#).is_err());
    }

    proptest! {
        #[test]
        fn discretize_is_monotone(
            t_max in 0.1f64..500.0,
            k in 2usize..40,
            a in 0.0f64..600.0,
            b in 0.0f64..600.0,
        ) {
            let grid = TimeGrid::fit(&[t_max], Some(k)).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (blo, bhi) = (grid.discretize(lo).unwrap(), grid.discretize(hi).unwrap());
            prop_assert!(blo <= bhi);
            prop_assert!((1..=k).contains(&bhi));
        }
    }
}
