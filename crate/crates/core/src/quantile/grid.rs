use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `q_k = k / (n_points - 1)` on the unit quantile interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantileGrid {
    n_points: usize,
}

impl QuantileGrid {
    pub const DEFAULT_POINTS: usize = 1025;

    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {n_points}"
            )));
        }
        Ok(Self { n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn cells(&self) -> usize {
        self.n_points - 1
    }

    /// Grid spacing.
    pub fn step(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    pub fn q(&self, k: usize) -> f64 {
        if k == self.cells() {
            1.0
        } else {
            k as f64 / self.cells() as f64
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.q(k))
    }

    /// True when `q` coincides with a grid point (to rounding).
    pub fn contains(&self, q: f64) -> bool {
        let x = q * self.cells() as f64;
        (x - x.round()).abs() < 1e-9
    }

    /// Cell index and fractional position of `q` (clamped to `[0, 1]`).
    pub fn locate(&self, q: f64) -> (usize, f64) {
        let x = q.clamp(0.0, 1.0) * self.cells() as f64;
        let k = (x.floor() as usize).min(self.cells() - 1);
        (k, x - k as f64)
    }

    /// Piecewise-linear interpolation of grid samples.
    pub fn interpolate(&self, values: &[f64], q: f64) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let (k, t) = self.locate(q);
        if t == 0.0 {
            values[k]
        } else {
            values[k] + t * (values[k + 1] - values[k])
        }
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.points().map(f).collect()
    }

    /// Central differences at interior points, second-order one-sided at the ends.
    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let h = self.step();
        let mut d = vec![0.0; n];
        for k in 1..n - 1 {
            d[k] = (values[k + 1] - values[k - 1]) / (2.0 * h);
        }
        d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
        d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
        d
    }
}

impl Default for QuantileGrid {
    fn default() -> Self {
        Self {
            n_points: Self::DEFAULT_POINTS,
        }
    }
}

/// `sup { q : f(q) > t }` for a non-increasing piecewise-linear `f` sampled on `grid`
/// (0 when the set is empty).
pub fn sup_where_gt(grid: &QuantileGrid, values: &[f64], t: f64) -> f64 {
    let n = values.len();
    if values[0] <= t {
        return 0.0;
    }
    if values[n - 1] > t {
        return 1.0;
    }
    let p = values.partition_point(|&v| v > t);
    let (a, b) = (values[p - 1], values[p]);
    let frac = if a > b { ((a - t) / (a - b)).clamp(0.0, 1.0) } else { 0.0 };
    (grid.q(p - 1) + frac * grid.step()).min(1.0)
}

/// `sup { q : f(q) >= t }` for a non-increasing piecewise-linear `f` sampled on `grid`
/// (0 when the set is empty).
pub fn sup_where_ge(grid: &QuantileGrid, values: &[f64], t: f64) -> f64 {
    let n = values.len();
    if values[0] < t {
        return 0.0;
    }
    if values[n - 1] >= t {
        return 1.0;
    }
    let p = values.partition_point(|&v| v >= t);
    let (a, b) = (values[p - 1], values[p]);
    let frac = if a > b { ((a - t) / (a - b)).clamp(0.0, 1.0) } else { 0.0 };
    (grid.q(p - 1) + frac * grid.step()).min(1.0)
}
