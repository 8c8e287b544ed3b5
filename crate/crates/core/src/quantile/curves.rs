use serde::Serialize;

use super::distribution::{ClosedForm, QuantileDistribution, REL_TOL};
use super::grid::QuantileGrid;

/// `R(q) = q v(q)` on the distribution's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenueCurve {
    pub grid: QuantileGrid,
    pub values: Vec<f64>,
}

/// `r(q) = v(q) + q v'(q) = R'(q)`; may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualValueCurve {
    pub grid: QuantileGrid,
    pub values: Vec<f64>,
}

/// Smallest concave majorant of the revenue curve and its slope.
#[derive(Debug, Clone, PartialEq)]
pub struct IronedCurve {
    pub grid: QuantileGrid,
    pub ironed_revenue: Vec<f64>,
    pub ironed_virtual: Vec<f64>,
}

/// Monopoly reserve: revenue-maximising quantile (largest on ties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reserve {
    pub quantile: f64,
    pub price: f64,
    pub revenue: f64,
}

impl QuantileDistribution {
    pub fn revenue_curve(&self) -> RevenueCurve {
        let grid = *self.grid();
        let values = grid
            .points()
            .zip(self.values())
            .map(|(q, v)| q * v)
            .collect();
        RevenueCurve { grid, values }
    }

    /// Virtual values. Tagged closed forms use the analytic slope; tabulated
    /// distributions differentiate the revenue curve directly, which is the same
    /// quantity to second order but exact on equal-revenue and quadratic pieces.
    pub fn virtual_value_curve(&self) -> VirtualValueCurve {
        let grid = *self.grid();
        let values = match self.closed_form() {
            ClosedForm::Custom => grid.derivative(&self.revenue_curve().values),
            _ => {
                let slope = self.derivative();
                grid.points()
                    .zip(self.values())
                    .zip(slope)
                    .map(|((q, v), d)| v + q * d)
                    .collect()
            }
        };
        VirtualValueCurve { grid, values }
    }

    /// Regular iff the sampled revenue curve is concave, i.e. its cell slopes
    /// never increase. Inside a cell `q v(q)` is concave already. Differenced
    /// virtual values are not used here: they can smooth a convex kink away.
    pub fn is_regular(&self) -> bool {
        let revenue = self.revenue_curve().values;
        let h = self.grid().step();
        let slopes: Vec<f64> = revenue.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let scale = slopes.iter().fold(self.scale(), |m, x| m.max(x.abs()));
        let slack = REL_TOL * scale;
        slopes.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// Upper concave envelope of the sampled revenue curve (monotone-chain hull).
    pub fn iron(&self) -> IronedCurve {
        let grid = *self.grid();
        let revenue = self.revenue_curve().values;
        if self.is_regular() {
            return IronedCurve {
                grid,
                ironed_revenue: revenue,
                ironed_virtual: self.virtual_value_curve().values,
            };
        }
        let hull = upper_hull(&grid, &revenue);
        let mut ironed = vec![0.0; revenue.len()];
        for w in hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (qa, qb) = (grid.q(a), grid.q(b));
            for (k, slot) in ironed.iter_mut().enumerate().take(b + 1).skip(a) {
                let t = (grid.q(k) - qa) / (qb - qa);
                *slot = revenue[a] + t * (revenue[b] - revenue[a]);
            }
        }
        for &k in &hull {
            ironed[k] = revenue[k];
        }
        let n = ironed.len();
        let h = grid.step();
        let mut slope = vec![0.0; n];
        slope[0] = (ironed[1] - ironed[0]) / h;
        slope[n - 1] = (ironed[n - 1] - ironed[n - 2]) / h;
        for k in 1..n - 1 {
            slope[k] = (ironed[k + 1] - ironed[k - 1]) / (2.0 * h);
        }
        IronedCurve {
            grid,
            ironed_revenue: ironed,
            ironed_virtual: slope,
        }
    }

    /// Monopoly reserve quantile: argmax of `q v(q)` on the grid, largest quantile on ties.
    pub fn reserve_quantile(&self) -> Reserve {
        let revenue = self.revenue_curve().values;
        let best = revenue.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let slack = REL_TOL * best.abs().max(1e-300);
        let k = revenue
            .iter()
            .rposition(|&r| r >= best - slack)
            .unwrap_or(0);
        let quantile = self.grid().q(k);
        Reserve {
            quantile,
            price: self.values()[k],
            revenue: revenue[k],
        }
    }
}

/// Indices of the upper convex hull of `(q_k, y_k)`, left to right.
fn upper_hull(grid: &QuantileGrid, y: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(y.len());
    for k in 0..y.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b unless it lies strictly above the chord a-k
            let cross = (grid.q(b) - grid.q(a)) * (y[k] - y[a]) - (y[b] - y[a]) * (grid.q(k) - grid.q(a));
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    hull
}
