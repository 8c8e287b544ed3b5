use serde::{Deserialize, Serialize};

use super::grid::{sup_where_ge, sup_where_gt, QuantileGrid};
use crate::error::{Error, Result};

/// Relative slack used for monotonicity, concavity and tie comparisons.
pub const REL_TOL: f64 = 1e-9;

/// Closed-form tag carried alongside the sampled values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "closed_form", rename_all = "snake_case")]
pub enum ClosedForm {
    /// Uniform on `[a, b]`: `v(q) = b - (b - a) q`.
    Uniform { a: f64, b: f64 },
    /// Equal revenue: `v(q) = R / q`, clipped at `q = 0` to the first positive grid point.
    EqualRevenue { r: f64 },
    /// `v(q) = c0 + c1 q` with `c1 <= 0`.
    Affine { c0: f64, c1: f64 },
    Custom,
}

impl ClosedForm {
    pub fn name(&self) -> &'static str {
        match self {
            ClosedForm::Uniform { .. } => "uniform",
            ClosedForm::EqualRevenue { .. } => "equal_revenue",
            ClosedForm::Affine { .. } => "affine",
            ClosedForm::Custom => "custom",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            ClosedForm::Uniform { a, b } => vec![a, b],
            ClosedForm::EqualRevenue { r } => vec![r],
            ClosedForm::Affine { c0, c1 } => vec![c0, c1],
            ClosedForm::Custom => Vec::new(),
        }
    }

    /// Builds a tag from a name and parameter list, as used by the CLI and JSON.
    pub fn parse(name: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParameters(format!(
                    "{name} takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        match name {
            "uniform" => {
                want(2)?;
                Ok(ClosedForm::Uniform { a: params[0], b: params[1] })
            }
            "equal_revenue" | "equal-revenue" => {
                want(1)?;
                Ok(ClosedForm::EqualRevenue { r: params[0] })
            }
            "affine" => {
                want(2)?;
                Ok(ClosedForm::Affine { c0: params[0], c1: params[1] })
            }
            "constant" => {
                want(1)?;
                Ok(ClosedForm::Affine { c0: params[0], c1: 0.0 })
            }
            other => Err(Error::InvalidParameters(format!("unknown closed form '{other}'"))),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameters(m));
        match *self {
            ClosedForm::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite()) || a >= b || a < 0.0 {
                    return bad(format!("uniform needs 0 <= a < b, got a={a}, b={b}"));
                }
            }
            ClosedForm::EqualRevenue { r } => {
                if !(r.is_finite() && r > 0.0) {
                    return bad(format!("equal revenue needs R > 0, got {r}"));
                }
            }
            ClosedForm::Affine { c0, c1 } => {
                if !(c0.is_finite() && c1.is_finite()) || c1 > 0.0 || c0 + c1 < 0.0 {
                    return bad(format!(
                        "affine needs c1 <= 0 and c0 + c1 >= 0, got c0={c0}, c1={c1}"
                    ));
                }
            }
            ClosedForm::Custom => {}
        }
        Ok(())
    }
}

/// A valuation distribution in quantile space: weakly decreasing `v(q) >= 0`
/// sampled on a uniform grid. Between grid points it is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "super::io::DistributionJson",
    into = "super::io::DistributionJson"
)]
pub struct QuantileDistribution {
    grid: QuantileGrid,
    values: Vec<f64>,
    closed_form: ClosedForm,
}

impl QuantileDistribution {
    pub fn from_closed_form(form: ClosedForm, grid: QuantileGrid) -> Result<Self> {
        form.validate()?;
        let values = match form {
            ClosedForm::Uniform { a, b } => grid.sample(|q| b - (b - a) * q),
            ClosedForm::EqualRevenue { r } => {
                let q1 = grid.q(1);
                grid.sample(|q| r / q.max(q1))
            }
            ClosedForm::Affine { c0, c1 } => grid.sample(|q| c0 + c1 * q),
            ClosedForm::Custom => {
                return Err(Error::InvalidParameters(
                    "custom distributions are built from values".into(),
                ))
            }
        };
        Self::validated(grid, values, form)
    }

    pub fn uniform(a: f64, b: f64, grid: QuantileGrid) -> Result<Self> {
        Self::from_closed_form(ClosedForm::Uniform { a, b }, grid)
    }

    pub fn equal_revenue(r: f64, grid: QuantileGrid) -> Result<Self> {
        Self::from_closed_form(ClosedForm::EqualRevenue { r }, grid)
    }

    pub fn affine(c0: f64, c1: f64, grid: QuantileGrid) -> Result<Self> {
        Self::from_closed_form(ClosedForm::Affine { c0, c1 }, grid)
    }

    pub fn constant(c: f64, grid: QuantileGrid) -> Result<Self> {
        Self::affine(c, 0.0, grid)
    }

    /// A tabulated distribution. Fails unless the table is nonnegative and
    /// weakly decreasing up to [`REL_TOL`].
    pub fn from_values(grid: QuantileGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(values.len(), grid.n_points()));
        }
        Self::validated(grid, values, ClosedForm::Custom)
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: QuantileGrid, f: F) -> Result<Self> {
        Self::from_values(grid, grid.sample(f))
    }

    fn validated(grid: QuantileGrid, mut values: Vec<f64>, closed_form: ClosedForm) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidValue { index, value });
            }
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = REL_TOL * scale;
        for k in 1..values.len() {
            if values[k] > values[k - 1] + slack {
                return Err(Error::NonMonotone {
                    index: k,
                    prev: values[k - 1],
                    next: values[k],
                });
            }
            // absorb rounding-level violations so level-set searches see a monotone table
            values[k] = values[k].min(values[k - 1]);
        }
        Ok(Self {
            grid,
            values,
            closed_form,
        })
    }

    pub fn grid(&self) -> &QuantileGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn closed_form(&self) -> ClosedForm {
        self.closed_form
    }

    /// Largest absolute value, floored so relative tolerances never vanish.
    pub fn scale(&self) -> f64 {
        self.values[0].max(1e-300)
    }

    /// `v(q)` by linear interpolation.
    pub fn value_at(&self, q: f64) -> f64 {
        self.grid.interpolate(&self.values, q)
    }

    /// Quantile of a bid under this distribution: `1 - F(z) = inf { q : v(q) <= z }`.
    pub fn quantile_of_bid(&self, z: f64) -> f64 {
        sup_where_gt(&self.grid, &self.values, z)
    }

    /// `Pr[v(q) >= z]` for `q` uniform.
    pub fn prob_at_least(&self, z: f64) -> f64 {
        sup_where_ge(&self.grid, &self.values, z)
    }

    /// Slope of `v` at each grid point; exact for tagged closed forms.
    pub fn derivative(&self) -> Vec<f64> {
        match self.closed_form {
            ClosedForm::Uniform { a, b } => vec![a - b; self.values.len()],
            ClosedForm::Affine { c1, .. } => vec![c1; self.values.len()],
            ClosedForm::EqualRevenue { r } => self
                .grid
                .points()
                .enumerate()
                .map(|(k, q)| if k == 0 { 0.0 } else { -r / (q * q) })
                .collect(),
            ClosedForm::Custom => self.grid.derivative(&self.values),
        }
    }

    /// Pointwise blend `lambda * self + (1 - lambda) * other`.
    pub fn blend(&self, other: &Self, lambda: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                self.grid.n_points(),
                other.grid.n_points(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Self::from_values(self.grid, values)
    }

    /// Same distribution with every value multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_values(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    /// Max absolute pointwise difference.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> QuantileGrid {
        QuantileGrid::new(n).unwrap()
    }

    #[test]
    fn uniform_five_points() {
        let d = QuantileDistribution::uniform(0.0, 1.0, grid(5)).unwrap();
        assert_eq!(d.values(), &[1.0, 0.75, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn affine_matches_formula() {
        let d = QuantileDistribution::affine(0.5, -0.25, grid(9)).unwrap();
        for (k, q) in d.grid().points().enumerate() {
            assert!((d.values()[k] - (0.5 - 0.25 * q)).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_revenue_is_clipped_at_zero() {
        let g = grid(17);
        let d = QuantileDistribution::equal_revenue(3.0 / 16.0, g).unwrap();
        assert_eq!(d.values()[0], d.values()[1]);
        assert!((d.values()[4] - 3.0 / 16.0 / 0.25).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters() {
        assert!(QuantileDistribution::uniform(1.0, 1.0, grid(5)).is_err());
        assert!(QuantileDistribution::equal_revenue(0.0, grid(5)).is_err());
        assert!(QuantileDistribution::affine(0.5, 0.1, grid(5)).is_err());
        assert!(matches!(
            QuantileDistribution::from_values(grid(3), vec![1.0, 0.5, 0.7]),
            Err(Error::NonMonotone { index: 2, .. })
        ));
        assert!(QuantileDistribution::from_values(grid(3), vec![1.0, 0.5, -0.1]).is_err());
    }

    #[test]
    fn bid_quantile_inverts_values() {
        let d = QuantileDistribution::uniform(0.0, 1.0, grid(1025)).unwrap();
        assert!((d.quantile_of_bid(0.3) - 0.7).abs() < 1e-12);
        assert_eq!(d.quantile_of_bid(2.0), 0.0);
        let c = QuantileDistribution::constant(0.2, grid(9)).unwrap();
        assert_eq!(c.quantile_of_bid(0.2), 0.0);
        assert_eq!(c.prob_at_least(0.2), 1.0);
    }

    #[test]
    fn analytic_derivatives() {
        let g = grid(9);
        let u = QuantileDistribution::uniform(0.0, 1.0, g).unwrap();
        assert!(u.derivative().iter().all(|&d| d == -1.0));
        let a = QuantileDistribution::affine(0.5, -0.25, g).unwrap();
        assert!(a.derivative().iter().all(|&d| d == -0.25));
        let e = QuantileDistribution::equal_revenue(2.0, g).unwrap();
        assert!((e.derivative()[4] + 2.0 / 0.25).abs() < 1e-12);
    }
}
