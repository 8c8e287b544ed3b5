use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::VeRule;
use crate::numeric::bisect;
use crate::quantile::QuantileDistribution;

/// Pointwise solution of `∂R/∂v̂ (v - v̂) + ∂R/∂q = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct VeSolution {
    pub fake: QuantileDistribution,
    pub residuals: Vec<f64>,
    pub residual_max: f64,
    /// Weakly decreasing solution, i.e. a candidate symmetric equilibrium.
    pub decreasing: bool,
    pub below_truth: bool,
    /// Grid points where the root fell below zero and the report was clamped to 0.
    pub clamped: usize,
}

pub fn ve_condition(rule: &VeRule, q: f64, v: f64, w: f64) -> f64 {
    let (dq, dv, _) = rule.partials(q, w, 0.0);
    dv * (v - w) + dq
}

pub fn ve_equilibrium_condition(rule: &VeRule, v: &QuantileDistribution) -> Result<VeSolution> {
    rule.validate()?;
    let grid = *v.grid();
    let scale = v.scale().abs().max(1e-300);
    let mut fake = Vec::with_capacity(grid.n_points());
    let mut residuals = Vec::with_capacity(grid.n_points());
    let mut clamped = 0;
    for (q, &vq) in grid.points().zip(v.values()) {
        let g = |w: f64| ve_condition(rule, q, vq, w);
        let at_truth = g(vq);
        let w = if at_truth.abs() <= 1e-14 * scale {
            vq
        } else if g(0.0) < 0.0 {
            clamped += 1;
            0.0
        } else {
            bisect(g, 0.0, vq, 1e-13 * scale)
                .map_err(|e| Error::NoRoot(format!("at q = {q}: {e}")))?
        };
        residuals.push(if w == 0.0 && vq > 0.0 && g(0.0) < 0.0 { 0.0 } else { g(w) });
        fake.push(w);
    }
    let decreasing = fake.windows(2).all(|p| p[1] <= p[0] + 1e-9 * scale);
    let below_truth = fake.iter().zip(v.values()).all(|(w, vq)| *w <= vq + 1e-12 * scale);
    let residual_max = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !decreasing {
        for k in 1..fake.len() {
            fake[k] = fake[k].min(fake[k - 1]);
        }
    }
    Ok(VeSolution {
        fake: QuantileDistribution::from_values(grid, fake)?,
        residuals,
        residual_max,
        decreasing,
        below_truth,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::QuantileGrid;

    #[test]
    fn discount_rule_closed_form() {
        let g = QuantileGrid::new(257).unwrap();
        let v = QuantileDistribution::uniform(0.0, 1.0, g).unwrap();
        let beta = 0.5;
        let s = ve_equilibrium_condition(&VeRule::QuantileDiscount { beta }, &v).unwrap();
        for (k, q) in g.points().enumerate() {
            let want = (1.0 - q) * (1.0 - beta * q) / (1.0 + beta * (1.0 - q));
            assert!((s.fake.values()[k] - want).abs() < 1e-9);
        }
        assert!(s.decreasing && s.below_truth);
        assert!(s.residual_max < 1e-6);
    }

    #[test]
    fn bid_rule_is_truthful() {
        let g = QuantileGrid::new(65).unwrap();
        let v = QuantileDistribution::uniform(0.2, 1.0, g).unwrap();
        let s = ve_equilibrium_condition(&VeRule::Bid, &v).unwrap();
        assert!(s.fake.sup_distance(&v) < 1e-12);
    }
}
