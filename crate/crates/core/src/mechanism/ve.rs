//! Virtual-efficient allocation rules `R(q, v̂(q), v̂'(q))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A registered "virtual bid" functional. The item goes to the largest `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum VeRule {
    /// `R = v̂`: the second-price auction written as a virtual-efficient rule.
    Bid,
    /// `R = v̂ - alpha q`.
    QuantileShift { alpha: f64 },
    /// `R = v̂ (1 - beta q)`.
    QuantileDiscount { beta: f64 },
    /// `R = a_v v̂ + a_q q + a_slope v̂'`. Only `a_slope = 0`, `a_q <= 0`,
    /// `a_v >= 0` passes the truthfulness check.
    Linear { a_v: f64, a_q: f64, a_slope: f64 },
}

/// Finite-difference partials of a rule over a sample box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialsReport {
    pub max_abs_d_slope: f64,
    pub max_d_q: f64,
    pub min_d_value: f64,
    pub samples: usize,
}

impl PartialsReport {
    pub fn truthful(&self) -> bool {
        const SLACK: f64 = 1e-7;
        self.max_abs_d_slope <= SLACK && self.max_d_q <= SLACK && self.min_d_value >= -SLACK
    }
}

impl VeRule {
    pub fn eval(&self, q: f64, value: f64, slope: f64) -> f64 {
        match *self {
            VeRule::Bid => value,
            VeRule::QuantileShift { alpha } => value - alpha * q,
            VeRule::QuantileDiscount { beta } => value * (1.0 - beta * q),
            VeRule::Linear { a_v, a_q, a_slope } => a_v * value + a_q * q + a_slope * slope,
        }
    }

    /// Short identifier safe for CSV columns and file names.
    pub fn label(&self) -> String {
        match *self {
            VeRule::Bid => "bid".into(),
            VeRule::QuantileShift { alpha } => format!("shift_{alpha}"),
            VeRule::QuantileDiscount { beta } => format!("discount_{beta}"),
            VeRule::Linear { a_v, a_q, a_slope } => format!("linear_{a_v}_{a_q}_{a_slope}"),
        }
    }

    /// Central-difference partials `(dR/dq, dR/dv̂, dR/dv̂')`.
    pub fn partials(&self, q: f64, value: f64, slope: f64) -> (f64, f64, f64) {
        let h = 1e-6;
        let dq = (self.eval(q + h, value, slope) - self.eval(q - h, value, slope)) / (2.0 * h);
        let dv = (self.eval(q, value + h, slope) - self.eval(q, value - h, slope)) / (2.0 * h);
        let ds = (self.eval(q, value, slope + h) - self.eval(q, value, slope - h)) / (2.0 * h);
        (dq, dv, ds)
    }

    /// Samples `q ∈ [0,1]`, `v̂ ∈ [0, 2]`, `v̂' ∈ [-4, 0]` on a lattice and
    /// collects the sign constraints a truthful rule must satisfy.
    pub fn check_partials(&self) -> PartialsReport {
        let mut report = PartialsReport {
            max_abs_d_slope: 0.0,
            max_d_q: f64::NEG_INFINITY,
            min_d_value: f64::INFINITY,
            samples: 0,
        };
        for i in 0..=10 {
            let q = i as f64 / 10.0;
            for j in 0..=8 {
                let v = 2.0 * j as f64 / 8.0;
                for k in 0..=4 {
                    let s = -(k as f64);
                    let (dq, dv, ds) = self.partials(q, v, s);
                    report.max_abs_d_slope = report.max_abs_d_slope.max(ds.abs());
                    report.max_d_q = report.max_d_q.max(dq);
                    report.min_d_value = report.min_d_value.min(dv);
                    report.samples += 1;
                }
            }
        }
        report
    }

    pub fn validate(&self) -> Result<()> {
        let report = self.check_partials();
        if report.truthful() {
            Ok(())
        } else {
            Err(Error::NonTruthfulRule(format!("{self:?}: {report:?}")))
        }
    }

    /// Rules exercised by the test suite and the `ve-bound` scenario.
    pub fn registry() -> Vec<VeRule> {
        vec![
            VeRule::Bid,
            VeRule::QuantileShift { alpha: 0.1 },
            VeRule::QuantileDiscount { beta: 0.5 },
            VeRule::QuantileDiscount { beta: 1.0 },
            VeRule::Linear { a_v: 2.0, a_q: -0.3, a_slope: 0.0 },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registered_rules_are_truthful() {
        for rule in VeRule::registry() {
            assert!(rule.check_partials().truthful(), "{rule:?}");
        }
    }

    #[test]
    fn slope_dependent_rule_is_rejected() {
        let rule = VeRule::Linear { a_v: 1.0, a_q: 0.0, a_slope: 0.5 };
        assert!(matches!(rule.validate(), Err(Error::NonTruthfulRule(_))));
        let rising = VeRule::QuantileShift { alpha: -0.2 };
        assert!(rising.validate().is_err());
    }
}
