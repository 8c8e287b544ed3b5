//! Mechanism families, fake-prior profiles and ex-post outcomes.

mod prepared;
mod ve;

use serde::{Deserialize, Serialize};

pub use prepared::{BuyerTable, Outcome, PreparedMechanism};
pub use ve::{PartialsReport, VeRule};

use crate::error::{Error, Result};
use crate::quantile::{QuantileDistribution, QuantileGrid};

/// Published-prior mechanism families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum MechanismFamily {
    /// Second-price auction, no reserve.
    Spa,
    /// Myerson's optimal auction on the reported priors (ironed virtual values).
    Myerson,
    /// Second price with each buyer's own monopoly reserve.
    Spamr,
    /// Second price with a shared uniform reserve quantile `q_r`, converted to a
    /// per-buyer reserve price `v̂_i(q_r)`.
    Sparqr,
    /// Allocate to the largest `R(q, v̂, v̂')`.
    VirtualEfficient { rule: VeRule },
    /// Allocate to the smallest bid-quantile `1 - F̂_i(b_i)`.
    QuantileReserve,
    /// Myerson on a fixed target profile, and nothing unless every report matches it.
    TargetDistribution { target: Vec<QuantileDistribution> },
}

impl MechanismFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismFamily::Spa => "spa",
            MechanismFamily::Myerson => "myerson",
            MechanismFamily::Spamr => "spamr",
            MechanismFamily::Sparqr => "sparqr",
            MechanismFamily::VirtualEfficient { .. } => "virtual_efficient",
            MechanismFamily::QuantileReserve => "quantile_reserve",
            MechanismFamily::TargetDistribution { .. } => "target_distribution",
        }
    }

    /// Families whose allocation needs the shared reserve-quantile draw.
    pub fn needs_reserve_draw(&self) -> bool {
        matches!(self, MechanismFamily::Sparqr)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MechanismFamily::VirtualEfficient { rule } => rule.validate(),
            MechanismFamily::TargetDistribution { target } if target.is_empty() => Err(
                Error::InvalidParameters("target profile is empty".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let family: Self = serde_json::from_str(s)?;
        family.validate()?;
        Ok(family)
    }
}

/// Reported (fake) quantile functions, one per buyer, on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FakeProfile {
    reports: Vec<QuantileDistribution>,
}

impl FakeProfile {
    pub fn new(reports: Vec<QuantileDistribution>) -> Result<Self> {
        if reports.len() < 2 {
            return Err(Error::TooFewBuyers(reports.len()));
        }
        let n0 = reports[0].grid().n_points();
        for r in &reports[1..] {
            if r.grid().n_points() != n0 {
                return Err(Error::GridMismatch(n0, r.grid().n_points()));
            }
        }
        Ok(Self { reports })
    }

    /// `n` copies of the same report.
    pub fn symmetric(report: &QuantileDistribution, n: usize) -> Result<Self> {
        Self::new(vec![report.clone(); n])
    }

    pub fn n(&self) -> usize {
        self.reports.len()
    }

    pub fn grid(&self) -> &QuantileGrid {
        self.reports[0].grid()
    }

    pub fn report(&self, i: usize) -> Result<&QuantileDistribution> {
        self.reports.get(i).ok_or(Error::BuyerIndex(i))
    }

    pub fn reports(&self) -> &[QuantileDistribution] {
        &self.reports
    }

    /// Same profile with buyer `i`'s report swapped out.
    pub fn with_report(&self, i: usize, report: QuantileDistribution) -> Result<Self> {
        if i >= self.n() {
            return Err(Error::BuyerIndex(i));
        }
        let mut reports = self.reports.clone();
        reports[i] = report;
        Self::new(reports)
    }
}

/// Virtual value `r̂(q̂(b))` of bid `b` under the published prior.
pub fn virtual_bid(report: &QuantileDistribution, bid: f64) -> Result<f64> {
    let hi = report.values()[0];
    let lo = *report.values().last().unwrap_or(&hi);
    let slack = 1e-12 * hi.abs().max(1.0);
    if !(bid >= lo - slack && bid <= hi + slack) {
        return Err(Error::OutsideSupport(bid, lo, hi));
    }
    let q = report.quantile_of_bid(bid);
    let curve = report.virtual_value_curve();
    Ok(report.grid().interpolate(&curve.values, q))
}
