//! Two-column `(q, v)` tables and the JSON distribution descriptor.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ClosedForm, QuantileDistribution, QuantileGrid};
use crate::error::{Error, Result};

/// `{closed_form, params, n_points}`. Tabulated distributions carry their
/// sampled values in `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionJson {
    pub closed_form: String,
    pub params: Vec<f64>,
    pub n_points: usize,
}

impl From<&QuantileDistribution> for DistributionJson {
    fn from(d: &QuantileDistribution) -> Self {
        let form = d.closed_form();
        let params = match form {
            ClosedForm::Custom => d.values().to_vec(),
            _ => form.params(),
        };
        Self {
            closed_form: form.name().to_string(),
            params,
            n_points: d.grid().n_points(),
        }
    }
}

impl DistributionJson {
    pub fn build(&self) -> Result<QuantileDistribution> {
        let grid = QuantileGrid::new(self.n_points)?;
        if self.closed_form == "custom" {
            QuantileDistribution::from_values(grid, self.params.clone())
        } else {
            QuantileDistribution::from_closed_form(
                ClosedForm::parse(&self.closed_form, &self.params)?,
                grid,
            )
        }
    }
}

pub fn to_json(d: &QuantileDistribution) -> Result<String> {
    Ok(serde_json::to_string_pretty(&DistributionJson::from(d))?)
}

pub fn from_json(s: &str) -> Result<QuantileDistribution> {
    serde_json::from_str::<DistributionJson>(s)?.build()
}

/// Formats any grid curve as tab-separated `q value` lines.
pub fn curve_table(grid: &QuantileGrid, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 32);
    for (q, v) in grid.points().zip(values) {
        let _ = writeln!(out, "{q:.17e}\t{v:.17e}");
    }
    out
}

pub fn to_table(d: &QuantileDistribution) -> String {
    curve_table(d.grid(), d.values())
}

/// Parses a whitespace-separated two-column table. Lines starting with `#` are
/// skipped. The quantile column must be the uniform grid `k / (n - 1)`.
pub fn from_table(s: &str) -> Result<QuantileDistribution> {
    let mut qs = Vec::new();
    let mut vs = Vec::new();
    for (lineno, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(|c: char| c.is_whitespace() || c == ',').filter(|c| !c.is_empty());
        let mut next = || -> Result<f64> {
            cols.next()
                .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", lineno + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        qs.push(next()?);
        vs.push(next()?);
    }
    let grid = QuantileGrid::new(qs.len())?;
    for (k, &q) in qs.iter().enumerate() {
        if (q - grid.q(k)).abs() > 1e-9 {
            return Err(Error::Parse(format!(
                "row {k}: quantile {q} is not on the uniform grid (expected {})",
                grid.q(k)
            )));
        }
    }
    QuantileDistribution::from_values(grid, vs)
}

impl TryFrom<DistributionJson> for QuantileDistribution {
    type Error = Error;

    fn try_from(j: DistributionJson) -> Result<Self> {
        j.build()
    }
}

impl From<QuantileDistribution> for DistributionJson {
    fn from(d: QuantileDistribution) -> Self {
        DistributionJson::from(&d)
    }
}
