use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::numeric::fmt_sig;
use crate::quantile::QuantileGrid;

/// One row of the revenue table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueTable {
    pub scenario: String,
    pub family: String,
    pub method: String,
    pub revenue: f64,
    pub welfare: f64,
    pub utilities: Vec<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub stderr: Option<f64>,
}

impl RevenueTable {
    pub fn csv_header(n: usize) -> String {
        let mut h = String::from("scenario,family,method,REV,SW");
        for i in 1..=n {
            h.push_str(&format!(",U_{i}"));
        }
        h.push_str(",samples,seed,stderr");
        h
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.scenario.clone(),
            self.family.clone(),
            self.method.clone(),
            fmt_sig(self.revenue),
            fmt_sig(self.welfare),
        ];
        cols.extend(self.utilities.iter().map(|u| fmt_sig(*u)));
        cols.push(self.samples.map(|s| s.to_string()).unwrap_or_default());
        cols.push(self.seed.map(|s| s.to_string()).unwrap_or_default());
        cols.push(self.stderr.map(fmt_sig).unwrap_or_default());
        cols.join(",")
    }

    /// Rows must share the buyer count.
    pub fn to_csv(rows: &[RevenueTable]) -> String {
        let n = rows.first().map(|r| r.utilities.len()).unwrap_or(0);
        let mut out = Self::csv_header(n);
        out.push('\n');
        for r in rows {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Two-column `(q, value)` text file.
pub fn write_curve(path: &Path, grid: &QuantileGrid, values: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(values.len() * 32);
    for (q, v) in grid.points().zip(values) {
        s.push_str(&fmt_sig(q));
        s.push(' ');
        s.push_str(&fmt_sig(*v));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}
