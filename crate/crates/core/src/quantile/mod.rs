//! Quantile-space distributions, revenue curves, virtual values and ironing.

mod curves;
mod distribution;
mod grid;
pub mod io;

pub use curves::{IronedCurve, Reserve, RevenueCurve, VirtualValueCurve};
pub use distribution::{ClosedForm, QuantileDistribution, REL_TOL};
pub use grid::{sup_where_ge, sup_where_gt, QuantileGrid};
