//! Numerical laboratory for auctions in which buyers commit to fake prior
//! distributions and the seller runs a prior-dependent mechanism on the
//! reported profile.
//!
//! Distributions live in quantile space (`v(q)`, weakly decreasing on `[0, 1]`).
//! The crate provides the mechanism families, interim quantities by quadrature
//! and by Monte Carlo, best-response solvers and equilibrium checks.

pub mod best_response;
pub mod equilibrium;
pub mod error;
pub mod interim;
pub mod mechanism;
pub mod numeric;
pub mod quantile;
pub mod report;

pub use error::{Error, Result};
pub use mechanism::{FakeProfile, MechanismFamily, VeRule};
pub use quantile::{ClosedForm, QuantileDistribution, QuantileGrid};
