//! Best responses and equilibrium conditions for each family.

mod dominance;
mod myerson;
pub mod random;
mod sparqr;
mod spamr;
mod ve;

use serde::Serialize;

pub use dominance::{prior_independent_dominance_check, DominanceReport, BLEND_POINTS};
pub use myerson::{myerson_best_response, VirtualBidAllocation};
pub use sparqr::{sparqr_equilibrium, sparqr_gap_integral, sparqr_sign_point, sparqr_two_buyer_gap, SparqrSolution};
pub use spamr::{
    incident_equation, spamr_epsilon_undercut_gain, spamr_form, spamr_form_utility, spamr_general_best_response,
    spamr_incident_quantile, spamr_piecewise_report, spamr_regular_best_response, spamr_scan_best_response, SpamrForm,
};
pub use ve::{ve_condition, ve_equilibrium_condition, VeSolution};

use crate::error::{Error, Result};
use crate::mechanism::MechanismFamily;
use crate::quantile::QuantileDistribution;

#[derive(Debug, Clone, Serialize)]
pub struct BestResponseResult {
    pub fake: QuantileDistribution,
    /// Chosen virtual bid per quantile (Myerson).
    pub virtual_curve: Option<Vec<f64>>,
    pub achieved_utility: f64,
    pub residuals: Vec<f64>,
    pub residual_max: f64,
}

/// Family dispatch used by the dynamics.
pub fn best_response(
    family: &MechanismFamily,
    v: &QuantileDistribution,
    opponents: &[QuantileDistribution],
) -> Result<BestResponseResult> {
    match family {
        MechanismFamily::Myerson => myerson_best_response(v, opponents),
        MechanismFamily::Spamr => spamr_scan_best_response(v, opponents, 48),
        other => Err(Error::Unsupported(format!("no best-response solver for {}", other.name()))),
    }
}
