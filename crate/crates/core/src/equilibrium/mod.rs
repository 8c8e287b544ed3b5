//! Equilibrium verification, first-price benchmarks and revenue comparisons.

mod fpa;
mod suite;
mod verify;

pub use fpa::{
    fpa_bne_iid, fpa_equilibrium_check, fpa_utility, myerson_fpa_equivalence_check, BidStrategy, EquivalenceReport,
    FpaCheck,
};
pub use suite::{
    appendix_family_demos, best_response_dynamics, full_surplus_target, revenue_theorem_suite, spamr_revenue_checks,
    sparqr_revenue_checks, symmetric_table, ve_revenue_checks, Check,
    DynamicsRow, Trajectory,
};
pub use verify::{
    deviation_utility, verify_symmetric_equilibrium, DeviationPolicy, EquilibriumReport, Verdict, CONSTANT_LEVELS,
};
