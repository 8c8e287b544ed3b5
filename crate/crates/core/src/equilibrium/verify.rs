use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::best_response::random::{perturb, random_regular};
use crate::best_response::{
    myerson_best_response, spamr_form, spamr_incident_quantile, spamr_piecewise_report, spamr_regular_best_response,
    spamr_scan_best_response,
};
use crate::error::Result;
use crate::interim::game_utility;
use crate::mechanism::{FakeProfile, MechanismFamily, PreparedMechanism};
use crate::quantile::QuantileDistribution;

pub const CONSTANT_LEVELS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Which deviations to try against a symmetric candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationPolicy {
    pub random: usize,
    /// Restrict every deviation to regular reports.
    pub regular_only: bool,
    pub seed: u64,
    /// Verdict threshold in units of the true distribution's scale.
    pub tol: f64,
}

impl Default for DeviationPolicy {
    fn default() -> Self {
        Self {
            random: 50,
            regular_only: false,
            seed: 7,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    EquilibriumWithinTol,
    Refuted { witness: String, gain: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub family: String,
    pub n: usize,
    pub candidate: QuantileDistribution,
    pub deviation_count: usize,
    pub max_gain: f64,
    pub best_deviation: String,
    /// Largest gain among strictly decreasing deviations (no point masses).
    pub atomless_max_gain: f64,
    pub utilities: Vec<f64>,
    pub verdict: Verdict,
}

impl EquilibriumReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::EquilibriumWithinTol
    }
}

/// Deviator utility with the other `n - 1` buyers at `others`.
pub fn deviation_utility(
    family: &MechanismFamily,
    v: &QuantileDistribution,
    own: &QuantileDistribution,
    others: &QuantileDistribution,
    n: usize,
) -> Result<f64> {
    let mut reports = vec![own.clone()];
    reports.extend(std::iter::repeat_n(others.clone(), n - 1));
    let m = PreparedMechanism::new(family, &FakeProfile::new(reports)?)?;
    Ok(game_utility(&m, v, 0)?.virtual_form)
}

fn family_deviations(
    family: &MechanismFamily,
    v: &QuantileDistribution,
    candidate: &QuantileDistribution,
    n: usize,
    policy: &DeviationPolicy,
) -> Result<Vec<(String, QuantileDistribution)>> {
    let opponents = vec![candidate.clone(); n - 1];
    let mut out = Vec::new();
    match family {
        MechanismFamily::Myerson => {
            out.push(("best_response".into(), myerson_best_response(v, &opponents)?.fake));
        }
        MechanismFamily::Spamr if policy.regular_only => {
            if let Ok(q0) = spamr_incident_quantile(v, n) {
                out.push(("incident_response".into(), spamr_regular_best_response(v, q0)?));
            }
            for k in 1..=16 {
                let q0 = k as f64 / 16.0;
                out.push((format!("regular_response_q0_{q0}"), spamr_regular_best_response(v, q0)?));
            }
        }
        MechanismFamily::Spamr => {
            out.push(("best_response".into(), spamr_scan_best_response(v, &opponents, 32)?.fake));
            let level = candidate.reserve_quantile().revenue;
            let star = v.reserve_quantile().revenue;
            for eps in [1e-2, 1e-3, 1e-4] {
                let r = level.min(star) - eps * star.max(1e-300);
                if r > 0.0 {
                    let report = spamr_piecewise_report(v, &spamr_form(v, r)?)?;
                    out.push((format!("undercut_eps_{eps:e}"), report));
                }
            }
        }
        _ => {}
    }
    Ok(out)
}

/// Holds `n - 1` buyers at `candidate` and searches for a profitable deviation.
pub fn verify_symmetric_equilibrium(
    family: &MechanismFamily,
    v: &QuantileDistribution,
    candidate: &QuantileDistribution,
    n: usize,
    policy: &DeviationPolicy,
) -> Result<EquilibriumReport> {
    let grid = *v.grid();
    let scale = v.scale().abs().max(1e-300);
    let mut devs = family_deviations(family, v, candidate, n, policy)?;
    devs.push(("truthful".into(), v.clone()));
    for c in CONSTANT_LEVELS {
        devs.push((format!("constant_{c}"), QuantileDistribution::constant(c * scale, grid)?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    for k in 0..policy.random {
        let d = if policy.regular_only {
            let w = random_regular(grid, scale * 1.2, &mut rng)?;
            candidate.blend(&w, 1.0 - 0.5 * (k as f64 + 1.0) / policy.random as f64)?
        } else {
            perturb(candidate, 0.5, &mut rng)?
        };
        devs.push((format!("random_{k}"), d));
    }
    if policy.regular_only {
        devs.retain(|(_, d)| d.is_regular());
    }
    let base = deviation_utility(family, v, candidate, candidate, n)?;
    let mut max_gain = f64::NEG_INFINITY;
    let mut best = String::new();
    let mut atomless_max_gain = f64::NEG_INFINITY;
    for (name, d) in &devs {
        let gain = deviation_utility(family, v, d, candidate, n)? - base;
        if d.values().windows(2).all(|w| w[1] < w[0]) {
            atomless_max_gain = atomless_max_gain.max(gain);
        }
        if gain > max_gain {
            max_gain = gain;
            best = name.clone();
        }
    }
    let verdict = if max_gain <= policy.tol * scale {
        Verdict::EquilibriumWithinTol
    } else {
        Verdict::Refuted {
            witness: best.clone(),
            gain: max_gain,
        }
    };
    Ok(EquilibriumReport {
        family: family.name().into(),
        n,
        candidate: candidate.clone(),
        deviation_count: devs.len(),
        max_gain,
        best_deviation: best,
        atomless_max_gain,
        utilities: vec![base; n],
        verdict,
    })
}
