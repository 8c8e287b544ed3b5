use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::random::random_monotone;
use crate::error::{Error, Result};
use crate::interim::game_utility;
use crate::mechanism::{FakeProfile, MechanismFamily, PreparedMechanism};
use crate::quantile::QuantileDistribution;

pub const BLEND_POINTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    pub truthful_utility: f64,
    pub max_gain: f64,
    pub trials: usize,
    /// Utilities along `λ v + (1-λ) v̂` for the first deviation, at `BLEND_POINTS`.
    pub blend_path: Vec<f64>,
    pub blend_monotone: bool,
    pub passed: bool,
}

fn utility(family: &MechanismFamily, own: &QuantileDistribution, v: &QuantileDistribution, n: usize) -> Result<f64> {
    let mut reports = vec![own.clone()];
    reports.extend(std::iter::repeat_n(v.clone(), n - 1));
    let m = PreparedMechanism::new(family, &FakeProfile::new(reports)?)?;
    Ok(game_utility(&m, v, 0)?.virtual_form)
}

/// Random monotone deviations against truthful opponents in a prior-independent family.
pub fn prior_independent_dominance_check(
    family: &MechanismFamily,
    v: &QuantileDistribution,
    n: usize,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<DominanceReport> {
    if !matches!(family, MechanismFamily::Spa) {
        return Err(Error::Unsupported(format!(
            "{} depends on the reported priors",
            family.name()
        )));
    }
    if n < 2 {
        return Err(Error::TooFewBuyers(n));
    }
    let truthful_utility = utility(family, v, v, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gain = f64::NEG_INFINITY;
    let mut first = None;
    for _ in 0..trials {
        let dev = random_monotone(*v.grid(), 1.5 * v.scale().max(1e-12), &mut rng)?;
        let u = utility(family, &dev, v, n)?;
        max_gain = max_gain.max(u - truthful_utility);
        first.get_or_insert(dev);
    }
    let mut blend_path = Vec::new();
    if let Some(dev) = first {
        for &lambda in &BLEND_POINTS {
            blend_path.push(utility(family, &v.blend(&dev, lambda)?, v, n)?);
        }
    }
    let blend_monotone = blend_path.windows(2).all(|w| w[1] >= w[0] - tol);
    Ok(DominanceReport {
        truthful_utility,
        max_gain,
        trials,
        blend_path,
        blend_monotone,
        passed: max_gain <= tol && blend_monotone,
    })
}
