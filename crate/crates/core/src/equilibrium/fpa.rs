use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::best_response::random::random_monotone;
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre4, golden_section_max, trapezoid};
use crate::quantile::{sup_where_ge, sup_where_gt, QuantileDistribution, QuantileGrid};

/// Bid as a function of own quantile, weakly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidStrategy {
    pub grid: QuantileGrid,
    pub bids: Vec<f64>,
}

impl BidStrategy {
    pub fn new(grid: QuantileGrid, bids: Vec<f64>) -> Result<Self> {
        if bids.len() != grid.n_points() {
            return Err(Error::GridMismatch(grid.n_points(), bids.len()));
        }
        for k in 1..bids.len() {
            if bids[k] > bids[k - 1] {
                return Err(Error::NonMonotone {
                    index: k,
                    prev: bids[k - 1],
                    next: bids[k],
                });
            }
        }
        Ok(Self { grid, bids })
    }

    /// Probability that a single opponent using this strategy bids below `b`,
    /// plus half the probability of a tie.
    pub fn win_share(&self, b: f64) -> f64 {
        let above = sup_where_gt(&self.grid, &self.bids, b);
        let at_least = sup_where_ge(&self.grid, &self.bids, b);
        1.0 - at_least + 0.5 * (at_least - above)
    }
}

/// Symmetric Bayes-Nash bid `b(q) = ∫_q^1 (n-1)(1-s)^{n-2} v(s) ds / (1-q)^{n-1}`.
pub fn fpa_bne_iid(v: &QuantileDistribution, n: usize) -> Result<BidStrategy> {
    if n < 2 {
        return Err(Error::TooFewBuyers(n));
    }
    let grid = *v.grid();
    let cells = grid.cells();
    let w = |s: f64| (n as f64 - 1.0) * (1.0 - s).powi(n as i32 - 2) * v.value_at(s);
    let mut tail = vec![0.0; cells + 1];
    for k in (0..cells).rev() {
        tail[k] = tail[k + 1] + gauss_legendre4(&w, grid.q(k), grid.q(k + 1));
    }
    let mut bids: Vec<f64> = (0..cells)
        .map(|k| tail[k] / (1.0 - grid.q(k)).powi(n as i32 - 1))
        .collect();
    bids.push(*v.values().last().unwrap());
    for k in 1..bids.len() {
        bids[k] = bids[k].min(bids[k - 1]);
    }
    BidStrategy::new(grid, bids)
}

/// Two-buyer FPA utility of a bid strategy against a fixed opponent strategy.
pub fn fpa_utility(v: &QuantileDistribution, own: &BidStrategy, opponent: &BidStrategy) -> f64 {
    let vals: Vec<f64> = own
        .bids
        .iter()
        .zip(v.values())
        .map(|(&b, &vq)| opponent.win_share(b) * (vq - b))
        .collect();
    trapezoid(&vals, own.grid.step())
}

/// Outcome of the FPA equilibrium check.
#[derive(Debug, Clone, Serialize)]
pub struct FpaCheck {
    pub candidate_utility: f64,
    /// Gain of the pointwise-optimal bid over the candidate.
    pub pointwise_gain: f64,
    /// Best gain among sampled monotone deviations.
    pub sampled_gain: f64,
    pub samples: usize,
}

pub fn fpa_equilibrium_check(v: &QuantileDistribution, strategy: &BidStrategy, samples: usize, seed: u64) -> Result<FpaCheck> {
    let grid = strategy.grid;
    let base = fpa_utility(v, strategy, strategy);
    let best: Vec<f64> = v
        .values()
        .iter()
        .map(|&vq| {
            let f = |b: f64| strategy.win_share(b) * (vq - b);
            let mut top = f(0.0).max(0.0);
            let steps = 256;
            let mut arg = 0.0;
            for s in 0..=steps {
                let b = vq * s as f64 / steps as f64;
                if f(b) > top {
                    top = f(b);
                    arg = b;
                }
            }
            let h = vq / steps as f64;
            let (_, refined) = golden_section_max(f, (arg - h).max(0.0), (arg + h).min(vq.max(0.0)), 40);
            top.max(refined)
        })
        .collect();
    let pointwise_gain = trapezoid(&best, grid.step()) - base;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_gain = f64::NEG_INFINITY;
    for _ in 0..samples {
        let dev = if rng.gen_bool(0.5) {
            let d = random_monotone(grid, v.scale(), &mut rng)?;
            BidStrategy::new(grid, d.values().to_vec())?
        } else {
            let f = rng.gen_range(0.8..1.2);
            BidStrategy::new(grid, strategy.bids.iter().map(|b| b * f).collect())?
        };
        sampled_gain = sampled_gain.max(fpa_utility(v, &dev, strategy) - base);
    }
    Ok(FpaCheck {
        candidate_utility: base,
        pointwise_gain,
        sampled_gain,
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub myerson: Vec<f64>,
    pub fpa: Vec<f64>,
    pub max_discrepancy: f64,
}

/// Compares buyer utilities in the Myerson-induced game with virtual-bid actions
/// `r_i` and in the first-price game with bids `b_i = r_i`. Both use trapezoid
/// weights on the tensor grid and the even tie split; the Myerson side first
/// builds `x_i(r)` per own quantile, the FPA side accumulates pair by pair.
pub fn myerson_fpa_equivalence_check(truths: &[QuantileDistribution], actions: &[Vec<f64>]) -> Result<EquivalenceReport> {
    if truths.len() != 2 || actions.len() != 2 {
        return Err(Error::Unsupported("the tensor comparator handles two buyers".into()));
    }
    let grid = *truths[0].grid();
    let np = grid.n_points();
    for a in actions {
        BidStrategy::new(grid, a.clone())?;
    }
    let h = grid.step();
    let w: Vec<f64> = (0..np)
        .map(|k| if k == 0 || k + 1 == np { 0.5 * h } else { h })
        .collect();
    let share = |a: f64, b: f64| -> f64 {
        if a > b {
            1.0
        } else if a == b {
            0.5
        } else {
            0.0
        }
    };
    let mut myerson = vec![0.0; 2];
    let mut fpa = vec![0.0; 2];
    for i in 0..2 {
        let j = 1 - i;
        let (ri, rj) = (&actions[i], &actions[j]);
        let v = truths[i].values();
        // Myerson: interim allocation of each own virtual bid, then integrate
        let mut total = 0.0;
        for k in 0..np {
            let x: f64 = (0..np).map(|l| w[l] * share(ri[k], rj[l])).sum();
            total += w[k] * x * (v[k] - ri[k]);
        }
        myerson[i] = total;
        // FPA: ex-post surplus pair by pair, opponent-major order
        let mut total = 0.0;
        for l in 0..np {
            let mut row = 0.0;
            for k in 0..np {
                row += w[k] * share(ri[k], rj[l]) * (v[k] - ri[k]);
            }
            total += w[l] * row;
        }
        fpa[i] = total;
    }
    let max_discrepancy = (0..2).map(|i| (myerson[i] - fpa[i]).abs()).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        myerson,
        fpa,
        max_discrepancy,
    })
}
