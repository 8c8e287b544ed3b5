use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_truths;
use crate::error::{Error, Result};
use crate::mechanism::PreparedMechanism;
use crate::quantile::QuantileDistribution;

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 20_240_601,
        }
    }
}

/// Monte Carlo means and standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub revenue: f64,
    pub revenue_se: f64,
    pub welfare: f64,
    pub welfare_se: f64,
    pub utilities: Vec<f64>,
    pub utilities_se: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

/// Running sums of `k` tracked quantities.
#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            sum: vec![0.0; k],
            sq: vec![0.0; k],
        }
    }

    fn push(&mut self, xs: &[f64]) {
        for (k, x) in xs.iter().enumerate() {
            self.sum[k] += x;
            self.sq[k] += x * x;
        }
    }

    fn merge(mut self, other: Moments) -> Self {
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sq[k] += other.sq[k];
        }
        self
    }

    fn mean_se(&self, k: usize, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum[k] / nf;
        let var = ((self.sq[k] / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `per_sample` over deterministic chunks and reduces them in chunk order,
/// so the result does not depend on the thread count.
fn run_chunks<F>(samples: usize, seed: u64, width: usize, per_sample: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<f64>) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut acc = Moments::new(width);
            let mut row = vec![0.0; width];
            let len = CHUNK.min(samples - c * CHUNK);
            for _ in 0..len {
                per_sample(&mut rng, &mut row);
                acc.push(&row);
            }
            acc
        })
        .collect();
    parts.into_iter().fold(Moments::new(width), Moments::merge)
}

/// Independent estimate of revenue, welfare and utilities from ex-post outcomes.
pub fn monte_carlo_oracle(
    m: &PreparedMechanism,
    truths: &[QuantileDistribution],
    cfg: &McConfig,
) -> Result<MonteCarloEstimate> {
    check_truths(m, truths)?;
    if cfg.samples < 2 {
        return Err(Error::InvalidParameters("need at least 2 samples".into()));
    }
    let n = m.n();
    let draw = m.family().needs_reserve_draw();
    let mom = run_chunks(cfg.samples, cfg.seed, n + 2, |rng, row| {
        let q: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let qr = draw.then(|| rng.gen::<f64>());
        let out = m.outcome(&q, qr).expect("validated inputs");
        let mut rev = 0.0;
        let mut sw = 0.0;
        for i in 0..n {
            let v = truths[i].value_at(q[i]);
            rev += out.payments[i];
            sw += out.allocation[i] * v;
            row[2 + i] = out.allocation[i] * v - out.payments[i];
        }
        row[0] = rev;
        row[1] = sw;
    });
    let (revenue, revenue_se) = mom.mean_se(0, cfg.samples);
    let (welfare, welfare_se) = mom.mean_se(1, cfg.samples);
    let (utilities, utilities_se) = (0..n).map(|i| mom.mean_se(2 + i, cfg.samples)).unzip();
    Ok(MonteCarloEstimate {
        revenue,
        revenue_se,
        welfare,
        welfare_se,
        utilities,
        utilities_se,
        samples: cfg.samples,
        seed: cfg.seed,
    })
}

/// Interim allocation and payment of buyer `i` at own quantile `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterimEstimate {
    pub allocation: f64,
    pub allocation_se: f64,
    pub payment: f64,
    pub payment_se: f64,
}

pub fn monte_carlo_interim(m: &PreparedMechanism, i: usize, q: f64, cfg: &McConfig) -> Result<InterimEstimate> {
    if i >= m.n() {
        return Err(Error::BuyerIndex(i));
    }
    if cfg.samples < 2 {
        return Err(Error::InvalidParameters("need at least 2 samples".into()));
    }
    let n = m.n();
    let draw = m.family().needs_reserve_draw();
    let mom = run_chunks(cfg.samples, cfg.seed, 2, |rng, row| {
        let qs: Vec<f64> = (0..n).map(|j| if j == i { q } else { rng.gen::<f64>() }).collect();
        let qr = draw.then(|| rng.gen::<f64>());
        let out = m.outcome(&qs, qr).expect("validated inputs");
        row[0] = out.allocation[i];
        row[1] = out.payments[i];
    });
    let (allocation, allocation_se) = mom.mean_se(0, cfg.samples);
    let (payment, payment_se) = mom.mean_se(1, cfg.samples);
    Ok(InterimEstimate {
        allocation,
        allocation_se,
        payment,
        payment_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{FakeProfile, MechanismFamily};
    use crate::quantile::QuantileGrid;

    #[test]
    fn estimates_are_seed_deterministic() {
        let g = QuantileGrid::new(65).unwrap();
        let u = QuantileDistribution::uniform(0.0, 1.0, g).unwrap();
        let p = FakeProfile::symmetric(&u, 2).unwrap();
        let m = PreparedMechanism::new(&MechanismFamily::Spa, &p).unwrap();
        let cfg = McConfig {
            samples: 40_000,
            seed: 9,
        };
        let a = monte_carlo_oracle(&m, &[u.clone(), u.clone()], &cfg).unwrap();
        let b = monte_carlo_oracle(&m, &[u.clone(), u.clone()], &cfg).unwrap();
        assert_eq!(a, b);
        assert!((a.revenue - 1.0 / 3.0).abs() < 4.0 * a.revenue_se);
    }

    #[test]
    fn zero_reports_give_zero_revenue() {
        let g = QuantileGrid::new(65).unwrap();
        let zero = QuantileDistribution::constant(0.0, g).unwrap();
        let u = QuantileDistribution::uniform(0.0, 1.0, g).unwrap();
        let p = FakeProfile::symmetric(&zero, 2).unwrap();
        let m = PreparedMechanism::new(&MechanismFamily::QuantileReserve, &p).unwrap();
        let cfg = McConfig {
            samples: 10_000,
            seed: 1,
        };
        let e = monte_carlo_oracle(&m, &[u.clone(), u], &cfg).unwrap();
        assert_eq!(e.revenue, 0.0);
    }
}
