//! Random monotone reports used as deviation sets.

use rand::Rng;

use crate::error::Result;
use crate::quantile::{QuantileDistribution, QuantileGrid};

/// Random weakly decreasing piecewise-linear report on `[0, hi]`, sometimes with flats.
pub fn random_monotone<R: Rng>(grid: QuantileGrid, hi: f64, rng: &mut R) -> Result<QuantileDistribution> {
    let knots = rng.gen_range(2..8);
    let mut qs: Vec<f64> = (0..knots).map(|_| rng.gen::<f64>()).collect();
    qs.push(0.0);
    qs.push(1.0);
    qs.sort_by(f64::total_cmp);
    let mut vs: Vec<f64> = (0..qs.len()).map(|_| hi * rng.gen::<f64>()).collect();
    vs.sort_by(|a, b| b.total_cmp(a));
    if rng.gen_bool(0.3) {
        // one flat segment
        let k = rng.gen_range(0..vs.len() - 1);
        vs[k + 1] = vs[k];
    }
    QuantileDistribution::from_fn(grid, |q| {
        let p = qs.partition_point(|&x| x <= q).clamp(1, qs.len() - 1);
        let (a, b) = (qs[p - 1], qs[p]);
        let t = if b > a { (q - a) / (b - a) } else { 0.0 };
        vs[p - 1] + t * (vs[p] - vs[p - 1])
    })
}

/// Random regular report: running average of a random non-negative decreasing
/// virtual value, so the revenue curve is concave.
pub fn random_regular<R: Rng>(grid: QuantileGrid, hi: f64, rng: &mut R) -> Result<QuantileDistribution> {
    let r = random_monotone(grid, hi, rng)?;
    let h = grid.step();
    let rv = r.values();
    let mut values = vec![rv[0]; rv.len()];
    let mut acc = 0.0;
    for k in 1..rv.len() {
        acc += 0.5 * h * (rv[k - 1] + rv[k]);
        values[k] = acc / grid.q(k);
    }
    QuantileDistribution::from_values(grid, values)
}

/// `(1 - t) base + t w` for a random monotone `w` at the same scale.
pub fn perturb<R: Rng>(base: &QuantileDistribution, strength: f64, rng: &mut R) -> Result<QuantileDistribution> {
    let hi = base.scale().max(1e-12) * rng.gen_range(0.5..1.5);
    let w = random_monotone(*base.grid(), hi, rng)?;
    base.blend(&w, 1.0 - strength * rng.gen::<f64>())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn generated_reports_are_valid() {
        let g = QuantileGrid::new(129).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let d = random_monotone(g, 2.0, &mut rng).unwrap();
            assert!(d.values().windows(2).all(|w| w[1] <= w[0]));
            let r = random_regular(g, 1.0, &mut rng).unwrap();
            assert!(r.is_regular(), "{:?}", r.values());
        }
    }
}
