use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre4, rk4_step};

use crate::quantile::QuantileDistribution;

/// Symmetric equilibrium report of the shared-random-reserve auction.
#[derive(Debug, Clone, Serialize)]
pub struct SparqrSolution {
    pub fake: QuantileDistribution,
    /// Largest gap to the RK4 stepper (at a quarter of the grid spacing).
    pub rk4_max_diff: f64,
    /// Largest `|v - (v̂ - q v̂' / (n-1))|` on `q >= 1/16`.
    pub residual_max: f64,
    /// One-sided second-order `v̂'(1)`.
    pub boundary_slope: f64,
}

/// `v̂(q) = (n-1) q^{n-1} ∫_q^1 v(s)/s^n ds + v(1) q^{n-1}`, cross-checked by
/// integrating `v̂' = (n-1)(v̂ - v)/q` backward from `v̂(1) = v(1)`.
pub fn sparqr_equilibrium(v: &QuantileDistribution, n: usize) -> Result<SparqrSolution> {
    if n < 2 {
        return Err(Error::TooFewBuyers(n));
    }
    let grid = *v.grid();
    let cells = grid.cells();
    let nf = n as f64;
    let v1 = *v.values().last().unwrap();
    let vals = v.values();
    // exact ∫ (a + b s) s^{-n} ds on each cell (v is linear there)
    let power = |s: f64, m: i32| if m == 1 { s.ln() } else { s.powi(1 - m) / (1 - m) as f64 };
    let mut tail = vec![0.0; cells + 1];
    for k in (1..cells).rev() {
        let (s0, s1) = (grid.q(k), grid.q(k + 1));
        let b = (vals[k + 1] - vals[k]) / (s1 - s0);
        let a = vals[k] - b * s0;
        let m = n as i32;
        let piece = a * (power(s1, m) - power(s0, m)) + b * (power(s1, m - 1) - power(s0, m - 1));
        tail[k] = tail[k + 1] + piece;
    }
    let mut fake = vec![0.0; cells + 1];
    fake[0] = v.values()[0];
    for k in 1..=cells {
        let q = grid.q(k);
        let p = q.powi(n as i32 - 1);
        fake[k] = (nf - 1.0) * p * tail[k] + v1 * p;
    }
    let scale = v.scale().abs().max(1e-300);
    for k in 1..fake.len() {
        if fake[k] > fake[k - 1] + 1e-9 * scale {
            return Err(Error::NonMonotone {
                index: k,
                prev: fake[k - 1],
                next: fake[k],
            });
        }
        fake[k] = fake[k].min(fake[k - 1]);
    }

    // RK4 cross-check, backward from q = 1 to q = h
    let rhs = |q: f64, y: f64| (nf - 1.0) * (y - v.value_at(q)) / q;
    let sub = 4;
    let dt = -grid.step() / sub as f64;
    let mut y = v1;
    let mut rk4_max_diff: f64 = 0.0;
    for k in (1..cells).rev() {
        let q_hi = grid.q(k + 1);
        for s in 0..sub {
            y = rk4_step(&rhs, q_hi + s as f64 * dt, y, dt);
        }
        rk4_max_diff = rk4_max_diff.max((y - fake[k]).abs());
    }

    let h = grid.step();
    let mut residual_max: f64 = 0.0;
    for k in 2..cells - 1 {
        let q = grid.q(k);
        if q < 1.0 / 16.0 {
            continue;
        }
        let d = (-fake[k + 2] + 8.0 * fake[k + 1] - 8.0 * fake[k - 1] + fake[k - 2]) / (12.0 * h);
        let res = v.values()[k] - (fake[k] - q * d / (nf - 1.0));
        residual_max = residual_max.max(res.abs());
    }
    let boundary_slope = (3.0 * fake[cells] - 4.0 * fake[cells - 1] + fake[cells - 2]) / (2.0 * h);
    Ok(SparqrSolution {
        fake: QuantileDistribution::from_values(grid, fake)?,
        rk4_max_diff,
        residual_max,
        boundary_slope,
    })
}

/// `∫_0^1 (1-q)^{n-3} (q + q² - n q³) dq` by composite Gauss-Legendre.
pub fn sparqr_gap_integral(n: usize) -> f64 {
    let nf = n as f64;
    let f = |q: f64| (1.0 - q).powi(n as i32 - 3) * (q + q * q - nf * q * q * q);
    crate::numeric::composite_gl4(&f, 0.0, 1.0, 256)
}

/// Positive root `(1 + √(1+4n))/(2n)` of `1 + q - n q²`, where the gap
/// integrand changes sign.
pub fn sparqr_sign_point(n: usize) -> f64 {
    let nf = n as f64;
    (1.0 + (1.0 + 4.0 * nf).sqrt()) / (2.0 * nf)
}

/// `v̂(1)/6 - ∫ (q²/2 + 2q³/3) v̂'(q) dq` for a report on the grid.
pub fn sparqr_two_buyer_gap(fake: &QuantileDistribution) -> f64 {
    let grid = fake.grid();
    let vals = fake.values();
    let h = grid.step();
    let w = |q: f64| 0.5 * q * q + 2.0 / 3.0 * q * q * q;
    let mut integral = 0.0;
    for k in 0..grid.cells() {
        let slope = (vals[k + 1] - vals[k]) / h;
        integral += slope * gauss_legendre4(&w, grid.q(k), grid.q(k + 1));
    }
    vals.last().unwrap() / 6.0 - integral
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::QuantileGrid;

    #[test]
    fn uniform_two_buyers() {
        let g = QuantileGrid::new(1025).unwrap();
        let v = QuantileDistribution::uniform(0.0, 1.0, g).unwrap();
        let s = sparqr_equilibrium(&v, 2).unwrap();
        for (k, q) in g.points().enumerate() {
            let want = if q == 0.0 { 1.0 } else { 1.0 - q + q * q.ln() };
            assert!((s.fake.values()[k] - want).abs() < 1e-6, "q={q}");
        }
        assert!(s.residual_max < 1e-6, "{}", s.residual_max);
        assert!(s.rk4_max_diff < 1e-6, "{}", s.rk4_max_diff);
        assert!(s.boundary_slope.abs() < 1e-4);
        assert!(sparqr_two_buyer_gap(&s.fake) >= 0.0);
    }

    #[test]
    fn constant_value_is_fixed_point() {
        let g = QuantileGrid::new(129).unwrap();
        let v = QuantileDistribution::constant(0.7, g).unwrap();
        for n in 2..5 {
            let s = sparqr_equilibrium(&v, n).unwrap();
            assert!(s.fake.sup_distance(&v) < 1e-9);
        }
    }

    #[test]
    fn gap_integral_closed_form() {
        for n in 3..=5 {
            let want = 1.0 / n as f64 - 1.0 / (n as f64 + 1.0);
            assert!((sparqr_gap_integral(n) - want).abs() < 1e-12);
        }
        let q = sparqr_sign_point(3);
        assert!((1.0 + q - 3.0 * q * q).abs() < 1e-12);
    }
}
