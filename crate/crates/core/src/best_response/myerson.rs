use super::BestResponseResult;
use crate::error::{Error, Result};
use crate::interim::win_probability;
use crate::mechanism::{FakeProfile, MechanismFamily, PreparedMechanism};
use crate::numeric::{golden_section_max, trapezoid};
use crate::quantile::QuantileDistribution;

const SCAN_POINTS: usize = 512;
const GOLDEN_ITERS: usize = 30;

/// Win probability of a virtual bid against the opponents' ironed virtual values.
pub struct VirtualBidAllocation {
    m: PreparedMechanism,
}

impl VirtualBidAllocation {
    pub fn new(own: &QuantileDistribution, opponents: &[QuantileDistribution]) -> Result<Self> {
        let mut reports = vec![own.clone()];
        reports.extend_from_slice(opponents);
        let m = PreparedMechanism::new(&MechanismFamily::Myerson, &FakeProfile::new(reports)?)?;
        Ok(Self { m })
    }

    /// `x(r)`: zero unless `r` is positive.
    pub fn at(&self, r: f64) -> f64 {
        if r > self.m.score_tol() {
            win_probability(&self.m, 0, r, None)
        } else {
            0.0
        }
    }

    /// Distinct positive opponent score levels, where `x` may jump.
    fn levels(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for j in 1..self.m.n() {
            out.extend(self.m.buyer(j).scores.iter().copied().filter(|&s| s > 0.0));
        }
        out
    }
}

/// Pointwise best response in the Myerson-induced game: for each quantile pick
/// the virtual bid maximising `x(r) (v - r)`, then average it into a report.
pub fn myerson_best_response(v: &QuantileDistribution, opponents: &[QuantileDistribution]) -> Result<BestResponseResult> {
    let grid = *v.grid();
    let alloc = VirtualBidAllocation::new(v, opponents)?;
    let vmax = v.scale().max(alloc.levels().iter().copied().fold(0.0, f64::max));
    let tol = alloc.m.score_tol();
    let floor = 1e-9 * vmax.max(1e-300);

    let mut cand: Vec<f64> = vec![0.0, floor];
    for c in alloc.levels() {
        cand.push(c);
        cand.push(c + 3.0 * tol);
    }
    cand.extend((1..=SCAN_POINTS).map(|k| vmax * k as f64 / SCAN_POINTS as f64));
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let xs: Vec<f64> = cand.iter().map(|&r| alloc.at(r)).collect();

    let values = v.values();
    let slack = 1e-15 * vmax.max(1e-300);
    let mut r = vec![0.0; values.len()];
    let mut best_obj = vec![0.0; values.len()];
    for (k, &vk) in values.iter().enumerate() {
        let top = cand.partition_point(|&c| c <= vk);
        let mut bi = 0;
        let mut bv = f64::NEG_INFINITY;
        for (idx, (&c, &x)) in cand[..top].iter().zip(&xs[..top]).enumerate() {
            let obj = x * (vk - c);
            if obj >= bv - slack {
                bi = idx;
                bv = bv.max(obj);
            }
        }
        let mut rk = cand[bi];
        let lo = if bi > 0 { cand[bi - 1] } else { cand[0] };
        let hi = if bi + 1 < top { cand[bi + 1] } else { vk };
        if hi > lo {
            let (gr, gv) = golden_section_max(|s| alloc.at(s) * (vk - s), lo, hi, GOLDEN_ITERS);
            if gv > bv + slack {
                rk = gr;
                bv = gv;
            }
        }
        r[k] = rk;
        best_obj[k] = bv.max(0.0);
    }

    let worst = r.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if worst > 1e-6 * vmax {
        return Err(Error::Unsupported(format!(
            "pointwise argmax not monotone (increase {worst:e})"
        )));
    }
    for k in 1..r.len() {
        r[k] = r[k].min(r[k - 1]);
    }

    // v̂(q) = (1/q) ∫_0^q r, v̂(0) = r(0)
    let h = grid.step();
    let mut fake = vec![r[0]; r.len()];
    let mut acc = 0.0;
    for k in 1..r.len() {
        acc += 0.5 * h * (r[k - 1] + r[k]);
        fake[k] = acc / grid.q(k);
    }

    let dr = 1e-6 * vmax;
    let residuals: Vec<f64> = values
        .iter()
        .zip(&r)
        .map(|(&vk, &rk)| {
            let x = alloc.at(rk);
            let dx = (alloc.at(rk + dr) - alloc.at((rk - dr).max(0.0))) / (rk + dr - (rk - dr).max(0.0));
            if x > 0.0 && dx > 1e-9 && rk > dr {
                vk - (x / dx + rk)
            } else {
                0.0
            }
        })
        .collect();
    let residual_max = residuals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(BestResponseResult {
        fake: QuantileDistribution::from_values(grid, fake)?,
        virtual_curve: Some(r),
        achieved_utility: trapezoid(&best_obj, h),
        residuals,
        residual_max,
    })
}
