use serde::Serialize;

use super::{FakeProfile, MechanismFamily};
use crate::error::{Error, Result};
use crate::numeric::monotone_step_integral;
use crate::quantile::{sup_where_ge, sup_where_gt, QuantileDistribution, QuantileGrid};

/// Per-buyer lookup tables derived from the reported prior.
#[derive(Debug, Clone, PartialEq)]
pub struct BuyerTable {
    /// `v̂` on the grid.
    pub bids: Vec<f64>,
    /// Allocation score of a bid equal to `v̂(q_k)`; non-increasing in `k`.
    pub scores: Vec<f64>,
    /// Fixed reserve price (own monopoly price under SPAMR), `-inf` otherwise.
    pub price_floor: f64,
    /// End points of flat runs of `bids` (atoms of the reported distribution).
    pub flat_edges: Vec<f64>,
}

/// Ex-post outcome of one auction instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub bids: Vec<f64>,
    pub allocation: Vec<f64>,
    pub payments: Vec<f64>,
}

/// A mechanism specialised to a fake profile: everything the allocation and
/// payment rules need, precomputed on the grid.
#[derive(Debug, Clone)]
pub struct PreparedMechanism {
    family: MechanismFamily,
    grid: QuantileGrid,
    buyers: Vec<BuyerTable>,
    bid_scores: bool,
    positive_only: bool,
    active: bool,
    score_tol: f64,
    bid_tol: f64,
}

impl PreparedMechanism {
    pub fn new(family: &MechanismFamily, profile: &FakeProfile) -> Result<Self> {
        family.validate()?;
        let grid = *profile.grid();
        let mut active = true;
        if let MechanismFamily::TargetDistribution { target } = family {
            if target.len() != profile.n() {
                return Err(Error::InvalidParameters(format!(
                    "target has {} buyers, profile has {}",
                    target.len(),
                    profile.n()
                )));
            }
            for (t, r) in target.iter().zip(profile.reports()) {
                if t.grid().n_points() != grid.n_points() {
                    return Err(Error::GridMismatch(grid.n_points(), t.grid().n_points()));
                }
                if t.sup_distance(r) > 1e-9 * t.scale().abs().max(1.0) {
                    active = false;
                }
            }
        }
        let buyers = profile
            .reports()
            .iter()
            .enumerate()
            .map(|(i, r)| build_table(family, i, r))
            .collect::<Vec<_>>();
        let bid_scores = matches!(
            family,
            MechanismFamily::Spa | MechanismFamily::Spamr | MechanismFamily::Sparqr
        );
        let positive_only = matches!(
            family,
            MechanismFamily::Myerson | MechanismFamily::TargetDistribution { .. }
        );
        let smax = buyers
            .iter()
            .flat_map(|b| b.scores.iter())
            .fold(0.0f64, |m, s| m.max(s.abs()));
        let bmax = buyers
            .iter()
            .flat_map(|b| b.bids.iter())
            .fold(0.0f64, |m, s| m.max(s.abs()));
        Ok(Self {
            family: family.clone(),
            grid,
            buyers,
            bid_scores,
            positive_only,
            active,
            score_tol: 1e-12 * smax.max(1e-300),
            bid_tol: 1e-12 * bmax.max(1e-300),
        })
    }

    pub fn family(&self) -> &MechanismFamily {
        &self.family
    }

    pub fn grid(&self) -> &QuantileGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.buyers.len()
    }

    pub fn buyer(&self, i: usize) -> &BuyerTable {
        &self.buyers[i]
    }

    /// False for a target-distribution mechanism facing a mismatched profile.
    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn bid_scores(&self) -> bool {
        self.bid_scores
    }

    pub fn positive_only(&self) -> bool {
        self.positive_only
    }

    pub fn score_tol(&self) -> f64 {
        self.score_tol
    }

    pub fn bid_tol(&self) -> f64 {
        self.bid_tol
    }

    pub fn bid_at(&self, i: usize, q: f64) -> f64 {
        self.grid.interpolate(&self.buyers[i].bids, q)
    }

    /// Score as a function of quantile (equals `score_of_bid(bid_at(q))`).
    pub fn score_at(&self, i: usize, q: f64) -> f64 {
        self.grid.interpolate(&self.buyers[i].scores, q)
    }

    /// `q̂_i(z) = inf { q : v̂_i(q) <= z }`.
    pub fn quantile_of_bid(&self, i: usize, z: f64) -> f64 {
        sup_where_gt(&self.grid, &self.buyers[i].bids, z)
    }

    pub fn score_of_bid(&self, i: usize, z: f64) -> f64 {
        if self.bid_scores {
            z
        } else {
            self.score_at(i, self.quantile_of_bid(i, z))
        }
    }

    /// Lowest admissible bid for buyer `i` given the reserve draw.
    pub fn floor(&self, i: usize, reserve_draw: Option<f64>) -> f64 {
        match self.family {
            MechanismFamily::Spamr => self.buyers[i].price_floor,
            MechanismFamily::Sparqr => reserve_draw
                .map(|qr| self.bid_at(i, qr))
                .unwrap_or(f64::NEG_INFINITY),
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn eligible(&self, bid: f64, score: f64, floor: f64) -> bool {
        self.active && bid >= floor - self.bid_tol && (!self.positive_only || score > self.score_tol)
    }

    fn check_draw(&self, reserve_draw: Option<f64>) -> Result<()> {
        if self.family.needs_reserve_draw() {
            match reserve_draw {
                Some(q) if (0.0..=1.0).contains(&q) => Ok(()),
                Some(q) => Err(Error::InvalidParameters(format!("reserve draw {q} outside [0, 1]"))),
                None => Err(Error::MissingReserveDraw),
            }
        } else {
            Ok(())
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            Err(Error::InvalidParameters(format!("expected {} entries, got {len}", self.n())))
        } else {
            Ok(())
        }
    }

    /// Allocation when buyer `i` draws quantile `quantiles[i]` and reports truthfully
    /// with respect to the published prior.
    pub fn allocate(&self, quantiles: &[f64], reserve_draw: Option<f64>) -> Result<Vec<f64>> {
        self.check_len(quantiles.len())?;
        let bids: Vec<f64> = quantiles.iter().enumerate().map(|(i, &q)| self.bid_at(i, q)).collect();
        self.allocate_bids(&bids, reserve_draw)
    }

    pub fn allocate_bids(&self, bids: &[f64], reserve_draw: Option<f64>) -> Result<Vec<f64>> {
        self.check_len(bids.len())?;
        self.check_draw(reserve_draw)?;
        Ok(self.alloc_unchecked(bids, reserve_draw))
    }

    fn alloc_unchecked(&self, bids: &[f64], reserve_draw: Option<f64>) -> Vec<f64> {
        let n = bids.len();
        let mut scores = vec![f64::NEG_INFINITY; n];
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            let s = self.score_of_bid(i, bids[i]);
            if self.eligible(bids[i], s, self.floor(i, reserve_draw)) {
                scores[i] = s;
                best = best.max(s);
            }
        }
        let mut x = vec![0.0; n];
        if best == f64::NEG_INFINITY {
            return x;
        }
        let winners: Vec<usize> = (0..n).filter(|&i| scores[i] >= best - self.score_tol).collect();
        let share = 1.0 / winners.len() as f64;
        for i in winners {
            x[i] = share;
        }
        x
    }

    /// Smallest bid whose score is at least `m` (`+inf` if none).
    fn min_bid_score_ge(&self, i: usize, m: f64) -> f64 {
        if self.bid_scores {
            return m;
        }
        let t = &self.buyers[i];
        if t.scores[0] < m - self.score_tol {
            return f64::INFINITY;
        }
        let q = sup_where_ge(&self.grid, &t.scores, m - self.score_tol);
        self.bid_at(i, q)
    }

    /// Infimum of bids whose score exceeds `m` (`+inf` if none).
    fn min_bid_score_gt(&self, i: usize, m: f64) -> f64 {
        if self.bid_scores {
            return m;
        }
        let t = &self.buyers[i];
        if t.scores[0] <= m + self.score_tol {
            return f64::INFINITY;
        }
        let q = sup_where_gt(&self.grid, &t.scores, m + self.score_tol);
        self.bid_at(i, q)
    }

    /// Lowest bid at which buyer `i` is eligible at all.
    fn eligibility_bound(&self, i: usize, reserve_draw: Option<f64>) -> f64 {
        let low = *self.buyers[i].bids.last().unwrap();
        let mut z = low.max(self.floor(i, reserve_draw));
        if self.positive_only {
            z = z.max(self.min_bid_score_gt(i, 0.0));
        }
        z
    }

    /// Threshold-price payments: the Stieltjes sum of the allocation jumps
    /// of each buyer's step allocation, opponents held fixed.
    pub fn payments_threshold(&self, bids: &[f64], reserve_draw: Option<f64>) -> Result<Vec<f64>> {
        let x = self.allocate_bids(bids, reserve_draw)?;
        let n = bids.len();
        let mut t = vec![0.0; n];
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            let mut top = f64::NEG_INFINITY;
            let mut opp = Vec::with_capacity(n - 1);
            for j in (0..n).filter(|&j| j != i) {
                let s = self.score_of_bid(j, bids[j]);
                if self.eligible(bids[j], s, self.floor(j, reserve_draw)) {
                    top = top.max(s);
                    opp.push(s);
                }
            }
            let lower = self.eligibility_bound(i, reserve_draw);
            let (za, zb, k) = if top == f64::NEG_INFINITY {
                (lower, lower, 0)
            } else {
                let k = opp.iter().filter(|&&s| s >= top - self.score_tol).count();
                (
                    lower.max(self.min_bid_score_ge(i, top)),
                    lower.max(self.min_bid_score_gt(i, top)),
                    k,
                )
            };
            let x_tie = 1.0 / (1 + k) as f64;
            let za = za.min(bids[i]);
            let zb = zb.min(bids[i]).max(za);
            t[i] = if x[i] < 1.0 {
                x[i] * za
            } else {
                x_tie * za + (1.0 - x_tie) * zb
            };
        }
        Ok(t)
    }

    /// Buyer `i`'s allocation when bidding `z`, everyone else fixed.
    pub fn own_allocation(&self, i: usize, z: f64, bids: &[f64], reserve_draw: Option<f64>) -> f64 {
        let mut b = bids.to_vec();
        b[i] = z;
        self.alloc_unchecked(&b, reserve_draw)[i]
    }

    /// `t_i = b x_i(b) - ∫_{v̂_i(1)}^{b} x_i(z) dz`, integrating the step allocation directly.
    pub fn payments_integral(&self, bids: &[f64], reserve_draw: Option<f64>) -> Result<Vec<f64>> {
        let x = self.allocate_bids(bids, reserve_draw)?;
        let n = bids.len();
        let mut t = vec![0.0; n];
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            let low = *self.buyers[i].bids.last().unwrap();
            let f = |z: f64| self.own_allocation(i, z, bids, reserve_draw);
            let res = 1e-13 * self.buyers[i].bids[0].abs().max(1e-300);
            let area = monotone_step_integral(&f, low, bids[i], res);
            t[i] = bids[i] * x[i] - area;
        }
        Ok(t)
    }

    pub fn outcome(&self, quantiles: &[f64], reserve_draw: Option<f64>) -> Result<Outcome> {
        self.check_len(quantiles.len())?;
        let bids: Vec<f64> = quantiles.iter().enumerate().map(|(i, &q)| self.bid_at(i, q)).collect();
        let allocation = self.allocate_bids(&bids, reserve_draw)?;
        let payments = self.payments_threshold(&bids, reserve_draw)?;
        Ok(Outcome {
            bids,
            allocation,
            payments,
        })
    }
}

fn build_table(family: &MechanismFamily, i: usize, report: &QuantileDistribution) -> BuyerTable {
    let grid = *report.grid();
    let mut bids = report.values().to_vec();
    // drops at rounding level become exact flats, otherwise a cell that is
    // flat up to one ulp splits its atom between the two grid scores
    let tol = 1e-12 * bids[0].abs().max(1e-300);
    for k in 1..bids.len() {
        if bids[k - 1] - bids[k] <= tol {
            bids[k] = bids[k - 1];
        }
    }
    // quantile at which each grid bid is first reached (start of any flat)
    let bid_q: Vec<f64> = bids.iter().map(|&b| sup_where_gt(&grid, &bids, b)).collect();
    let mut scores: Vec<f64> = match family {
        MechanismFamily::Spa | MechanismFamily::Spamr | MechanismFamily::Sparqr => bids.clone(),
        MechanismFamily::Myerson => {
            let rbar = report.iron().ironed_virtual;
            bid_q.iter().map(|&q| grid.interpolate(&rbar, q)).collect()
        }
        MechanismFamily::VirtualEfficient { rule } => {
            let slope = report.derivative();
            bid_q
                .iter()
                .zip(&bids)
                .map(|(&q, &b)| rule.eval(q, b, grid.interpolate(&slope, q)))
                .collect()
        }
        MechanismFamily::QuantileReserve => bid_q.iter().map(|&q| -q).collect(),
        MechanismFamily::TargetDistribution { target } => {
            let rbar = target[i].iron().ironed_virtual;
            bid_q.iter().map(|&q| grid.interpolate(&rbar, q)).collect()
        }
    };
    for k in 1..scores.len() {
        if scores[k] > scores[k - 1] {
            scores[k] = scores[k - 1];
        }
    }
    let price_floor = match family {
        MechanismFamily::Spamr => report.reserve_quantile().price,
        _ => f64::NEG_INFINITY,
    };
    let mut flat_edges = Vec::new();
    let mut k = 0;
    while k + 1 < bids.len() {
        if bids[k + 1] == bids[k] {
            let start = k;
            while k + 1 < bids.len() && bids[k + 1] == bids[start] {
                k += 1;
            }
            flat_edges.push(grid.q(start));
            flat_edges.push(grid.q(k));
        } else {
            k += 1;
        }
    }
    BuyerTable {
        bids,
        scores,
        price_floor,
        flat_edges,
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mechanism::VeRule;

    fn grid() -> QuantileGrid {
        QuantileGrid::new(129).unwrap()
    }

    fn random_report(rng: &mut ChaCha8Rng, g: QuantileGrid) -> QuantileDistribution {
        // random decreasing piecewise-linear profile, occasionally with flats
        let mut v = vec![0.0; g.n_points()];
        let mut level = rng.gen_range(0.5..2.0);
        for k in (0..g.n_points()).rev() {
            v[k] = level;
            if rng.gen_bool(0.85) {
                level += rng.gen_range(0.0..0.05);
            }
        }
        QuantileDistribution::from_values(g, v).unwrap()
    }

    fn families(g: QuantileGrid, n: usize) -> Vec<MechanismFamily> {
        vec![
            MechanismFamily::Spa,
            MechanismFamily::Myerson,
            MechanismFamily::Spamr,
            MechanismFamily::Sparqr,
            MechanismFamily::VirtualEfficient {
                rule: VeRule::QuantileDiscount { beta: 0.5 },
            },
            MechanismFamily::QuantileReserve,
            MechanismFamily::TargetDistribution {
                target: vec![QuantileDistribution::uniform(0.0, 1.0, g).unwrap(); n],
            },
        ]
    }

    #[test]
    fn threshold_matches_integral_payments() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let instances_per_profile = 200;
        let mut checked = 0;
        for round in 0..50 {
            let n = 2 + round % 3;
            let profile = if round % 5 == 0 {
                FakeProfile::symmetric(&QuantileDistribution::uniform(0.0, 1.0, g).unwrap(), n).unwrap()
            } else {
                FakeProfile::new((0..n).map(|_| random_report(&mut rng, g)).collect()).unwrap()
            };
            for family in families(g, n) {
                let m = PreparedMechanism::new(&family, &profile).unwrap();
                for _ in 0..instances_per_profile {
                    let q: Vec<f64> = (0..n)
                        .map(|_| {
                            if rng.gen_bool(0.2) {
                                g.q(rng.gen_range(0..g.n_points()))
                            } else {
                                rng.gen::<f64>()
                            }
                        })
                        .collect();
                    let qr = family.needs_reserve_draw().then(|| rng.gen::<f64>());
                    let bids: Vec<f64> = q.iter().enumerate().map(|(i, &q)| m.bid_at(i, q)).collect();
                    let a = m.payments_threshold(&bids, qr).unwrap();
                    let b = m.payments_integral(&bids, qr).unwrap();
                    for i in 0..n {
                        assert!(
                            (a[i] - b[i]).abs() < 1e-6,
                            "{family:?} bids {bids:?} qr {qr:?} buyer {i}: {} vs {}",
                            a[i],
                            b[i]
                        );
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked >= 7 * 10_000);
    }

    #[test]
    fn sparqr_requires_draw() {
        let g = grid();
        let u = QuantileDistribution::uniform(0.0, 1.0, g).unwrap();
        let p = FakeProfile::symmetric(&u, 2).unwrap();
        let m = PreparedMechanism::new(&MechanismFamily::Sparqr, &p).unwrap();
        assert!(matches!(m.allocate(&[0.2, 0.3], None), Err(Error::MissingReserveDraw)));
        let x = m.allocate(&[0.2, 0.3], Some(0.25)).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
        let x = m.allocate(&[0.2, 0.3], Some(0.1)).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn myerson_and_spamr_agree_on_identical_regular_reports() {
        let g = grid();
        let u = QuantileDistribution::uniform(0.0, 1.0, g).unwrap();
        let p = FakeProfile::symmetric(&u, 3).unwrap();
        let my = PreparedMechanism::new(&MechanismFamily::Myerson, &p).unwrap();
        let sp = PreparedMechanism::new(&MechanismFamily::Spamr, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            // skip the measure-zero boundary at the reserve
            if q.iter().any(|&x| (x - 0.5).abs() < 1e-9) {
                continue;
            }
            let a = my.outcome(&q, None).unwrap();
            let b = sp.outcome(&q, None).unwrap();
            assert_eq!(a.allocation, b.allocation);
            for i in 0..3 {
                assert!((a.payments[i] - b.payments[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quantile_reserve_is_scale_invariant() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reports: Vec<_> = (0..3).map(|_| random_report(&mut rng, g)).collect();
        let p = FakeProfile::new(reports.clone()).unwrap();
        let scaled = FakeProfile::new(reports.iter().map(|r| r.scaled(3.5).unwrap()).collect()).unwrap();
        let a = PreparedMechanism::new(&MechanismFamily::QuantileReserve, &p).unwrap();
        let b = PreparedMechanism::new(&MechanismFamily::QuantileReserve, &scaled).unwrap();
        for _ in 0..500 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            assert_eq!(a.allocate(&q, None).unwrap(), b.allocate(&q, None).unwrap());
        }
    }

    #[test]
    fn target_mechanism_shuts_down_off_target() {
        let g = grid();
        let target = QuantileDistribution::affine(1.0, -0.5, g).unwrap();
        let fam = MechanismFamily::TargetDistribution {
            target: vec![target.clone(); 2],
        };
        let on = PreparedMechanism::new(&fam, &FakeProfile::symmetric(&target, 2).unwrap()).unwrap();
        assert_eq!(on.allocate(&[0.1, 0.6], None).unwrap(), vec![1.0, 0.0]);
        let off_report = target.scaled(1.01).unwrap();
        let off = PreparedMechanism::new(&fam, &FakeProfile::new(vec![target, off_report]).unwrap()).unwrap();
        assert_eq!(off.allocate(&[0.1, 0.6], None).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn ties_split_evenly() {
        let g = grid();
        let c = QuantileDistribution::constant(0.4, g).unwrap();
        let p = FakeProfile::symmetric(&c, 4).unwrap();
        let m = PreparedMechanism::new(&MechanismFamily::Spa, &p).unwrap();
        let o = m.outcome(&[0.1, 0.5, 0.7, 0.9], None).unwrap();
        assert_eq!(o.allocation, vec![0.25; 4]);
        assert!(o.payments.iter().all(|&t| (t - 0.1).abs() < 1e-12));
    }
}
