//! Interim allocation, payments, utilities, revenue and welfare.
//!
//! Allocation probabilities are computed exactly from level-set measures of the
//! opponents' score tables; the remaining quantities integrate them per grid cell.

mod monte_carlo;
mod table;

pub use monte_carlo::{monte_carlo_interim, monte_carlo_oracle, McConfig, MonteCarloEstimate};
pub use table::{write_curve, RevenueTable};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::PreparedMechanism;
use crate::numeric::{adaptive_simpson, piecewise_gl4};
use crate::quantile::{sup_where_ge, sup_where_gt, QuantileDistribution};

const CELL_DEPTH: u32 = 40;

fn cell_tol(scale: f64, cells: usize) -> f64 {
    1e-11 * scale.abs().max(1e-300) / cells as f64
}

/// `(beat, tie)` probabilities of opponent `j` against own score `s`.
fn opponent_measures(m: &PreparedMechanism, j: usize, s: f64, reserve_draw: Option<f64>) -> (f64, f64) {
    let grid = m.grid();
    let t = m.buyer(j);
    let tol = m.score_tol();
    let floor = m.floor(j, reserve_draw);
    let mut cap = if floor.is_finite() {
        sup_where_ge(grid, &t.bids, floor - m.bid_tol())
    } else {
        1.0
    };
    if m.positive_only() {
        cap = cap.min(sup_where_gt(grid, &t.scores, tol));
    }
    let beat = sup_where_gt(grid, &t.scores, s + tol).min(cap);
    let both = sup_where_ge(grid, &t.scores, s - tol).min(cap);
    (beat, (both - beat).max(0.0))
}

/// Win probability given the reserve draw, with ties split evenly.
fn allocation_given_draw(m: &PreparedMechanism, i: usize, q: f64, reserve_draw: Option<f64>) -> f64 {
    if !m.is_active() {
        return 0.0;
    }
    let b = m.bid_at(i, q);
    let s = m.score_at(i, q);
    if !m.eligible(b, s, m.floor(i, reserve_draw)) {
        return 0.0;
    }
    win_probability(m, i, s, reserve_draw)
}

/// Probability that an eligible buyer `i` with score `s` wins, ties split evenly.
pub fn win_probability(m: &PreparedMechanism, i: usize, s: f64, reserve_draw: Option<f64>) -> f64 {
    // poly[k] = P(no opponent beats i and exactly k tie)
    let mut poly = vec![1.0];
    for j in (0..m.n()).filter(|&j| j != i) {
        let (beat, tie) = opponent_measures(m, j, s, reserve_draw);
        let below = (1.0 - beat - tie).max(0.0);
        let mut next = vec![0.0; poly.len() + 1];
        for (k, &c) in poly.iter().enumerate() {
            next[k] += c * below;
            next[k + 1] += c * tie;
        }
        poly = next;
    }
    poly.iter().enumerate().map(|(k, c)| c / (k + 1) as f64).sum()
}

/// Reserve-draw quantiles at which buyer `i`'s conditional win probability changes form.
fn draw_breaks(m: &PreparedMechanism, i: usize, q: f64) -> Vec<f64> {
    let b = m.bid_at(i, q);
    let s = m.score_at(i, q);
    let grid = m.grid();
    let mut breaks = vec![m.quantile_of_bid(i, b + m.bid_tol())];
    for j in 0..m.n() {
        let t = m.buyer(j);
        breaks.extend_from_slice(&t.flat_edges);
        if j == i {
            continue;
        }
        for level in [s + m.score_tol(), s - m.score_tol()] {
            let qj = sup_where_gt(grid, &t.scores, level);
            breaks.push(qj);
            breaks.push(m.quantile_of_bid(j, m.bid_at(j, qj) + m.bid_tol()));
        }
    }
    breaks
}

/// Exact interim allocation `x_i*(q)`; averaged over the reserve draw when the
/// family has one.
pub fn interim_allocation(m: &PreparedMechanism, i: usize, q: f64) -> f64 {
    if m.family().needs_reserve_draw() {
        let f = |qr: f64| allocation_given_draw(m, i, q, Some(qr));
        piecewise_gl4(&f, 0.0, 1.0, &draw_breaks(m, i, q), 2)
    } else {
        allocation_given_draw(m, i, q, None)
    }
}

pub fn interim_allocation_curve(m: &PreparedMechanism, i: usize) -> Vec<f64> {
    m.grid().points().map(|q| interim_allocation(m, i, q)).collect()
}

/// Per-buyer interim quantities on the grid. Payments follow the identity
/// `t*(q) = v̂(q) x*(q) + ∫_q^1 x* v̂' + boundary`.
#[derive(Debug, Clone)]
pub struct BuyerInterim {
    pub buyer: usize,
    pub x_star: Vec<f64>,
    /// `∫ x*` over each cell.
    pub cell_mass: Vec<f64>,
    /// `∫ (s - q_k) x*(s) ds` over each cell.
    pub cell_moment: Vec<f64>,
    /// `C(q_k) = ∫_{q_k}^1 x* v̂'`.
    pub tail: Vec<f64>,
    /// Slope of `v̂` on each cell.
    pub slope: Vec<f64>,
    /// `t*(1) - v̂(1) x*(1)`; zero for the implemented payment rule.
    pub boundary: f64,
}

impl BuyerInterim {
    pub fn new(m: &PreparedMechanism, i: usize) -> Self {
        let grid = *m.grid();
        let h = grid.step();
        let cells = grid.cells();
        let x_star = interim_allocation_curve(m, i);
        let bids = &m.buyer(i).bids;
        let tol = cell_tol(1.0, cells);
        let mut cell_mass = vec![0.0; cells];
        let mut cell_moment = vec![0.0; cells];
        let mut slope = vec![0.0; cells];
        for k in 0..cells {
            let (a, b) = (grid.q(k), grid.q(k + 1));
            let f = |q: f64| interim_allocation(m, i, q);
            cell_mass[k] = adaptive_simpson(&f, a, b, tol, CELL_DEPTH);
            let g = |q: f64| (q - a) * interim_allocation(m, i, q);
            cell_moment[k] = adaptive_simpson(&g, a, b, tol * h, CELL_DEPTH);
            slope[k] = (bids[k + 1] - bids[k]) / h;
        }
        let mut tail = vec![0.0; cells + 1];
        for k in (0..cells).rev() {
            tail[k] = tail[k + 1] + slope[k] * cell_mass[k];
        }
        Self {
            buyer: i,
            x_star,
            cell_mass,
            cell_moment,
            tail,
            slope,
            boundary: 0.0,
        }
    }

    /// `t*` on the grid by the payment identity.
    pub fn payment_curve(&self, m: &PreparedMechanism) -> Vec<f64> {
        let bids = &m.buyer(self.buyer).bids;
        (0..bids.len())
            .map(|k| bids[k] * self.x_star[k] + self.tail[k] + self.boundary)
            .collect()
    }

    /// `t*(q)` at an arbitrary quantile by the payment identity.
    pub fn payment_at(&self, m: &PreparedMechanism, q: f64) -> f64 {
        let grid = m.grid();
        let (k, frac) = grid.locate(q);
        let x = interim_allocation(m, self.buyer, q);
        let partial = if frac == 0.0 {
            self.cell_mass[k]
        } else {
            let f = |s: f64| interim_allocation(m, self.buyer, s);
            adaptive_simpson(&f, q, grid.q(k + 1), cell_tol(1.0, grid.cells()), CELL_DEPTH)
        };
        m.bid_at(self.buyer, q) * x + self.slope[k] * partial + self.tail[k + 1] + self.boundary
    }

    /// `∫ t*` using `∫_cell C = h C(q_{k+1}) + slope_k ∫_cell (s - q_k) x*`.
    pub fn expected_payment(&self, m: &PreparedMechanism) -> f64 {
        let h = m.grid().step();
        let bids = &m.buyer(self.buyer).bids;
        let mut total = 0.0;
        for k in 0..self.cell_mass.len() {
            // ∫_cell v̂ x* with v̂ linear on the cell
            let vx = bids[k] * self.cell_mass[k] + self.slope[k] * self.cell_moment[k];
            let tail = h * self.tail[k + 1] + self.slope[k] * self.cell_moment[k];
            total += vx + tail;
        }
        total + self.boundary
    }

    /// `∫ x* w` per cell, summed, for a weight sampled on the grid
    /// (interpolated linearly inside cells).
    fn integrate_weighted<W: Fn(usize, f64) -> f64>(&self, m: &PreparedMechanism, scale: f64, w: W) -> f64 {
        let grid = *m.grid();
        let tol = cell_tol(scale, grid.cells());
        (0..grid.cells())
            .map(|k| {
                let f = |q: f64| interim_allocation(m, self.buyer, q) * w(k, q);
                adaptive_simpson(&f, grid.q(k), grid.q(k + 1), tol, CELL_DEPTH)
            })
            .sum()
    }
}

/// Linear interpolant of `values` on cell `k`.
fn on_cell(m: &PreparedMechanism, values: &[f64], k: usize, q: f64) -> f64 {
    let grid = m.grid();
    let t = (q - grid.q(k)) / grid.step();
    values[k] + t * (values[k + 1] - values[k])
}

/// Grid-sampled interim quantities of one buyer.
#[derive(Debug, Clone, Serialize)]
pub struct InterimProfile {
    pub buyer: usize,
    pub q: Vec<f64>,
    pub x_star: Vec<f64>,
    pub t_star: Vec<f64>,
    pub u_star: Vec<f64>,
}

pub fn interim_profile(m: &PreparedMechanism, i: usize, truth: &QuantileDistribution) -> Result<InterimProfile> {
    check_truth(m, truth)?;
    let bi = BuyerInterim::new(m, i);
    let t_star = bi.payment_curve(m);
    let u_star = bi
        .x_star
        .iter()
        .zip(truth.values())
        .zip(&t_star)
        .map(|((x, v), t)| x * v - t)
        .collect();
    Ok(InterimProfile {
        buyer: i,
        q: m.grid().points().collect(),
        x_star: bi.x_star,
        t_star,
        u_star,
    })
}

fn check_truth(m: &PreparedMechanism, truth: &QuantileDistribution) -> Result<()> {
    if truth.grid().n_points() != m.grid().n_points() {
        return Err(Error::GridMismatch(m.grid().n_points(), truth.grid().n_points()));
    }
    Ok(())
}

/// Direct interim payment: the ex-post payment averaged over opponents
/// (and the reserve draw). Quadrature for two buyers, Monte Carlo otherwise.
pub fn interim_payment_direct(m: &PreparedMechanism, i: usize, q: f64, mc: &McConfig) -> Result<f64> {
    if m.n() != 2 {
        return Ok(monte_carlo_interim(m, i, q, mc)?.payment);
    }
    let j = 1 - i;
    let grid = *m.grid();
    let b = m.bid_at(i, q);
    let s = m.score_at(i, q);
    let opp_breaks = |qr: Option<f64>| {
        let mut br: Vec<f64> = grid.points().collect();
        let t = m.buyer(j);
        for level in [s - m.score_tol(), s + m.score_tol()] {
            br.push(sup_where_gt(&grid, &t.scores, level));
            br.push(sup_where_ge(&grid, &t.scores, level));
        }
        // the threshold bid inverts i's score table, so it kinks where j's
        // score crosses one of i's grid levels
        for &level in &m.buyer(i).scores {
            br.push(sup_where_gt(&grid, &t.scores, level));
        }
        for z in [m.floor(i, qr), m.floor(j, qr), *m.buyer(i).bids.last().unwrap()] {
            if z.is_finite() {
                br.push(m.quantile_of_bid(j, z));
                br.push(sup_where_ge(&grid, &t.bids, z));
            }
        }
        br
    };
    let inner = |qr: Option<f64>| -> f64 {
        let f = |qj: f64| {
            let mut bids = [0.0; 2];
            bids[i] = b;
            bids[j] = m.bid_at(j, qj);
            m.payments_threshold(&bids, qr).map(|t| t[i]).unwrap_or(0.0)
        };
        piecewise_gl4(&f, 0.0, 1.0, &opp_breaks(qr), 1)
    };
    if m.family().needs_reserve_draw() {
        let outer = |qr: f64| inner(Some(qr));
        let mut breaks = draw_breaks(m, i, q);
        breaks.extend(grid.points().step_by((grid.cells() / 32).max(1)));
        Ok(piecewise_gl4(&outer, 0.0, 1.0, &breaks, 1))
    } else {
        Ok(inner(None))
    }
}

/// Utility of buyer `i` in the induced game, by two bookkeeping routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityReport {
    /// `∫ x* (v - r̂) + v̂(1) x*(1) - t*(1)`.
    pub virtual_form: f64,
    /// `∫ (x* v - t*)`.
    pub direct: f64,
}

fn utility_from(bi: &BuyerInterim, m: &PreparedMechanism, truth: &QuantileDistribution) -> UtilityReport {
    let bids = &m.buyer(bi.buyer).bids;
    let v = truth.values();
    let scale = truth.scale().abs().max(bids[0].abs());
    let virtual_form = bi.integrate_weighted(m, scale, |k, q| {
        let fake_virtual = on_cell(m, bids, k, q) + q * bi.slope[k];
        on_cell(m, v, k, q) - fake_virtual
    }) - bi.boundary;
    let value = bi.integrate_weighted(m, scale, |k, q| on_cell(m, v, k, q));
    UtilityReport {
        virtual_form,
        direct: value - bi.expected_payment(m),
    }
}

pub fn game_utility(m: &PreparedMechanism, truth: &QuantileDistribution, i: usize) -> Result<UtilityReport> {
    check_truth(m, truth)?;
    if i >= m.n() {
        return Err(Error::BuyerIndex(i));
    }
    Ok(utility_from(&BuyerInterim::new(m, i), m, truth))
}

/// Seller revenue by the virtual-value form and by summing expected payments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RevenueReport {
    pub virtual_form: f64,
    pub payments: f64,
}

fn revenue_from(parts: &[BuyerInterim], m: &PreparedMechanism) -> RevenueReport {
    let mut virtual_form = 0.0;
    let mut payments = 0.0;
    for bi in parts {
        let bids = &m.buyer(bi.buyer).bids;
        virtual_form += bi.integrate_weighted(m, bids[0].abs(), |k, q| {
            on_cell(m, bids, k, q) + q * bi.slope[k]
        }) + bi.boundary;
        payments += bi.expected_payment(m);
    }
    RevenueReport {
        virtual_form,
        payments,
    }
}

pub fn revenue(m: &PreparedMechanism) -> RevenueReport {
    let parts: Vec<BuyerInterim> = (0..m.n()).map(|i| BuyerInterim::new(m, i)).collect();
    revenue_from(&parts, m)
}

/// Expected true value of the winner.
pub fn social_welfare(m: &PreparedMechanism, truths: &[QuantileDistribution]) -> Result<f64> {
    check_truths(m, truths)?;
    Ok((0..m.n())
        .map(|i| {
            let bi = BuyerInterim::new(m, i);
            let v = truths[i].values();
            bi.integrate_weighted(m, truths[i].scale().abs(), |k, q| on_cell(m, v, k, q))
        })
        .sum())
}

fn check_truths(m: &PreparedMechanism, truths: &[QuantileDistribution]) -> Result<()> {
    if truths.len() != m.n() {
        return Err(Error::InvalidParameters(format!(
            "{} true distributions for {} buyers",
            truths.len(),
            m.n()
        )));
    }
    truths.iter().try_for_each(|t| check_truth(m, t))
}

/// Everything the quadrature backend reports for one profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureSummary {
    pub revenue: RevenueReport,
    pub welfare: f64,
    pub utilities: Vec<UtilityReport>,
}

pub fn quadrature_summary(m: &PreparedMechanism, truths: &[QuantileDistribution]) -> Result<QuadratureSummary> {
    check_truths(m, truths)?;
    let parts: Vec<BuyerInterim> = (0..m.n()).map(|i| BuyerInterim::new(m, i)).collect();
    let utilities = parts.iter().map(|bi| utility_from(bi, m, &truths[bi.buyer])).collect();
    let welfare = parts
        .iter()
        .map(|bi| {
            let v = truths[bi.buyer].values();
            bi.integrate_weighted(m, truths[bi.buyer].scale().abs(), |k, q| on_cell(m, v, k, q))
        })
        .sum();
    Ok(QuadratureSummary {
        revenue: revenue_from(&parts, m),
        welfare,
        utilities,
    })
}

/// Identity vs. permuted quantile mappings for one buyer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingReport {
    pub identity: f64,
    pub best_alternative: f64,
    pub reversal: f64,
    pub trials: usize,
    pub identity_is_best: bool,
}

/// Compares `∫ x*(q) v(φ^{-1}(q))` for random cell permutations against the
/// identity. Payments do not depend on the mapping, so only this term moves.
pub fn verify_identity_mapping(
    m: &PreparedMechanism,
    truth: &QuantileDistribution,
    i: usize,
    trials: usize,
    seed: u64,
) -> Result<MappingReport> {
    check_truth(m, truth)?;
    if trials == 0 {
        return Err(Error::InvalidParameters("trials must be positive".into()));
    }
    let grid = *m.grid();
    let h = grid.step();
    let mids: Vec<f64> = (0..grid.cells()).map(|k| grid.q(k) + 0.5 * h).collect();
    let x: Vec<f64> = mids.iter().map(|&q| interim_allocation(m, i, q)).collect();
    let v: Vec<f64> = mids.iter().map(|&q| truth.value_at(q)).collect();
    let pair = |perm: &[usize]| -> f64 { h * perm.iter().enumerate().map(|(k, &p)| x[p] * v[k]).sum::<f64>() };
    let ident: Vec<usize> = (0..mids.len()).collect();
    let identity = pair(&ident);
    let reversed: Vec<usize> = ident.iter().rev().copied().collect();
    let reversal = pair(&reversed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    let mut perm = ident.clone();
    for _ in 0..trials {
        perm.shuffle(&mut rng);
        best = best.max(pair(&perm));
    }
    let slack = 1e-12 * truth.scale().abs().max(1.0);
    Ok(MappingReport {
        identity,
        best_alternative: best,
        reversal,
        trials,
        identity_is_best: best <= identity + slack && reversal <= identity + slack,
    })
}
