use serde::Serialize;

use super::BestResponseResult;
use crate::error::{Error, Result};
use crate::interim::{game_utility, interim_allocation};
use crate::mechanism::{FakeProfile, MechanismFamily, PreparedMechanism};
use crate::numeric::{adaptive_simpson, bisect, gauss_legendre4};
use crate::quantile::QuantileDistribution;

/// Breakpoints of the four-piece response with revenue-curve height `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpamrForm {
    pub r: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q_hat_star: f64,
}

fn revenue_at(v: &QuantileDistribution, q: f64) -> f64 {
    q * v.value_at(q)
}

/// Breakpoints for level `r` on a regular `v`.
pub fn spamr_form(v: &QuantileDistribution, r: f64) -> Result<SpamrForm> {
    let star = v.reserve_quantile();
    if !(r > 0.0) {
        return Err(Error::InvalidParameters(format!("revenue level {r} must be positive")));
    }
    if r > star.revenue * (1.0 + 1e-12) {
        return Err(Error::TargetAboveMonopoly {
            level: r,
            max: star.revenue,
        });
    }
    let tol = 1e-14;
    let f = |q: f64| revenue_at(v, q) - r;
    let (q1, q2) = if r >= star.revenue * (1.0 - 1e-12) {
        (star.quantile, star.quantile)
    } else {
        let q1 = bisect(f, 0.0, star.quantile, tol)?;
        let q2 = if f(1.0) >= 0.0 { 1.0 } else { bisect(f, star.quantile, 1.0, tol)? };
        (q1, q2)
    };
    let q3 = v.prob_at_least(r).max(q2);
    Ok(SpamrForm {
        r,
        q1,
        q2,
        q3,
        q_hat_star: 1.0,
    })
}

fn snap(q: f64, v: &QuantileDistribution) -> f64 {
    let g = v.grid();
    let k = (q * g.cells() as f64).round();
    if (q * g.cells() as f64 - k).abs() < 1e-7 {
        k / g.cells() as f64
    } else {
        q
    }
}

/// Four-piece report: `v` on `[0,q1)∪[q2,q3)`, `R/q` on `[q1,q2)`, `R` on `[q3,1]`.
pub fn spamr_piecewise_report(v: &QuantileDistribution, form: &SpamrForm) -> Result<QuantileDistribution> {
    let (q1, q2, q3) = (snap(form.q1, v), snap(form.q2, v), snap(form.q3, v));
    let r = form.r;
    QuantileDistribution::from_fn(*v.grid(), |q| {
        if q >= q3 {
            r
        } else if q >= q1 && q < q2 {
            r / q
        } else {
            v.value_at(q).max(r)
        }
    })
}

/// Utility of the four-piece report by its piecewise closed form
/// `∫_0^{q1} x(-q v') + ∫_{q1}^{q2} x v + ∫_{q2}^{q3} x(-q v') + ∫_{q3}^1 x (v - R)`.
pub fn spamr_form_utility(
    v: &QuantileDistribution,
    form: &SpamrForm,
    m: &PreparedMechanism,
    buyer: usize,
) -> f64 {
    let grid = *v.grid();
    let slope = |q: f64| {
        let (k, _) = grid.locate(q);
        (v.values()[k + 1] - v.values()[k]) / grid.step()
    };
    let x = |q: f64| interim_allocation(m, buyer, q);
    let piece = |a: f64, b: f64, w: &dyn Fn(f64) -> f64| -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut pts: Vec<f64> = grid.points().filter(|&q| q > a && q < b).collect();
        pts.insert(0, a);
        pts.push(b);
        pts.windows(2)
            .map(|s| {
                let f = |q: f64| x(q) * w(q);
                if s[1] - s[0] > 0.0 {
                    adaptive_simpson(&f, s[0], s[1], 1e-14, 30)
                } else {
                    0.0
                }
            })
            .sum()
    };
    let (q1, q2, q3) = (snap(form.q1, v), snap(form.q2, v), snap(form.q3, v));
    piece(0.0, q1, &|q| -q * slope(q))
        + piece(q1, q2, &|q| v.value_at(q))
        + piece(q2, q3, &|q| -q * slope(q))
        + piece(q3, 1.0, &|q| v.value_at(q) - form.r)
}

/// Four-piece response to `opponents` at revenue level `r`.
pub fn spamr_general_best_response(
    v: &QuantileDistribution,
    r: f64,
    opponents: &[QuantileDistribution],
) -> Result<(BestResponseResult, SpamrForm)> {
    let form = spamr_form(v, r)?;
    let fake = spamr_piecewise_report(v, &form)?;
    let mut reports = vec![fake.clone()];
    reports.extend_from_slice(opponents);
    let m = PreparedMechanism::new(&MechanismFamily::Spamr, &FakeProfile::new(reports)?)?;
    let closed = spamr_form_utility(v, &form, &m, 0);
    let lemma = game_utility(&m, v, 0)?.virtual_form;
    Ok((
        BestResponseResult {
            fake,
            virtual_curve: None,
            achieved_utility: closed,
            residuals: vec![closed - lemma],
            residual_max: (closed - lemma).abs(),
        },
        form,
    ))
}

/// `U(level R - ε) - U(level R)` against `n - 1` opponents playing the level-`R` response.
pub fn spamr_epsilon_undercut_gain(v: &QuantileDistribution, r: f64, n: usize, eps: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewBuyers(n));
    }
    let candidate = spamr_piecewise_report(v, &spamr_form(v, r)?)?;
    let opponents = vec![candidate; n - 1];
    let (at_r, _) = spamr_general_best_response(v, r, &opponents)?;
    if eps == 0.0 {
        return Ok(0.0);
    }
    let (below, _) = spamr_general_best_response(v, r - eps, &opponents)?;
    Ok(below.achieved_utility - at_r.achieved_utility)
}

/// Truthful below `q0`, equal revenue `q0 v(q0) / q` above.
pub fn spamr_regular_best_response(v: &QuantileDistribution, q0: f64) -> Result<QuantileDistribution> {
    if !(q0 > 0.0 && q0 <= 1.0) {
        return Err(Error::InvalidParameters(format!("q0 = {q0} outside (0, 1]")));
    }
    let q0 = snap(q0, v);
    let level = q0 * v.value_at(q0);
    QuantileDistribution::from_fn(*v.grid(), |q| if q < q0 { v.value_at(q) } else { level / q })
}

/// `(1-q0)^{n-1} - ∫_{q0}^1 (n-1)(1-q)^{n-2} q v(q) dq / (q0 v(q0))`.
pub fn incident_equation(v: &QuantileDistribution, n: usize, q0: f64) -> f64 {
    let grid = v.grid();
    let w = |q: f64| (n as f64 - 1.0) * (1.0 - q).powi(n as i32 - 2) * q * v.value_at(q);
    let (k0, _) = grid.locate(q0);
    let mut integral = gauss_legendre4(&w, q0, grid.q(k0 + 1).max(q0));
    for k in k0 + 1..grid.cells() {
        integral += gauss_legendre4(&w, grid.q(k), grid.q(k + 1));
    }
    (1.0 - q0).powi(n as i32 - 1) - integral / (q0 * v.value_at(q0))
}

/// Root of the incident-quantile equation on `(h, 1 - h)`, tolerance `1e-8`.
pub fn spamr_incident_quantile(v: &QuantileDistribution, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewBuyers(n));
    }
    let h = v.grid().step();
    let (lo, hi) = (h, 1.0 - h);
    let f = |q: f64| incident_equation(v, n, q);
    let scan = (0..=16).map(|k| f(lo + (hi - lo) * k as f64 / 16.0));
    if scan.fold(0.0f64, |m, x| m.max(x.abs())) < 1e-10 {
        return Err(Error::NoRoot("incident-quantile equation vanishes identically".into()));
    }
    bisect(f, lo, hi, 1e-8)
}

/// Best response over a scan of revenue levels (and the truthful report).
pub fn spamr_scan_best_response(
    v: &QuantileDistribution,
    opponents: &[QuantileDistribution],
    levels: usize,
) -> Result<BestResponseResult> {
    let star = v.reserve_quantile().revenue;
    let mut reports = vec![v.clone()];
    reports.extend_from_slice(opponents);
    let truthful = PreparedMechanism::new(&MechanismFamily::Spamr, &FakeProfile::new(reports)?)?;
    let mut best = BestResponseResult {
        fake: v.clone(),
        virtual_curve: None,
        achieved_utility: game_utility(&truthful, v, 0)?.virtual_form,
        residuals: vec![],
        residual_max: 0.0,
    };
    for j in 1..=levels {
        let r = star * j as f64 / levels as f64;
        let (cand, _) = spamr_general_best_response(v, r, opponents)?;
        if cand.achieved_utility > best.achieved_utility {
            best = cand;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::QuantileGrid;

    fn uni() -> QuantileDistribution {
        QuantileDistribution::uniform(0.0, 1.0, QuantileGrid::new(1025).unwrap()).unwrap()
    }

    #[test]
    fn form_breakpoints_uniform() {
        let v = uni();
        let f = spamr_form(&v, 3.0 / 16.0).unwrap();
        assert!((f.q1 - 0.25).abs() < 1e-12);
        assert!((f.q2 - 0.75).abs() < 1e-12);
        assert!((f.q3 - 13.0 / 16.0).abs() < 1e-12);
        let t = spamr_form(&v, 0.25).unwrap();
        assert!((t.q1 - 0.5).abs() < 1e-12 && (t.q2 - 0.5).abs() < 1e-12);
        assert!(spamr_form(&v, 0.3).is_err());
    }

    #[test]
    fn piecewise_revenue_curve_capped_at_level() {
        let v = uni();
        let f = spamr_form(&v, 3.0 / 16.0).unwrap();
        let d = spamr_piecewise_report(&v, &f).unwrap();
        let rev = d.revenue_curve().values;
        assert!(rev.iter().all(|&x| x <= 3.0 / 16.0 + 1e-12));
        assert!((rev.last().unwrap() - 3.0 / 16.0).abs() < 1e-15);
        assert_eq!(d.reserve_quantile().quantile, 1.0);
    }

    #[test]
    fn incident_quantile_uniform() {
        let v = uni();
        let q0 = spamr_incident_quantile(&v, 2).unwrap();
        assert!((q0 - 0.25).abs() < 1e-6, "{q0}");
        let er = QuantileDistribution::equal_revenue(1.0, QuantileGrid::new(257).unwrap()).unwrap();
        assert!(matches!(spamr_incident_quantile(&er, 2), Err(Error::NoRoot(_))));
    }

    #[test]
    fn regular_response_shape() {
        let v = uni();
        let d = spamr_regular_best_response(&v, 0.25).unwrap();
        assert!((d.value_at(0.5) - 3.0 / 8.0).abs() < 1e-12);
        assert!((d.value_at(0.1) - 0.9).abs() < 1e-12);
        assert!(d.is_regular());
        let t = spamr_regular_best_response(&v, 1.0).unwrap();
        assert!(t.sup_distance(&v) < 1e-12);
    }

    #[test]
    fn closed_form_utility_matches_lemma_form() {
        let v = uni();
        let opp = spamr_piecewise_report(&v, &spamr_form(&v, 3.0 / 16.0).unwrap()).unwrap();
        let (br, _) = spamr_general_best_response(&v, 3.0 / 16.0, &[opp]).unwrap();
        assert!(br.residual_max < 1e-6, "{}", br.residual_max);
    }
}
