//! Quadrature, root finding and one-dimensional optimisation helpers.

use crate::error::{Error, Result};

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Four-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre4<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL4_NODES
        .iter()
        .zip(GL4_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Composite four-point Gauss-Legendre with `panels` equal panels.
pub fn composite_gl4<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + w * p as f64;
            let hi = if p + 1 == panels { b } else { lo + w };
            gauss_legendre4(f, lo, hi)
        })
        .sum()
}

/// Composite Gauss-Legendre over `[a, b]`, split at the given interior breakpoints.
pub fn piecewise_gl4<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    panels: usize,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .map(|w| composite_gl4(f, w[0], w[1], panels))
        .sum()
}

fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature. Handles isolated jumps by local refinement.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth)
}

/// Trapezoid rule for samples on a uniform grid of spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Bisection on a bracketing interval. `tol` bounds the final bracket width.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::NoRoot(format!(
            "no sign change on [{lo}, {hi}] (f = {flo}, {fhi})"
        )));
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// One classical Runge-Kutta step for `y' = f(t, y)`.
pub fn rk4_step<F: Fn(f64, f64) -> f64>(f: &F, t: f64, y: f64, dt: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
    let k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
    let k4 = f(t + dt, y + dt * k3);
    y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integral of a monotone step function on `[a, b]`. Intervals whose endpoint
/// values agree are treated as constant; jumps are resolved to width `resolution`.
pub fn monotone_step_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, resolution: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    step_rec(f, a, b, fa, fb, resolution.max(f64::EPSILON * b.abs().max(1.0)))
}

fn step_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64, res: f64) -> f64 {
    if fa == fb {
        return fa * (b - a);
    }
    if b - a <= res {
        return 0.5 * (fa + fb) * (b - a);
    }
    let m = 0.5 * (a + b);
    let fm = f(m);
    step_rec(f, a, m, fa, fm, res) + step_rec(f, m, b, fm, fb, res)
}

/// `%.12g`-style formatting used by every CSV writer.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" { "0".to_string() } else { s }
    } else {
        format!("{x:.11e}")
    }
}
