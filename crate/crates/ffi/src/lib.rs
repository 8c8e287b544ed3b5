//! C ABI over the `fakeprior` library.
//!
//! Every fallible function returns an [`FpStatus`] and writes results through
//! out-pointers. On failure a message is kept per thread and can be copied out
//! with [`fp_last_error`]. Handles are opaque and must be released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fakeprior::interim::{game_utility, interim_allocation, quadrature_summary};
use fakeprior::mechanism::PreparedMechanism;
use fakeprior::report::{run_scenario, ScenarioConfig};
use fakeprior::{ClosedForm, Error, FakeProfile, MechanismFamily, QuantileDistribution, QuantileGrid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonMonotone = 3,
    GridMismatch = 4,
    Unsupported = 5,
    NoRoot = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// Opaque quantile-space distribution.
pub struct FpDistribution(QuantileDistribution);

/// Opaque reported profile (two or more buyers on one grid).
pub struct FpProfile(FakeProfile);

/// Opaque mechanism prepared for a reported profile.
pub struct FpMechanism(PreparedMechanism);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> FpStatus {
    match e {
        Error::NonMonotone { .. } => FpStatus::NonMonotone,
        Error::GridMismatch(..) => FpStatus::GridMismatch,
        Error::Unsupported(_) => FpStatus::Unsupported,
        Error::NoRoot(_) => FpStatus::NoRoot,
        Error::Io(_) => FpStatus::Io,
        _ => FpStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (FpStatus, String)>>(f: F) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside fakeprior".into());
            FpStatus::Internal
        }
    }
}

fn lib(e: Error) -> (FpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FpStatus, String) {
    (FpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (FpStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FpStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (FpStatus::InvalidArgument, format!("{what}: {e}")))
}

unsafe fn as_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (FpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), (FpStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a closed-form distribution (`uniform`, `equal_revenue`, `affine`,
/// `constant`) on a grid of `n_points`.
///
/// # Safety
/// `name` must be a NUL-terminated string, `params` must hold `n_params`
/// doubles, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_distribution_closed_form(
    name: *const c_char,
    params: *const f64,
    n_params: usize,
    n_points: usize,
    out: *mut *mut FpDistribution,
) -> FpStatus {
    guard(|| {
        let name = as_str(name, "name")?;
        let params = as_slice(params, n_params, "params")?;
        let grid = QuantileGrid::new(n_points).map_err(lib)?;
        let form = ClosedForm::parse(name, params).map_err(lib)?;
        let d = QuantileDistribution::from_closed_form(form, grid).map_err(lib)?;
        put(out, Box::into_raw(Box::new(FpDistribution(d))), "out")
    })
}

/// Builds a distribution from `len` weakly decreasing values on the uniform grid.
///
/// # Safety
/// `values` must hold `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_distribution_from_values(
    values: *const f64,
    len: usize,
    out: *mut *mut FpDistribution,
) -> FpStatus {
    guard(|| {
        let values = as_slice(values, len, "values")?.to_vec();
        let grid = QuantileGrid::new(len).map_err(lib)?;
        let d = QuantileDistribution::from_values(grid, values).map_err(lib)?;
        put(out, Box::into_raw(Box::new(FpDistribution(d))), "out")
    })
}

/// # Safety
/// `d` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn fp_distribution_free(d: *mut FpDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_distribution_len(d: *const FpDistribution) -> usize {
    d.as_ref().map_or(0, |d| d.0.grid().n_points())
}

/// Copies the grid values into `buf`, which must hold exactly `len` doubles.
///
/// # Safety
/// `d` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fp_distribution_values(d: *const FpDistribution, buf: *mut f64, len: usize) -> FpStatus {
    guard(|| {
        let d = as_ref(d, "distribution")?;
        let vals = d.0.values();
        if len != vals.len() {
            return Err((FpStatus::InvalidArgument, format!("buffer holds {len}, need {}", vals.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(vals.as_ptr(), buf, len);
        Ok(())
    })
}

/// Monopoly reserve of a distribution: quantile, price and revenue.
///
/// # Safety
/// `d` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_distribution_reserve(
    d: *const FpDistribution,
    quantile: *mut f64,
    price: *mut f64,
    revenue: *mut f64,
) -> FpStatus {
    guard(|| {
        let r = as_ref(d, "distribution")?.0.reserve_quantile();
        put(quantile, r.quantile, "quantile")?;
        put(price, r.price, "price")?;
        put(revenue, r.revenue, "revenue")
    })
}

/// Collects `n` reported distributions into a profile. The inputs are copied.
///
/// # Safety
/// `reports` must hold `n` live distribution handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_profile_new(
    reports: *const *const FpDistribution,
    n: usize,
    out: *mut *mut FpProfile,
) -> FpStatus {
    guard(|| {
        let handles = as_slice(reports, n, "reports")?;
        let mut dists = Vec::with_capacity(n);
        for &h in handles {
            dists.push(as_ref(h, "report")?.0.clone());
        }
        let p = FakeProfile::new(dists).map_err(lib)?;
        put(out, Box::into_raw(Box::new(FpProfile(p))), "out")
    })
}

/// # Safety
/// `p` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn fp_profile_free(p: *mut FpProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Prepares a mechanism. `family` is either a bare kind (`spa`, `myerson`,
/// `spamr`, `sparqr`, `quantile_reserve`) or the JSON form, e.g.
/// `{"kind":"virtual_efficient","params":{"rule":{"rule":"bid"}}}`.
///
/// # Safety
/// `family` must be a NUL-terminated string, `profile` a live handle and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_mechanism_new(
    family: *const c_char,
    profile: *const FpProfile,
    out: *mut *mut FpMechanism,
) -> FpStatus {
    guard(|| {
        let spec = as_str(family, "family")?.trim();
        let json = if spec.starts_with('{') {
            spec.to_string()
        } else {
            serde_json::json!({ "kind": spec }).to_string()
        };
        let family = MechanismFamily::from_json(&json).map_err(lib)?;
        let profile = as_ref(profile, "profile")?;
        let m = PreparedMechanism::new(&family, &profile.0).map_err(lib)?;
        put(out, Box::into_raw(Box::new(FpMechanism(m))), "out")
    })
}

/// # Safety
/// `m` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn fp_mechanism_free(m: *mut FpMechanism) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of buyers, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_mechanism_buyers(m: *const FpMechanism) -> usize {
    m.as_ref().map_or(0, |m| m.0.n())
}

/// Ex-post allocation and payments at own quantiles `quantiles[0..n]`.
/// Pass a NaN `reserve_draw` for families without a random reserve.
///
/// # Safety
/// `m` must be a live handle; `quantiles`, `allocation` and `payments` must
/// each hold `n` doubles, `n` equal to the number of buyers.
#[no_mangle]
pub unsafe extern "C" fn fp_mechanism_outcome(
    m: *const FpMechanism,
    quantiles: *const f64,
    n: usize,
    reserve_draw: f64,
    allocation: *mut f64,
    payments: *mut f64,
) -> FpStatus {
    guard(|| {
        let m = &as_ref(m, "mechanism")?.0;
        if n != m.n() {
            return Err((FpStatus::InvalidArgument, format!("{n} quantiles for {} buyers", m.n())));
        }
        let q = as_slice(quantiles, n, "quantiles")?;
        let draw = (!reserve_draw.is_nan()).then_some(reserve_draw);
        let o = m.outcome(q, draw).map_err(lib)?;
        if allocation.is_null() || payments.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(o.allocation.as_ptr(), allocation, n);
        ptr::copy_nonoverlapping(o.payments.as_ptr(), payments, n);
        Ok(())
    })
}

/// Interim allocation `x_i*(q)`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_interim_allocation(m: *const FpMechanism, buyer: usize, q: f64, out: *mut f64) -> FpStatus {
    guard(|| {
        let m = &as_ref(m, "mechanism")?.0;
        if buyer >= m.n() {
            return Err(lib(Error::BuyerIndex(buyer)));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err((FpStatus::InvalidArgument, format!("quantile {q} outside [0, 1]")));
        }
        put(out, interim_allocation(m, buyer, q), "out")
    })
}

/// Expected utility of `buyer` whose true distribution is `truth`.
///
/// # Safety
/// `m` and `truth` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_game_utility(
    m: *const FpMechanism,
    truth: *const FpDistribution,
    buyer: usize,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let m = &as_ref(m, "mechanism")?.0;
        let truth = &as_ref(truth, "truth")?.0;
        put(out, game_utility(m, truth, buyer).map_err(lib)?.virtual_form, "out")
    })
}

/// Expected revenue and welfare with true distributions `truths[0..n]`.
///
/// # Safety
/// `m` must be a live handle, `truths` must hold `n` live handles and the
/// out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_revenue_welfare(
    m: *const FpMechanism,
    truths: *const *const FpDistribution,
    n: usize,
    revenue: *mut f64,
    welfare: *mut f64,
) -> FpStatus {
    guard(|| {
        let m = &as_ref(m, "mechanism")?.0;
        let mut ts = Vec::with_capacity(n);
        for &h in as_slice(truths, n, "truths")? {
            ts.push(as_ref(h, "truth")?.0.clone());
        }
        let s = quadrature_summary(m, &ts).map_err(lib)?;
        put(revenue, s.revenue.virtual_form, "revenue")?;
        put(welfare, s.welfare, "welfare")
    })
}

/// Runs a named scenario with default settings on `n_points`; writes 1 to
/// `passed` if all its checks pass and 0 otherwise. Nothing is written to disk.
///
/// # Safety
/// `name` must be a NUL-terminated string and `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_scenario_run(name: *const c_char, n_points: usize, passed: *mut i32) -> FpStatus {
    guard(|| {
        let name = as_str(name, "name")?;
        let cfg = ScenarioConfig {
            n_points,
            ..ScenarioConfig::default()
        };
        let o = run_scenario(name, &cfg).map_err(lib)?;
        put(passed, i32::from(o.passed), "passed")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn uniform(n_points: usize) -> *mut FpDistribution {
        let name = CString::new("uniform").unwrap();
        let p = [0.0, 1.0];
        let mut d = ptr::null_mut();
        let s = unsafe { fp_distribution_closed_form(name.as_ptr(), p.as_ptr(), 2, n_points, &mut d) };
        assert_eq!(s, FpStatus::Ok);
        d
    }

    fn last_error() -> String {
        let mut buf = [0 as c_char; 256];
        unsafe { fp_last_error(buf.as_mut_ptr(), buf.len()) };
        unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn spa_round_trip() {
        unsafe {
            let d = uniform(129);
            assert_eq!(fp_distribution_len(d), 129);
            let (mut q, mut p, mut r) = (0.0, 0.0, 0.0);
            assert_eq!(fp_distribution_reserve(d, &mut q, &mut p, &mut r), FpStatus::Ok);
            assert!((q - 0.5).abs() < 1e-12 && (r - 0.25).abs() < 1e-12);

            let hs = [d as *const FpDistribution, d as *const FpDistribution];
            let mut prof = ptr::null_mut();
            assert_eq!(fp_profile_new(hs.as_ptr(), 2, &mut prof), FpStatus::Ok);
            let fam = CString::new("spa").unwrap();
            let mut m = ptr::null_mut();
            assert_eq!(fp_mechanism_new(fam.as_ptr(), prof, &mut m), FpStatus::Ok);
            assert_eq!(fp_mechanism_buyers(m), 2);

            let mut x = 0.0;
            assert_eq!(fp_interim_allocation(m, 0, 0.25, &mut x), FpStatus::Ok);
            assert!((x - 0.75).abs() < 1e-9);
            let (mut rev, mut sw) = (0.0, 0.0);
            assert_eq!(fp_revenue_welfare(m, hs.as_ptr(), 2, &mut rev, &mut sw), FpStatus::Ok);
            assert!((rev - 1.0 / 3.0).abs() < 1e-6 && (sw - 2.0 / 3.0).abs() < 1e-6);
            let mut u = 0.0;
            assert_eq!(fp_game_utility(m, d, 1, &mut u), FpStatus::Ok);
            assert!((u - 1.0 / 6.0).abs() < 1e-6);

            let qs = [0.2, 0.6];
            let (mut a, mut t) = ([0.0; 2], [0.0; 2]);
            let s = fp_mechanism_outcome(m, qs.as_ptr(), 2, f64::NAN, a.as_mut_ptr(), t.as_mut_ptr());
            assert_eq!(s, FpStatus::Ok);
            assert_eq!(a, [1.0, 0.0]);
            assert!((t[0] - 0.4).abs() < 1e-9 && t[1] == 0.0);

            fp_mechanism_free(m);
            fp_profile_free(prof);
            fp_distribution_free(d);
        }
    }

    #[test]
    fn errors_are_reported() {
        unsafe {
            let vals = [0.2, 0.5, 0.1];
            let mut d = ptr::null_mut();
            assert_eq!(fp_distribution_from_values(vals.as_ptr(), 3, &mut d), FpStatus::NonMonotone);
            assert!(d.is_null());
            assert!(last_error().contains("not monotone"));

            let mut x = 0.0;
            assert_eq!(fp_interim_allocation(ptr::null(), 0, 0.5, &mut x), FpStatus::NullPointer);

            let u = uniform(65);
            let hs = [u as *const FpDistribution, u as *const FpDistribution];
            let mut prof = ptr::null_mut();
            assert_eq!(fp_profile_new(hs.as_ptr(), 2, &mut prof), FpStatus::Ok);
            let fam = CString::new("sparqr").unwrap();
            let mut m = ptr::null_mut();
            assert_eq!(fp_mechanism_new(fam.as_ptr(), prof, &mut m), FpStatus::Ok);
            let qs = [0.2, 0.6];
            let (mut a, mut t) = ([0.0; 2], [0.0; 2]);
            let s = fp_mechanism_outcome(m, qs.as_ptr(), 2, f64::NAN, a.as_mut_ptr(), t.as_mut_ptr());
            assert_eq!(s, FpStatus::InvalidArgument);
            assert!(last_error().contains("reserve draw"));

            let bad = CString::new("{\"kind\":\"nope\"}").unwrap();
            let mut m2 = ptr::null_mut();
            assert_eq!(fp_mechanism_new(bad.as_ptr(), prof, &mut m2), FpStatus::InvalidArgument);

            let v = [0.5, 0.4, 0.3];
            let mut small = ptr::null_mut();
            assert_eq!(fp_distribution_from_values(v.as_ptr(), 3, &mut small), FpStatus::Ok);
            let mixed = [u as *const FpDistribution, small as *const FpDistribution];
            let mut p2 = ptr::null_mut();
            assert_eq!(fp_profile_new(mixed.as_ptr(), 2, &mut p2), FpStatus::GridMismatch);

            fp_distribution_free(small);
            fp_mechanism_free(m);
            fp_profile_free(prof);
            let (mut q, mut pr, mut r) = (0.0, 0.0, 0.0);
            assert_eq!(fp_distribution_reserve(u, &mut q, &mut pr, &mut r), FpStatus::Ok);
            assert_eq!(fp_last_error(ptr::null_mut(), 0), 0);
            fp_distribution_free(u);
        }
    }

    #[test]
    fn truncated_error_copy() {
        unsafe {
            let mut d = ptr::null_mut();
            fp_distribution_from_values(ptr::null(), 3, &mut d);
            let mut buf = [1 as c_char; 5];
            let full = fp_last_error(buf.as_mut_ptr(), buf.len());
            assert!(full > 4);
            assert_eq!(buf[4], 0);
        }
    }

    #[test]
    fn scenario_through_abi() {
        let name = CString::new("intro-epsilon").unwrap();
        let mut passed = -1;
        assert_eq!(unsafe { fp_scenario_run(name.as_ptr(), 257, &mut passed) }, FpStatus::Ok);
        assert_eq!(passed, 1);
        let bad = CString::new("missing").unwrap();
        assert_eq!(unsafe { fp_scenario_run(bad.as_ptr(), 257, &mut passed) }, FpStatus::InvalidArgument);
    }
}
