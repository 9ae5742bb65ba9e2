//! C ABI over `gmc-core`.
//!
//! Fits return an opaque [`GmcFit`] handle that owns the posterior draws;
//! release it with [`gmc_fit_free`]. Every function returns a
//! [`GmcStatus`]; on failure [`gmc_last_error`] describes the most recent
//! error on the calling thread.

use std::any::Any;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use gmc_core::mcmc::{ChainSet, SamplerConfig};
use gmc_core::priors::GmcHyper;
use gmc_core::regression::{
    fit_regression_conventional, fit_regression_gmc, predict_curve, CurveSelector, GmcRegressionSpec,
    RegressionDataset, Source,
};
use gmc_core::spline::{Partition, Spacing};
use gmc_core::survival::{fit_pwe_conventional, fit_pwe_gmc, median_survival, survival_curve, SurvivalDataset};
use gmc_core::GmcError;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid input data, configuration or hyperparameters.
    Validation = 2,
    /// Numerical or sampling failure.
    Runtime = 3,
    /// The fit handle does not support the request, e.g. a survival curve
    /// of a regression fit.
    WrongKind = 4,
    /// An output buffer is too small.
    BufferTooSmall = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

/// Sampler settings; see [`gmc_sampler_regression_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmcSampler {
    pub chains: usize,
    pub burn_in: usize,
    pub iterations: usize,
    pub thin: usize,
    pub seed: u64,
}

impl From<GmcSampler> for SamplerConfig {
    fn from(s: GmcSampler) -> Self {
        SamplerConfig {
            chains: s.chains,
            burn_in: s.burn_in,
            iterations: s.iterations,
            thin: s.thin,
            seed: s.seed,
        }
    }
}

impl From<SamplerConfig> for GmcSampler {
    fn from(s: SamplerConfig) -> Self {
        GmcSampler {
            chains: s.chains,
            burn_in: s.burn_in,
            iterations: s.iterations,
            thin: s.thin,
            seed: s.seed,
        }
    }
}

/// Two-source regression hyperparameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmcRegressionHyper {
    pub s_l: f64,
    pub s_u: f64,
    pub r: f64,
    pub p0: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Curve of a regression fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmcCurve {
    Primary = 0,
    Supplemental = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Regression,
    RegressionGmc,
    Survival,
    SurvivalGmc,
}

/// Posterior draws of one fit.
pub struct GmcFit {
    kind: Kind,
    partition: Partition,
    chains: ChainSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(GmcStatus, String);

impl From<GmcError> for Failure {
    fn from(e: GmcError) -> Self {
        let status = if e.is_validation() {
            GmcStatus::Validation
        } else {
            GmcStatus::Runtime
        };
        Failure(status, e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn panic_message(p: Box<dyn Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

fn guard(f: impl FnOnce() -> Outcome<()>) -> GmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GmcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            set_error(format!("panic: {}", panic_message(p)));
            GmcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GmcStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` must be null or valid for `n` reads.
unsafe fn view<'a, T>(p: *const T, n: usize, what: &str) -> Outcome<&'a [T]> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or valid for `n` writes.
unsafe fn view_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Outcome<&'a mut [T]> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn fit_ref<'a>(fit: *const GmcFit) -> Outcome<&'a GmcFit> {
    fit.as_ref().ok_or_else(|| null("fit"))
}

unsafe fn sampler(cfg: *const GmcSampler) -> Outcome<SamplerConfig> {
    cfg.as_ref().map(|c| (*c).into()).ok_or_else(|| null("sampler"))
}

unsafe fn publish(out: *mut *mut GmcFit, fit: GmcFit) -> Outcome<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(fit));
    Ok(())
}

unsafe fn regression_data(y: *const f64, t: *const f64, n: usize, source: Source) -> Outcome<RegressionDataset> {
    let y = view(y, n, "y")?.to_vec();
    let t = view(t, n, "t")?.to_vec();
    Ok(RegressionDataset::single(y, t, source)?)
}

unsafe fn survival_data(time: *const f64, event: *const u8, n: usize, source: Source) -> Outcome<SurvivalDataset> {
    let time = view(time, n, "time")?.to_vec();
    let event = view(event, n, "event")?.iter().map(|&e| e != 0).collect();
    Ok(SurvivalDataset::single(time, event, source)?)
}

/// NUL-terminated description of the last error on this thread; empty when
/// none. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// 2 chains, 1000 burn-in, 5000 kept.
#[no_mangle]
pub extern "C" fn gmc_sampler_regression_default(seed: u64) -> GmcSampler {
    SamplerConfig::regression_default(seed).into()
}

/// 2 chains, 2000 burn-in, 10,000 kept.
#[no_mangle]
pub extern "C" fn gmc_sampler_survival_default(seed: u64) -> GmcSampler {
    SamplerConfig::survival_default(seed).into()
}

#[no_mangle]
pub extern "C" fn gmc_regression_hyper_default() -> GmcRegressionHyper {
    let d = GmcRegressionSpec::simulation_default(Partition::equal(2).expect("two intervals"));
    GmcRegressionHyper {
        s_l: d.intercept_hyper.s_l,
        s_u: d.intercept_hyper.s_u,
        r: d.curve_hyper.r,
        p0: d.intercept_hyper.p0,
        a1: d.curve_hyper.a1,
        a2: d.curve_hyper.a2,
    }
}

/// Conventional spline fit of `(y, t)` with `intervals` equal-width
/// intervals on `[0, 1]`.
///
/// # Safety
/// `y` and `t` must point to `n` doubles, `sampler` to a `GmcSampler` and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_regression(
    y: *const f64,
    t: *const f64,
    n: usize,
    intervals: usize,
    sampler_cfg: *const GmcSampler,
    out: *mut *mut GmcFit,
) -> GmcStatus {
    guard(|| {
        let data = regression_data(y, t, n, Source::Primary)?;
        let partition = Partition::equal(intervals)?;
        let chains = fit_regression_conventional(&data, &partition, &sampler(sampler_cfg)?)?;
        publish(
            out,
            GmcFit {
                kind: Kind::Regression,
                partition,
                chains,
            },
        )
    })
}

/// Two-source GMC spline fit. `hyper` may be null for the defaults.
///
/// # Safety
/// Array arguments must point to `n` or `n0` doubles; see
/// [`gmc_fit_regression`].
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_regression_gmc(
    y: *const f64,
    t: *const f64,
    n: usize,
    y0: *const f64,
    t0: *const f64,
    n0: usize,
    intervals: usize,
    hyper: *const GmcRegressionHyper,
    sampler_cfg: *const GmcSampler,
    out: *mut *mut GmcFit,
) -> GmcStatus {
    guard(|| {
        let primary = regression_data(y, t, n, Source::Primary)?;
        let supplemental = regression_data(y0, t0, n0, Source::Supplemental)?;
        let partition = gmc_core::spline::build_partition(intervals, Spacing::Equal, &primary.t)?;
        let mut spec = GmcRegressionSpec::simulation_default(partition.clone());
        if let Some(h) = hyper.as_ref() {
            spec.curve_hyper = GmcHyper::new(h.r, h.a1, h.a2)?;
            spec.intercept_hyper = gmc_core::priors::CommensurateHyper::new(h.s_l, h.s_u, h.r, h.p0)?;
        }
        let chains = fit_regression_gmc(&primary, &supplemental, &spec, &sampler(sampler_cfg)?)?;
        publish(
            out,
            GmcFit {
                kind: Kind::RegressionGmc,
                partition,
                chains,
            },
        )
    })
}

/// Conventional piecewise-exponential fit. Times are on the rescaled axis
/// `(0, 1]`; `event` holds 0 or 1.
///
/// # Safety
/// `time` and `event` must point to `n` elements; see
/// [`gmc_fit_regression`].
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_survival(
    time: *const f64,
    event: *const u8,
    n: usize,
    intervals: usize,
    sampler_cfg: *const GmcSampler,
    out: *mut *mut GmcFit,
) -> GmcStatus {
    guard(|| {
        let data = survival_data(time, event, n, Source::Primary)?;
        let partition = Partition::hazard_equal(intervals)?;
        let chains = fit_pwe_conventional(&data, &partition, &sampler(sampler_cfg)?)?;
        publish(
            out,
            GmcFit {
                kind: Kind::Survival,
                partition,
                chains,
            },
        )
    })
}

/// Two-source GMC piecewise-exponential fit with spike precision `r_gamma`
/// and `nu_gamma ~ Beta(a1, a2)`.
///
/// # Safety
/// Array arguments must point to `n` or `n0` elements; see
/// [`gmc_fit_regression`].
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_survival_gmc(
    time: *const f64,
    event: *const u8,
    n: usize,
    time0: *const f64,
    event0: *const u8,
    n0: usize,
    intervals: usize,
    r_gamma: f64,
    a1: f64,
    a2: f64,
    sampler_cfg: *const GmcSampler,
    out: *mut *mut GmcFit,
) -> GmcStatus {
    guard(|| {
        let primary = survival_data(time, event, n, Source::Primary)?;
        let supplemental = survival_data(time0, event0, n0, Source::Supplemental)?;
        let partition = Partition::hazard_equal(intervals)?;
        let hyper = GmcHyper::new(r_gamma, a1, a2)?;
        let chains = fit_pwe_gmc(&primary, &supplemental, &hyper, &partition, &sampler(sampler_cfg)?)?;
        publish(
            out,
            GmcFit {
                kind: Kind::SurvivalGmc,
                partition,
                chains,
            },
        )
    })
}

/// Releases a fit. Null is ignored.
///
/// # Safety
/// `fit` must come from a `gmc_fit_*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_free(fit: *mut GmcFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of sampled parameters.
///
/// # Safety
/// `fit` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_n_params(fit: *const GmcFit, out: *mut usize) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        *out.as_mut().ok_or_else(|| null("out"))? = f.chains.n_params();
        Ok(())
    })
}

/// Stored draws per parameter, pooled over chains.
///
/// # Safety
/// `fit` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_n_draws(fit: *const GmcFit, out: *mut usize) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        *out.as_mut().ok_or_else(|| null("out"))? = f.chains.n_chains() * f.chains.n_stored();
        Ok(())
    })
}

/// Copies the NUL-terminated name of parameter `index` into `buf`. With
/// `len` too small (or `buf` null) returns `BufferTooSmall`; `needed`, if
/// non-null, always receives the required size including the NUL.
///
/// # Safety
/// `buf` must be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_param_name(
    fit: *const GmcFit,
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        let name = f.chains.names().get(index).ok_or_else(|| {
            Failure(GmcStatus::Validation, format!("parameter index {index} out of range"))
        })?;
        let bytes = name.as_bytes();
        if let Some(n) = needed.as_mut() {
            *n = bytes.len() + 1;
        }
        if buf.is_null() || len < bytes.len() + 1 {
            return Err(Failure(GmcStatus::BufferTooSmall, format!("need {} bytes", bytes.len() + 1)));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len());
        *buf.add(bytes.len()) = 0;
        Ok(())
    })
}

/// Index of the parameter called `name`.
///
/// # Safety
/// `name` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_param_index(fit: *const GmcFit, name: *const c_char, out: *mut usize) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Failure(GmcStatus::Validation, "name is not UTF-8".into()))?;
        let idx = f
            .chains
            .index_of(name)
            .ok_or_else(|| Failure(GmcStatus::Validation, format!("no parameter `{name}`")))?;
        *out.as_mut().ok_or_else(|| null("out"))? = idx;
        Ok(())
    })
}

/// Pooled draws of parameter `index` (chain by chain) into `buf[0..len]`;
/// `len` must equal [`gmc_fit_n_draws`].
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_draws(fit: *const GmcFit, index: usize, buf: *mut f64, len: usize) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if index >= f.chains.n_params() {
            return Err(Failure(GmcStatus::Validation, format!("parameter index {index} out of range")));
        }
        let draws = f.chains.pooled(index);
        if len != draws.len() {
            return Err(Failure(
                GmcStatus::BufferTooSmall,
                format!("buffer holds {len} values, fit has {}", draws.len()),
            ));
        }
        view_mut(buf, len, "buf")?.copy_from_slice(&draws);
        Ok(())
    })
}

/// Posterior mean of parameter `index`.
///
/// # Safety
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_posterior_mean(fit: *const GmcFit, index: usize, out: *mut f64) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if index >= f.chains.n_params() {
            return Err(Failure(GmcStatus::Validation, format!("parameter index {index} out of range")));
        }
        let d = f.chains.pooled(index);
        *out.as_mut().ok_or_else(|| null("out"))? = d.iter().sum::<f64>() / d.len() as f64;
        Ok(())
    })
}

/// Posterior mean and equal-tailed `level` interval of a regression curve
/// on `grid[0..m]`.
///
/// # Safety
/// `grid`, `mean`, `lower` and `upper` must be valid for `m` elements.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_curve(
    fit: *const GmcFit,
    curve: GmcCurve,
    grid: *const f64,
    m: usize,
    level: f64,
    mean: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        let which = match (f.kind, curve) {
            (Kind::Regression | Kind::RegressionGmc, GmcCurve::Primary) => CurveSelector::Primary,
            (Kind::RegressionGmc, GmcCurve::Supplemental) => CurveSelector::Supplemental,
            _ => return Err(Failure(GmcStatus::WrongKind, "curve not available for this fit".into())),
        };
        let s = predict_curve(&f.chains, which, &f.partition, view(grid, m, "grid")?, level)?;
        view_mut(mean, m, "mean")?.copy_from_slice(&s.mean);
        view_mut(lower, m, "lower")?.copy_from_slice(&s.lower);
        view_mut(upper, m, "upper")?.copy_from_slice(&s.upper);
        Ok(())
    })
}

/// Survival curve of the primary source on the rescaled axis.
///
/// # Safety
/// `grid`, `mean`, `lower` and `upper` must be valid for `m` elements.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_survival_curve(
    fit: *const GmcFit,
    grid: *const f64,
    m: usize,
    level: f64,
    mean: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if !matches!(f.kind, Kind::Survival | Kind::SurvivalGmc) {
            return Err(Failure(GmcStatus::WrongKind, "not a survival fit".into()));
        }
        let s = survival_curve(&f.chains, &f.partition, &[], view(grid, m, "grid")?, level)?;
        view_mut(mean, m, "mean")?.copy_from_slice(&s.mean);
        view_mut(lower, m, "lower")?.copy_from_slice(&s.lower);
        view_mut(upper, m, "upper")?.copy_from_slice(&s.upper);
        Ok(())
    })
}

/// Posterior median survival in days over a `horizon`-day follow-up.
/// `out` receives `(median, lower, upper)`.
///
/// # Safety
/// `out` must be valid for 3 writes.
#[no_mangle]
pub unsafe extern "C" fn gmc_fit_median_survival(
    fit: *const GmcFit,
    horizon: f64,
    level: f64,
    out: *mut f64,
) -> GmcStatus {
    guard(|| {
        let f = fit_ref(fit)?;
        if !matches!(f.kind, Kind::Survival | Kind::SurvivalGmc) {
            return Err(Failure(GmcStatus::WrongKind, "not a survival fit".into()));
        }
        let m = median_survival(&f.chains, &f.partition, &[], horizon, level)?;
        view_mut(out, 3, "out")?.copy_from_slice(&[m.median_days, m.lower, m.upper]);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message() -> String {
        unsafe { CStr::from_ptr(gmc_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn panics_become_status_codes() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, GmcStatus::Panic);
        assert_eq!(message(), "panic: boom");
    }

    #[test]
    fn interior_nul_is_replaced() {
        set_error("a\0b");
        assert_eq!(message(), "a b");
    }

    #[test]
    fn validation_errors_map_to_validation() {
        let st = guard(|| Err(Partition::equal(0).unwrap_err().into()));
        assert_eq!(st, GmcStatus::Validation);
    }
}
