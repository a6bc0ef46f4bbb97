//! C ABI for the pinch-uplink optimizer.
//!
//! Scenarios live behind an opaque [`PuScenario`] handle. Every fallible
//! function returns a [`PuStatus`]; on failure a description is available
//! from [`pu_last_error`] on the same thread. Powers are in watts, lengths in
//! metres and rates in nats per channel use.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pinch_uplink::channel::effective_channels;
use pinch_uplink::rates::sum_rate;
use pinch_uplink::scenario::sample_scenario;
use pinch_uplink::{
    optimize, optimize_baseline, BcdOptions, Error, GdOptions, Mode, PinchLayout, PositionObjectiveKind, SystemParams,
    UserSet,
};

pub const PU_MODE_SIC: u32 = 0;
pub const PU_MODE_NSIC: u32 = 1;

pub const PU_POSITION_TIGHT: u32 = 0;
pub const PU_POSITION_FROZEN: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    NotPositiveDefinite = 4,
    DimensionMismatch = 5,
    Panic = 6,
}

/// System parameters, mirroring the core `SystemParams`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuParams {
    pub carrier_hz: f64,
    pub n_eff: f64,
    /// Receiver noise power (W).
    pub noise_power: f64,
    /// Waveguide height (m).
    pub height: f64,
    pub half_x: f64,
    pub half_y: f64,
    /// Feed-point x-coordinate, negative (m).
    pub feed_x: f64,
}

impl From<PuParams> for SystemParams {
    fn from(p: PuParams) -> Self {
        SystemParams {
            carrier_hz: p.carrier_hz,
            n_eff: p.n_eff,
            noise_power: p.noise_power,
            height: p.height,
            half_x: p.half_x,
            half_y: p.half_y,
            feed_x: p.feed_x,
        }
    }
}

impl From<SystemParams> for PuParams {
    fn from(p: SystemParams) -> Self {
        PuParams {
            carrier_hz: p.carrier_hz,
            n_eff: p.n_eff,
            noise_power: p.noise_power,
            height: p.height,
            half_x: p.half_x,
            half_y: p.half_y,
            feed_x: p.feed_x,
        }
    }
}

/// Optimizer settings. `mode` is one of `PU_MODE_*`, `position_objective`
/// one of `PU_POSITION_*`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuOptions {
    pub mode: u32,
    pub tol: f64,
    pub max_iters: usize,
    pub gd_l0: f64,
    pub gd_lmin: f64,
    pub gd_shrink: f64,
    pub gd_max_sweeps: usize,
    pub position_objective: u32,
}

/// Outcome summary of one optimizer run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuRunInfo {
    /// Sum-rate (nats) at the returned layout and powers.
    pub rate_nats: f64,
    /// Sum-rate (nats) before the first pass.
    pub initial_rate_nats: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Users, their power budget and the current antenna layout.
pub struct PuScenario {
    params: SystemParams,
    users: UserSet,
    layout: PinchLayout,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(PuStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter(_) => PuStatus::InvalidArgument,
            Error::NotPositiveDefinite => PuStatus::NotPositiveDefinite,
            Error::DimensionMismatch { .. } => PuStatus::DimensionMismatch,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: PuStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            PuStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            PuStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass either null or a pointer to a live, aligned `T`.
    unsafe { p.as_ref() }.ok_or_else(|| fail(PuStatus::NullPointer, format!("`{name}` is null")))
}

fn input<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(fail(PuStatus::NullPointer, format!("`{name}` is null")));
    }
    // SAFETY: the caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

fn output<'a>(p: *mut f64, len: usize, need: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(fail(PuStatus::NullPointer, format!("`{name}` is null")));
    }
    if len < need {
        return Err(fail(
            PuStatus::BufferTooSmall,
            format!("`{name}` holds {len} values, {need} needed"),
        ));
    }
    // SAFETY: the caller guarantees `len` writable doubles at `p`.
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

fn mode_from(raw: u32) -> Result<Mode, Failure> {
    match raw {
        PU_MODE_SIC => Ok(Mode::Sic),
        PU_MODE_NSIC => Ok(Mode::Nsic),
        _ => Err(fail(PuStatus::InvalidArgument, format!("unknown mode {raw}"))),
    }
}

fn options_from(o: &PuOptions) -> Result<BcdOptions, Failure> {
    let position_objective = match o.position_objective {
        PU_POSITION_TIGHT => PositionObjectiveKind::TightSurrogate,
        PU_POSITION_FROZEN => PositionObjectiveKind::FrozenSurrogate,
        raw => {
            return Err(fail(
                PuStatus::InvalidArgument,
                format!("unknown position objective {raw}"),
            ))
        }
    };
    let opts = BcdOptions {
        mode: mode_from(o.mode)?,
        tol: o.tol,
        max_iters: o.max_iters,
        gd: GdOptions {
            l0: o.gd_l0,
            l_min: o.gd_lmin,
            shrink: o.gd_shrink,
            max_sweeps: o.gd_max_sweeps,
        },
        optimize_positions: true,
        position_objective,
    };
    opts.validate()?;
    Ok(opts)
}

fn store_scenario(out: *mut *mut PuScenario, scenario: PuScenario) -> Result<(), Failure> {
    scenario.params.validate()?;
    scenario.users.validate(&scenario.params)?;
    scenario.layout.validate(&scenario.params)?;
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(scenario)) };
    Ok(())
}

/// Default system parameters (28 GHz, -90 dBm noise, 30 m x 40 m region).
#[no_mangle]
pub extern "C" fn pu_params_default() -> PuParams {
    SystemParams::default().into()
}

/// Default optimizer settings for `mode`.
#[no_mangle]
pub extern "C" fn pu_options_default(mode: u32) -> PuOptions {
    let d = BcdOptions::default();
    PuOptions {
        mode,
        tol: d.tol,
        max_iters: d.max_iters,
        gd_l0: d.gd.l0,
        gd_lmin: d.gd.l_min,
        gd_shrink: d.gd.shrink,
        gd_max_sweeps: d.gd.max_sweeps,
        position_objective: PU_POSITION_TIGHT,
    }
}

/// Builds a scenario from explicit data. `user_xy` holds `n_users` (x, y)
/// pairs, `x` one antenna position per waveguide.
///
/// # Safety
/// Pointers must be null or valid for the stated lengths; `out` receives a
/// handle to release with [`pu_scenario_free`].
#[no_mangle]
pub unsafe extern "C" fn pu_scenario_new(
    params: *const PuParams,
    user_xy: *const f64,
    n_users: usize,
    x: *const f64,
    n_waveguides: usize,
    p_max: f64,
    out: *mut *mut PuScenario,
) -> PuStatus {
    guard(|| {
        let params = *non_null(params, "params")?;
        non_null(out, "out")?;
        let xy = input(user_xy, 2 * n_users, "user_xy")?;
        let x = input(x, n_waveguides, "x")?;
        let scenario = PuScenario {
            params: params.into(),
            users: UserSet::new(xy.chunks_exact(2).map(|c| [c[0], c[1]]).collect(), p_max),
            layout: PinchLayout::new(x.to_vec()),
        };
        store_scenario(out, scenario)
    })
}

/// Draws users and a random initial layout from `seed`.
///
/// # Safety
/// `params` and `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn pu_scenario_sample(
    params: *const PuParams,
    seed: u64,
    n_users: usize,
    n_waveguides: usize,
    p_max: f64,
    out: *mut *mut PuScenario,
) -> PuStatus {
    guard(|| {
        let params: SystemParams = (*non_null(params, "params")?).into();
        non_null(out, "out")?;
        params.validate()?;
        if n_users == 0 || n_waveguides == 0 {
            return Err(fail(
                PuStatus::InvalidArgument,
                "user and waveguide counts must be positive",
            ));
        }
        let (users, layout) = sample_scenario(seed, &params, n_users, n_waveguides, p_max);
        store_scenario(out, PuScenario { params, users, layout })
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pu_scenario_free(scenario: *mut PuScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of users, 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pu_scenario_n_users(scenario: *const PuScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.users.len())
}

/// Number of waveguides, 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pu_scenario_n_waveguides(scenario: *const PuScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.layout.n_waveguides())
}

/// Copies the antenna positions into `x_out`.
///
/// # Safety
/// `x_out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pu_scenario_layout(scenario: *const PuScenario, x_out: *mut f64, len: usize) -> PuStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        let n = s.layout.n_waveguides();
        output(x_out, len, n, "x_out")?[..n].copy_from_slice(&s.layout.x);
        Ok(())
    })
}

/// Replaces the antenna positions. `len` must equal the waveguide count.
///
/// # Safety
/// `scenario` must be a live handle, `x` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pu_scenario_set_layout(scenario: *mut PuScenario, x: *const f64, len: usize) -> PuStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or_else(|| fail(PuStatus::NullPointer, "`scenario` is null"))?;
        let x = input(x, len, "x")?;
        if len != s.layout.n_waveguides() {
            return Err(Error::DimensionMismatch {
                expected: s.layout.n_waveguides(),
                got: len,
            }
            .into());
        }
        let layout = PinchLayout::new(x.to_vec());
        layout.validate(&s.params)?;
        s.layout = layout;
        Ok(())
    })
}

/// Sum-rate (nats) of the current layout with the given powers.
///
/// # Safety
/// `powers` must hold `len` doubles, `rate_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pu_sum_rate(
    scenario: *const PuScenario,
    powers: *const f64,
    len: usize,
    mode: u32,
    rate_out: *mut f64,
) -> PuStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        let powers = input(powers, len, "powers")?;
        let rate_out = output(rate_out, 1, 1, "rate_out")?;
        let mode = mode_from(mode)?;
        if len != s.users.len() {
            return Err(Error::DimensionMismatch {
                expected: s.users.len(),
                got: len,
            }
            .into());
        }
        if !powers.iter().all(|p| p.is_finite() && *p >= 0.0) {
            return Err(fail(PuStatus::InvalidArgument, "powers must be finite and nonnegative"));
        }
        let g = effective_channels(&s.params, &s.layout, &s.users);
        rate_out[0] = sum_rate(&g, powers, s.params.noise_power, mode).sum_nats;
        Ok(())
    })
}

fn write_run(
    r: &pinch_uplink::BcdResult,
    powers_out: *mut f64,
    len: usize,
    info: *mut PuRunInfo,
) -> Result<(), Failure> {
    let m = r.powers.len();
    output(powers_out, len, m, "powers_out")?[..m].copy_from_slice(&r.powers);
    if !info.is_null() {
        // SAFETY: non-null `info` points to writable storage.
        unsafe {
            ptr::write(
                info,
                PuRunInfo {
                    rate_nats: r.final_rate(),
                    initial_rate_nats: r.trace[0],
                    iterations: r.iterations,
                    converged: r.converged,
                },
            )
        };
    }
    Ok(())
}

/// Jointly optimizes positions and powers starting from the scenario's
/// layout, which is replaced by the optimized one. `options` may be null for
/// the SIC defaults; `info` may be null.
///
/// # Safety
/// `scenario` must be a live handle and `powers_out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pu_optimize(
    scenario: *mut PuScenario,
    options: *const PuOptions,
    powers_out: *mut f64,
    len: usize,
    info: *mut PuRunInfo,
) -> PuStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or_else(|| fail(PuStatus::NullPointer, "`scenario` is null"))?;
        let opts = match options.as_ref() {
            Some(o) => options_from(o)?,
            None => BcdOptions::default(),
        };
        output(powers_out, len, s.users.len(), "powers_out")?;
        let r = optimize(&s.params, &s.users, &s.layout, &opts);
        write_run(&r, powers_out, len, info)?;
        s.layout = r.layout;
        Ok(())
    })
}

/// Power-only optimization on a fixed uniform linear array with as many
/// elements as the scenario has waveguides. The scenario is not modified.
///
/// # Safety
/// As for [`pu_optimize`].
#[no_mangle]
pub unsafe extern "C" fn pu_optimize_baseline(
    scenario: *const PuScenario,
    options: *const PuOptions,
    powers_out: *mut f64,
    len: usize,
    info: *mut PuRunInfo,
) -> PuStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        let opts = match options.as_ref() {
            Some(o) => options_from(o)?,
            None => BcdOptions::default(),
        };
        output(powers_out, len, s.users.len(), "powers_out")?;
        let r = optimize_baseline(&s.params, &s.users, s.layout.n_waveguides(), &opts);
        write_run(&r, powers_out, len, info)
    })
}

/// Message for the last failed call on this thread, empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pu_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(pu_last_error()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn params_round_trip() {
        let p = pu_params_default();
        assert_eq!(SystemParams::from(p), SystemParams::default());
    }

    #[test]
    fn bad_mode_is_rejected() {
        let opts = pu_options_default(7);
        assert!(matches!(
            options_from(&opts),
            Err(Failure(PuStatus::InvalidArgument, _))
        ));
        let opts = PuOptions {
            gd_shrink: 0.5,
            ..pu_options_default(PU_MODE_SIC)
        };
        match options_from(&opts) {
            Err(Failure(PuStatus::InvalidArgument, msg)) => assert!(msg.contains("gd_shrink")),
            _ => panic!("accepted"),
        }
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), PuStatus::Panic);
        assert_eq!(last_error(), "internal panic");
        assert_eq!(guard(|| Ok(())), PuStatus::Ok);
        assert_eq!(last_error(), "");
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(pu_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
