//! C interface to the planner, the online adapter and the power model.
//!
//! Objects cross the boundary as opaque handles (`UwConfig`, `UwPlan`,
//! `UwFlightLog`) released with the matching `uw_*_free`. Every
//! fallible call returns a [`UwStatus`]; the message of the last failure on
//! the calling thread is available from [`uw_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use uav_wind::bench::experiment::city_for;
use uav_wind::bench::ExperimentConfig;
use uav_wind::online::{fly_offline, fly_online, FlightLog};
use uav_wind::planner::{plan_offline, plan_windless, OfflinePlan};
use uav_wind::propulsion::{power, KinState};
use uav_wind::wind::sample_trace;
use uav_wind::{Error, Vec3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Experiment configuration: scenario, wind, channel and online settings.
pub struct UwConfig(ExperimentConfig);

pub struct UwPlan(OfflinePlan);

pub struct UwFlightLog(FlightLog);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> UwStatus {
    match e {
        e if e.is_solver_failure() => UwStatus::Solver,
        Error::Io(_) => UwStatus::Io,
        Error::Config(_) | Error::Parse { .. } => UwStatus::Config,
        _ => UwStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (UwStatus, String)>>(f: F) -> UwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UwStatus::Ok,
        Ok(Err((st, msg))) => {
            set_error(&msg);
            st
        }
        Err(_) => {
            set_error("internal panic");
            UwStatus::Panic
        }
    }
}

fn fail(e: Error) -> (UwStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (UwStatus, String) {
    (UwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, (UwStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, v: T) {
    *out = Box::into_raw(Box::new(v));
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn uw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reference scenario with default online and city settings.
#[no_mangle]
pub extern "C" fn uw_config_default() -> *mut UwConfig {
    Box::into_raw(Box::new(UwConfig(ExperimentConfig::default())))
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uw_config_from_toml(toml: *const c_char, out: *mut *mut UwConfig) -> UwStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| (UwStatus::InvalidArgument, "config is not UTF-8".to_string()))?;
        let cfg = ExperimentConfig::from_toml_str(text).map_err(fail)?;
        put(out, UwConfig(cfg));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from a `uw_config_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn uw_config_free(cfg: *mut UwConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of time slots N of the scenario; 0 for a null handle.
///
/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn uw_config_slots(cfg: *const UwConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.scenario().n_slots())
}

/// Number of ground users K; 0 for a null handle.
///
/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn uw_config_users(cfg: *const UwConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.scenario().k())
}

/// Sets the number of wind samples per slot used by offline planning.
///
/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn uw_config_set_samples(cfg: *mut UwConfig, samples: usize) -> UwStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if samples == 0 {
            return Err((UwStatus::InvalidArgument, "samples must be at least 1".into()));
        }
        c.0.scenario.s_mcsaa = samples;
        Ok(())
    })
}

/// Propulsion power (W) of the scenario's vehicle at velocity `v`,
/// acceleration `a` and wind `w`, each a 3-vector.
///
/// # Safety
/// Pointers must reference 3 readable doubles; `out` one writable double.
#[no_mangle]
pub unsafe extern "C" fn uw_power(
    cfg: *const UwConfig,
    v: *const f64,
    a: *const f64,
    w: *const f64,
    out: *mut f64,
) -> UwStatus {
    guard(|| {
        let c = get(cfg, "cfg")?;
        let vec = |p: *const f64, what: &str| -> Result<Vec3, (UwStatus, String)> {
            if p.is_null() {
                return Err(null(what));
            }
            let s = std::slice::from_raw_parts(p, 3);
            Ok(Vec3::new(s[0], s[1], s[2]))
        };
        let (v, a, w) = (vec(v, "v")?, vec(a, "a")?, vec(w, "w")?);
        if out.is_null() {
            return Err(null("out"));
        }
        if !(v.iter().chain(a.iter()).chain(w.iter()).all(|x| x.is_finite())) {
            return Err((UwStatus::InvalidArgument, "state must be finite".into()));
        }
        *out = power(&KinState::new(v, a), &w, &c.0.aero.params()).total;
        Ok(())
    })
}

/// Draws `n` wind samples at the reference altitude into `v_ref` (m/s)
/// and `beta` (deg).
///
/// # Safety
/// `v_ref` and `beta` must each hold `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn uw_sample_wind(
    cfg: *const UwConfig,
    seed: u64,
    n: usize,
    v_ref: *mut f64,
    beta: *mut f64,
) -> UwStatus {
    guard(|| {
        let c = get(cfg, "cfg")?;
        if v_ref.is_null() || beta.is_null() {
            return Err(null("output buffer"));
        }
        let s = c.0.scenario();
        let trace = sample_trace(&s.wind, n, 1, seed).map_err(fail)?;
        let vs = std::slice::from_raw_parts_mut(v_ref, n);
        let bs = std::slice::from_raw_parts_mut(beta, n);
        for (i, w) in trace.scenario(0).iter().enumerate() {
            vs[i] = w.v_ref;
            bs[i] = w.beta;
        }
        Ok(())
    })
}

/// Runs the offline design; `windless != 0` plans for calm air.
///
/// # Safety
/// `cfg` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uw_plan_offline(
    cfg: *const UwConfig,
    seed: u64,
    windless: i32,
    out: *mut *mut UwPlan,
) -> UwStatus {
    guard(|| {
        let c = get(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = c.0.scenario();
        let plan = if windless != 0 { plan_windless(&s) } else { plan_offline(&s, seed) }.map_err(fail)?;
        put(out, UwPlan(plan));
        Ok(())
    })
}

/// # Safety
/// `plan` must come from [`uw_plan_offline`] or be null.
#[no_mangle]
pub unsafe extern "C" fn uw_plan_free(plan: *mut UwPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// `R_min / sum P_ub` of the plan; NaN for a null handle.
///
/// # Safety
/// `plan` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn uw_plan_objective(plan: *const UwPlan) -> f64 {
    plan.as_ref().map_or(f64::NAN, |p| p.0.objective)
}

/// # Safety
/// `plan` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn uw_plan_slots(plan: *const UwPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.trajectory.n())
}

/// Position of slot `n` (zero-based) into `xyz[3]`.
///
/// # Safety
/// `plan` must be live; `xyz` must hold 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn uw_plan_position(plan: *const UwPlan, n: usize, xyz: *mut f64) -> UwStatus {
    guard(|| {
        let p = get(plan, "plan")?;
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        let q = p.0.trajectory.pos.get(n).ok_or((UwStatus::OutOfRange, format!("slot {n} out of range")))?;
        std::slice::from_raw_parts_mut(xyz, 3).copy_from_slice(q.as_slice());
        Ok(())
    })
}

/// Scheduled user of slot `n`, one-based; 0 when idle or out of range.
///
/// # Safety
/// `plan` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn uw_plan_user(plan: *const UwPlan, n: usize) -> usize {
    match plan.as_ref() {
        Some(p) if n < p.0.schedule.n() => p.0.schedule.assigned(n).map_or(0, |k| k + 1),
        _ => 0,
    }
}

/// Flies `plan` through one wind realization and city; `adapt != 0` uses
/// the online adapter, otherwise the plan is flown open loop.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uw_fly(
    cfg: *const UwConfig,
    plan: *const UwPlan,
    wind_seed: u64,
    city_seed: u64,
    adapt: i32,
    out: *mut *mut UwFlightLog,
) -> UwStatus {
    guard(|| {
        let c = get(cfg, "cfg")?;
        let p = get(plan, "plan")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = c.0.scenario();
        let (t, a) = (&p.0.trajectory, &p.0.schedule);
        if a.k() != s.k() {
            return Err((UwStatus::InvalidArgument, "plan and config disagree on the users".into()));
        }
        let wind = sample_trace(&s.wind, t.n(), 1, wind_seed).map_err(fail)?;
        let city = city_for(&c.0, &s, city_seed).map_err(fail)?;
        let log = if adapt != 0 {
            fly_online(&s, t, a, wind.scenario(0), &s.wind, &city, &c.0.online.config())
        } else {
            fly_offline(&s, t, a, wind.scenario(0), &s.wind, &city)
        }
        .map_err(fail)?;
        put(out, UwFlightLog(log));
        Ok(())
    })
}

/// # Safety
/// `log` must come from [`uw_fly`] or be null.
#[no_mangle]
pub unsafe extern "C" fn uw_log_free(log: *mut UwFlightLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Propulsion energy (J); NaN for a null handle.
///
/// # Safety
/// `log` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn uw_log_energy(log: *const UwFlightLog) -> f64 {
    log.as_ref().map_or(f64::NAN, |l| l.0.energy())
}

/// Smallest per-user realized rate summed over slots; NaN for a null handle.
///
/// # Safety
/// `log` must be live; `users` is the scenario's K.
#[no_mangle]
pub unsafe extern "C" fn uw_log_min_rate(log: *const UwFlightLog, users: usize) -> f64 {
    log.as_ref().map_or(f64::NAN, |l| l.0.min_user_rate(users))
}

/// # Safety
/// `log` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn uw_log_slots(log: *const UwFlightLog) -> usize {
    log.as_ref().map_or(0, |l| l.0.rows.len())
}

/// Flown position of slot `n` into `xyz[3]`.
///
/// # Safety
/// `log` must be live; `xyz` must hold 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn uw_log_position(log: *const UwFlightLog, n: usize, xyz: *mut f64) -> UwStatus {
    guard(|| {
        let l = get(log, "log")?;
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        let r = l.0.rows.get(n).ok_or((UwStatus::OutOfRange, format!("slot {n} out of range")))?;
        std::slice::from_raw_parts_mut(xyz, 3).copy_from_slice(r.q.as_slice());
        Ok(())
    })
}

/// Writes the flight log CSV to `path`.
///
/// # Safety
/// `log` must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn uw_log_write_csv(log: *const UwFlightLog, path: *const c_char) -> UwStatus {
    guard(|| {
        let l = get(log, "log")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (UwStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let f = std::fs::File::create(path).map_err(|e| fail(e.into()))?;
        l.0.write_csv(std::io::BufWriter::new(f)).map_err(fail)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_handles_report_status() {
        unsafe {
            let mut out = ptr::null_mut();
            assert_eq!(uw_plan_offline(ptr::null(), 1, 0, &mut out), UwStatus::NullPointer);
            let msg = CStr::from_ptr(uw_last_error()).to_str().unwrap();
            assert!(msg.contains("cfg"));
            assert_eq!(uw_config_slots(ptr::null()), 0);
            assert!(uw_plan_objective(ptr::null()).is_nan());
            uw_config_free(ptr::null_mut());
        }
    }

    #[test]
    fn bad_config_is_config_error() {
        let text = CString::new("[wind]\nlambda = -1.0").unwrap();
        let mut out = ptr::null_mut();
        let st = unsafe { uw_config_from_toml(text.as_ptr(), &mut out) };
        assert_eq!(st, UwStatus::Config);
        assert!(out.is_null());
    }

    #[test]
    fn hover_power_matches_core() {
        let cfg = uw_config_default();
        let z = [0.0; 3];
        let mut p = 0.0;
        unsafe {
            assert_eq!(uw_power(cfg, z.as_ptr(), z.as_ptr(), z.as_ptr(), &mut p), UwStatus::Ok);
            assert!((p - uav_wind::propulsion::AeroParams::default().hover_power()).abs() < 1e-9);
            uw_config_free(cfg);
        }
    }
}
