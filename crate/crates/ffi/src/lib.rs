//! C interface to `qrchain`.
//!
//! Every fallible call returns a [`QrcStatus`]; on anything but `QRC_STATUS_OK`
//! the message is available from [`qrc_last_error_message`] on the same thread.
//! Configurations are opaque handles created by `qrc_config_*` and released
//! with [`qrc_config_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qrchain::config::Config;
use qrchain::sim_1g::Protocol;
use qrchain::theory_1g::{self, Timing1g, WaitModel};
use qrchain::{optimizer, sim_1g, sim_ape, theory_ape, ChainTopology, Error, RgsParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Domain = 5,
    Simulation = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrcProtocol {
    TwoStep = 0,
    HopByHop = 1,
}

/// Opaque configuration handle.
pub struct QrcConfig {
    inner: Config,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QrcIonTheory {
    pub mu: f64,
    pub p_bsm: f64,
    pub t_attempt_s: f64,
    pub p_suc: f64,
    pub t_exp_s: f64,
    pub egr_hz: f64,
    /// NaN for hop-by-hop.
    pub fidelity: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QrcApeTheory {
    pub mu: f64,
    pub p_rgs: f64,
    pub t_rgs_s: f64,
    pub mq_e: u64,
    pub photons: u64,
    pub egr_hz: f64,
    pub fidelity: f64,
    pub fidelity_with_memory: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QrcSimResult {
    pub egr_hz: f64,
    pub egr_sem: f64,
    /// NaN when there were no successes.
    pub fidelity: f64,
    pub fidelity_sem: f64,
    pub success_prob: f64,
    pub success_prob_sem: f64,
    pub iterations: u64,
    pub successes: u64,
    /// APE only: the success target was not reached.
    pub censored: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QrcRgs {
    pub m: u32,
    pub b0: u32,
    pub b1: u32,
    pub photons: u64,
    pub egr_hz: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QrcStatus {
    match e {
        Error::Config { .. } | Error::Parameter { .. } | Error::Json(_) => QrcStatus::Config,
        Error::Argument(_) | Error::EmptySearch(_) => QrcStatus::InvalidArgument,
        Error::Domain(_) | Error::UndefinedFidelity(_) => QrcStatus::Domain,
        _ => QrcStatus::Simulation,
    }
}

/// Runs `f`, recording any error or panic for `qrc_last_error_message`.
fn guard<F>(f: F) -> QrcStatus
where
    F: FnOnce() -> Result<(), (QrcStatus, String)>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QrcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            QrcStatus::Panic
        }
    }
}

fn lift<T>(r: qrchain::Result<T>) -> Result<T, (QrcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (QrcStatus, String) {
    (QrcStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QrcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (QrcStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

unsafe fn cfg_arg<'a>(p: *const QrcConfig) -> Result<&'a Config, (QrcStatus, String)> {
    p.as_ref().map(|c| &c.inner).ok_or_else(|| null("config"))
}

fn topology(cfg: &Config, distance_km: f64, n: u32) -> Result<ChainTopology, (QrcStatus, String)> {
    Ok(lift(cfg.topology.with_length(distance_km))?.with_repeaters(n))
}

fn shape(m: u32, b0: u32, b1: u32) -> Result<RgsParams, (QrcStatus, String)> {
    lift(RgsParams::new(m, b0, b1))
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), (QrcStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { out.write(value) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qrc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next `qrc_*` call on the same thread.
#[no_mangle]
pub extern "C" fn qrc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Built-in defaults.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qrc_config_default(out: *mut *mut QrcConfig) -> QrcStatus {
    guard(|| {
        write_out(
            out,
            Box::into_raw(Box::new(QrcConfig {
                inner: Config::default(),
            })),
        )
    })
}

/// Parses a JSON configuration; missing keys take their defaults.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_config_from_json(json: *const c_char, out: *mut *mut QrcConfig) -> QrcStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lift(Config::from_json_str(text))?;
        write_out(out, Box::into_raw(Box::new(QrcConfig { inner })))
    })
}

/// Applies one `dotted.key=value` override in place.
///
/// # Safety
/// `config` must come from `qrc_config_*`; `spec` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qrc_config_set(config: *mut QrcConfig, spec: *const c_char) -> QrcStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.inner = lift(cfg.inner.with_overrides(&[spec]))?;
        Ok(())
    })
}

/// Serialises the configuration. Free the string with `qrc_string_free`.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_config_to_json(config: *const QrcConfig, out: *mut *mut c_char) -> QrcStatus {
    guard(|| {
        let cfg = cfg_arg(config)?;
        let s = CString::new(cfg.to_json_string()).expect("json has no NUL");
        write_out(out, s.into_raw())
    })
}

/// # Safety
/// `config` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qrc_config_free(config: *mut QrcConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qrc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Closed-form rate and fidelity of a trapped-ion chain.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_theory_1g(
    config: *const QrcConfig,
    distance_km: f64,
    n_repeaters: u32,
    protocol: QrcProtocol,
    out: *mut QrcIonTheory,
) -> QrcStatus {
    guard(|| {
        let cfg = cfg_arg(config)?;
        let topo = topology(cfg, distance_km, n_repeaters)?;
        let ion = &cfg.trapped_ion;
        let mu = lift(theory_1g::link_loss(ion, &topo))?;
        let timing = Timing1g::from_params(ion, &topo);
        let (cycle, fidelity) = match protocol {
            QrcProtocol::TwoStep => (
                theory_1g::cycle_time(mu, ion.h_max, n_repeaters, &timing),
                lift(theory_1g::expected_fidelity_1g(ion, &topo, &WaitModel::Exact))?,
            ),
            QrcProtocol::HopByHop => (
                theory_1g::cycle_time_hop_by_hop(mu, ion.h_max, n_repeaters, &timing),
                f64::NAN,
            ),
        };
        write_out(
            out,
            QrcIonTheory {
                mu,
                p_bsm: theory_1g::p_bsm(mu),
                t_attempt_s: timing.t_attempt,
                p_suc: cycle.p_suc,
                t_exp_s: cycle.t_exp_total,
                egr_hz: cycle.egr(),
                fidelity,
            },
        )
    })
}

/// Closed-form rate and fidelity of an all-photonic chain.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_theory_ape(
    config: *const QrcConfig,
    distance_km: f64,
    n_repeaters: u32,
    m: u32,
    b0: u32,
    b1: u32,
    out: *mut QrcApeTheory,
) -> QrcStatus {
    guard(|| {
        let cfg = cfg_arg(config)?;
        let topo = topology(cfg, distance_km, n_repeaters)?;
        let rgs = shape(m, b0, b1)?;
        let rates = lift(theory_ape::egr_ape(&cfg.ape, &topo, &rgs))?;
        let fid = lift(theory_ape::fidelity_ape(&cfg.ape, &topo, &rgs, n_repeaters))?;
        write_out(
            out,
            QrcApeTheory {
                mu: rates.mu,
                p_rgs: rates.p_rgs,
                t_rgs_s: rates.t_rgs_s,
                mq_e: rates.mq_e,
                photons: rgs.photon_count(),
                egr_hz: rates.egr,
                fidelity: fid.fbar,
                fidelity_with_memory: fid.fbar_with_memory,
            },
        )
    })
}

/// Event-driven simulation of a trapped-ion chain for `iterations` cycles.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_simulate_1g(
    config: *const QrcConfig,
    distance_km: f64,
    n_repeaters: u32,
    protocol: QrcProtocol,
    iterations: u64,
    seed: u64,
    out: *mut QrcSimResult,
) -> QrcStatus {
    guard(|| {
        let cfg = cfg_arg(config)?;
        let topo = topology(cfg, distance_km, n_repeaters)?;
        let protocol = match protocol {
            QrcProtocol::TwoStep => Protocol::TwoStep,
            QrcProtocol::HopByHop => Protocol::HopByHop,
        };
        let r = lift(sim_1g::estimate(
            &cfg.trapped_ion,
            &topo,
            protocol,
            iterations,
            seed,
        ))?;
        let p = r.successes as f64 / r.iterations as f64;
        write_out(
            out,
            QrcSimResult {
                egr_hz: r.egr_hz,
                egr_sem: r.egr_sem,
                fidelity: r.fidelity.unwrap_or(f64::NAN),
                fidelity_sem: r.fidelity_sem.unwrap_or(f64::NAN),
                success_prob: p,
                success_prob_sem: (p * (1.0 - p) / r.iterations as f64).sqrt(),
                iterations: r.iterations,
                successes: r.successes,
                censored: false,
            },
        )
    })
}

/// Simulates an all-photonic chain until `target_successes` or
/// `max_iterations`; a censored run still returns `QRC_STATUS_OK`.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_simulate_ape(
    config: *const QrcConfig,
    distance_km: f64,
    n_repeaters: u32,
    m: u32,
    b0: u32,
    b1: u32,
    target_successes: u64,
    max_iterations: u64,
    seed: u64,
    out: *mut QrcSimResult,
) -> QrcStatus {
    guard(|| {
        let cfg = cfg_arg(config)?;
        let topo = topology(cfg, distance_km, n_repeaters)?;
        let rgs = shape(m, b0, b1)?;
        let r = lift(sim_ape::estimate_ape(
            &cfg.ape,
            &topo,
            &rgs,
            target_successes,
            max_iterations,
            seed,
        ))?;
        write_out(
            out,
            QrcSimResult {
                egr_hz: r.egr_hz,
                egr_sem: r.egr_sem,
                fidelity: r.fidelity.unwrap_or(f64::NAN),
                fidelity_sem: r.fidelity_sem.unwrap_or(f64::NAN),
                success_prob: r.success_prob,
                success_prob_sem: r.success_prob_sem,
                iterations: r.iterations,
                successes: r.successes,
                censored: r.censored_flag,
            },
        )
    })
}

/// Best RGS shape within `photon_budget` for an `n`-repeater chain.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_optimize_rgs(
    config: *const QrcConfig,
    distance_km: f64,
    n_repeaters: u32,
    photon_budget: u64,
    out: *mut QrcRgs,
) -> QrcStatus {
    guard(|| {
        let cfg = cfg_arg(config)?;
        let topo = topology(cfg, distance_km, n_repeaters)?;
        let best = lift(optimizer::optimize_rgs(
            &cfg.ape,
            &topo,
            photon_budget,
            n_repeaters,
        ))?;
        write_out(
            out,
            QrcRgs {
                m: best.rgs.m,
                b0: best.rgs.b0,
                b1: best.rgs.b1,
                photons: best.photons,
                egr_hz: best.egr,
            },
        )
    })
}
