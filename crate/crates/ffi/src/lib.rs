//! C interface to the uav-height simulator.
//!
//! Every fallible call returns a [`UhStatus`]; on failure the message is
//! available from [`uh_last_error`] on the same thread. Topologies are
//! opaque handles owned by the caller and released with
//! [`uh_topology_free`]. Strings returned by the library are released with
//! [`uh_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use uav_height::agent::PolicyKind;
use uav_height::episode::StateVariant;
use uav_height::harness::{run_cell, CellSpec, ExperimentConfig};
use uav_height::radio::{self, RadioParams};
use uav_height::topology::{CityTopology, Point3, TopologyParams};
use uav_height::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoBaseStations = 3,
    OutOfRange = 4,
    BufferTooSmall = 5,
    Runtime = 6,
    Panic = 7,
}

/// A generated city.
pub struct UhTopology {
    inner: CityTopology,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> UhStatus {
    match e {
        Error::InvalidParameter(_) | Error::NothingToRun | Error::DimensionMismatch { .. } => UhStatus::InvalidArgument,
        Error::NoBaseStations => UhStatus::NoBaseStations,
        Error::BsIndexOutOfRange { .. } => UhStatus::OutOfRange,
        Error::Cell { source, .. } => status_of(source),
        _ => UhStatus::Runtime,
    }
}

/// Run `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (UhStatus, String)>) -> UhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UhStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside uav-height");
            UhStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (UhStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (UhStatus, String) {
    (UhStatus::NullPointer, format!("{what} is null"))
}

unsafe fn topology_ref<'a>(t: *const UhTopology) -> Result<&'a CityTopology, (UhStatus, String)> {
    // SAFETY: caller passes a handle from uh_topology_generate or null.
    unsafe { t.as_ref() }.map(|t| &t.inner).ok_or_else(|| null("topology"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, (UhStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a nul-terminated string.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| (UhStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn uh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generate a city with default area and building shape.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn uh_topology_generate(
    bs_density_km2: f64,
    build_density_km2: f64,
    seed: u64,
    out: *mut *mut UhTopology,
) -> UhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = TopologyParams { bs_density_km2, build_density_km2, ..TopologyParams::default() };
        let inner = CityTopology::generate(&params, seed).map_err(lib_err)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(UhTopology { inner })) };
        Ok(())
    })
}

/// Release a topology. Null is ignored.
///
/// # Safety
/// `t` must come from [`uh_topology_generate`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uh_topology_free(t: *mut UhTopology) {
    if !t.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(t) });
    }
}

/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uh_topology_bs_count(t: *const UhTopology, out: *mut usize) -> UhStatus {
    guard(|| {
        let topo = unsafe { topology_ref(t) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = topo.bss.len() };
        Ok(())
    })
}

/// Building count of the city.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uh_topology_building_count(t: *const UhTopology, out: *mut usize) -> UhStatus {
    guard(|| {
        let topo = unsafe { topology_ref(t) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = topo.buildings.len() };
        Ok(())
    })
}

/// Serialize the city to JSON. Free the result with [`uh_string_free`].
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uh_topology_to_json(t: *const UhTopology, out: *mut *mut c_char) -> UhStatus {
    guard(|| {
        let topo = unsafe { topology_ref(t) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = topo.to_json().map_err(lib_err)?;
        let s = CString::new(json).map_err(|e| (UhStatus::Runtime, e.to_string()))?;
        unsafe { *out = s.into_raw() };
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn uh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Whether buildings block the link from `(x, y, z)` to base station `bs`.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uh_is_blocked(
    t: *const UhTopology,
    x: f64,
    y: f64,
    z: f64,
    bs: usize,
    out: *mut bool,
) -> UhStatus {
    guard(|| {
        let topo = unsafe { topology_ref(t) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let station = topo
            .bss
            .get(bs)
            .ok_or_else(|| lib_err(Error::BsIndexOutOfRange { index: bs, count: topo.bss.len() }))?;
        unsafe { *out = radio::is_blocked(topo, Point3::new(x, y, z), station) };
        Ok(())
    })
}

/// Linear SINR at `(x, y, z)` served by base station `serving`, with the
/// default radio parameters.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uh_sinr(
    t: *const UhTopology,
    x: f64,
    y: f64,
    z: f64,
    serving: usize,
    out: *mut f64,
) -> UhStatus {
    guard(|| {
        let topo = unsafe { topology_ref(t) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = radio::sinr(topo, Point3::new(x, y, z), serving, &RadioParams::default()).map_err(lib_err)?;
        unsafe { *out = s };
        Ok(())
    })
}

/// Index of the base station nearest to `(x, y)` in the horizontal plane.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uh_nearest_bs(t: *const UhTopology, x: f64, y: f64, out: *mut usize) -> UhStatus {
    guard(|| {
        let topo = unsafe { topology_ref(t) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let idx = radio::nearest_bs(topo, x, y).ok_or_else(|| lib_err(Error::NoBaseStations))?;
        unsafe { *out = idx };
        Ok(())
    })
}

/// Shannon spectral efficiency `log2(1 + sinr)` in bits/s/Hz.
#[no_mangle]
pub extern "C" fn uh_spectral_efficiency(sinr_linear: f64) -> f64 {
    radio::spectral_efficiency(sinr_linear)
}

/// Run one experiment cell with the default configuration and write the
/// per-episode throughput into `throughput` (`episodes` values).
///
/// `policy` is one of `constant`, `random`, `genie`, `dqn`; `variant` is a
/// DQN state variant (`basic`, `bs`, `build`, `complete`) or null.
///
/// # Safety
/// Strings must be nul-terminated; `throughput` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn uh_run_cell(
    policy: *const c_char,
    variant: *const c_char,
    bs_density_km2: f64,
    build_density_km2: f64,
    master_seed: u64,
    replicate: usize,
    episodes: usize,
    throughput: *mut f64,
    len: usize,
) -> UhStatus {
    guard(|| {
        let bad = |e: Error| (UhStatus::InvalidArgument, e.to_string());
        let policy: PolicyKind = unsafe { str_arg(policy, "policy") }?.parse().map_err(bad)?;
        let variant: Option<StateVariant> = if variant.is_null() {
            None
        } else {
            Some(unsafe { str_arg(variant, "variant") }?.parse().map_err(bad)?)
        };
        let variant = match policy {
            PolicyKind::Dqn => Some(variant.unwrap_or(StateVariant::Basic)),
            _ => None,
        };
        if throughput.is_null() {
            return Err(null("throughput"));
        }
        if len < episodes {
            return Err((UhStatus::BufferTooSmall, format!("buffer holds {len} values, need {episodes}")));
        }
        let cfg = ExperimentConfig {
            episodes,
            summary_window: (1, episodes.max(1)),
            master_seed,
            log_step_episodes: Some(vec![]),
            ..ExperimentConfig::default()
        };
        cfg.validate().map_err(lib_err)?;
        let spec = CellSpec {
            bs_density_km2,
            build_density_km2,
            policy,
            variant,
            replicate,
        };
        let result = run_cell(&cfg, &spec).map_err(lib_err)?;
        // SAFETY: caller guarantees `len >= episodes` doubles.
        let buf = unsafe { std::slice::from_raw_parts_mut(throughput, episodes) };
        for (slot, e) in buf.iter_mut().zip(&result.episodes) {
            *slot = e.throughput_bits_hz;
        }
        Ok(())
    })
}
