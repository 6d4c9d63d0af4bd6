//! C interface to `elastinet`.
//!
//! Networks are opaque `ElnNetwork` handles owned by the caller and released
//! with [`eln_network_free`]. Every fallible function returns an `int32_t`
//! status (`ELN_OK` on success) and writes its results through out-pointers;
//! on failure [`eln_last_error`] describes the problem. Strings returned to C
//! are released with [`eln_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use elastinet::flow::{self, FlowState, SchemeConfig};
use elastinet::geometry::EnergyParams;
use elastinet::io::Snapshot;
use elastinet::linear::ls_verify;
use elastinet::network::{
    build_reparametrization, geometric_admissibility, parametric_admissibility, Flavor, NetworkState,
};
use elastinet::scenario::{self, ScenarioName, ScenarioSpec};
use elastinet::Error;

pub const ELN_OK: i32 = 0;
pub const ELN_ERR_NULL: i32 = 1;
pub const ELN_ERR_INVALID: i32 = 2;
pub const ELN_ERR_PARSE: i32 = 3;
pub const ELN_ERR_IO: i32 = 4;
pub const ELN_ERR_TOPOLOGY: i32 = 5;
pub const ELN_ERR_INADMISSIBLE: i32 = 6;
pub const ELN_ERR_SINGULAR: i32 = 7;
pub const ELN_ERR_IRREGULAR: i32 = 8;
pub const ELN_ERR_NUMERIC: i32 = 9;
pub const ELN_ERR_PANIC: i32 = 10;

pub const ELN_FLAVOR_C0: i32 = 0;
pub const ELN_FLAVOR_C1: i32 = 1;

/// A network together with its length weight `mu`.
pub struct ElnNetwork {
    net: NetworkState,
    params: EnergyParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Io(_) => ELN_ERR_IO,
        Error::Parse(_) => ELN_ERR_PARSE,
        Error::WrongTopology { .. } => ELN_ERR_TOPOLOGY,
        Error::Inadmissible(_) | Error::Compatibility { .. } | Error::InvalidPerturbation(_) => ELN_ERR_INADMISSIBLE,
        Error::Singular { .. } => ELN_ERR_SINGULAR,
        Error::Irregular { .. } => ELN_ERR_IRREGULAR,
        Error::NonFinite { .. } | Error::Reparametrization(_) => ELN_ERR_NUMERIC,
        Error::GridTooSmall { .. } | Error::GridMismatch(_) | Error::InvalidArgument(_) | Error::UnknownScenario(_) => {
            ELN_ERR_INVALID
        }
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ELN_ERR_NULL, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ELN_OK
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            ELN_ERR_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(ELN_ERR_INVALID, format!("{what} is not valid UTF-8")))
}

unsafe fn net_arg<'a>(p: *const ElnNetwork) -> Result<&'a ElnNetwork, Fail> {
    p.as_ref().ok_or_else(|| null("network"))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn flavor_arg(f: i32) -> Result<Flavor, Fail> {
    match f {
        ELN_FLAVOR_C0 => Ok(Flavor::C0),
        ELN_FLAVOR_C1 => Ok(Flavor::C1),
        _ => Err(Fail(ELN_ERR_INVALID, format!("unknown flavor {f}"))),
    }
}

fn boxed(net: NetworkState, params: EnergyParams) -> *mut ElnNetwork {
    Box::into_raw(Box::new(ElnNetwork { net, params }))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn eln_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a built-in scenario (`"triod-straight"`, `"triod-perturbed"`,
/// `"theta-symmetric"`, `"theta-degenerate"`). A negative `amplitude`
/// selects the scenario's default.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eln_network_from_scenario(
    name: *const c_char,
    grid: usize,
    mu: f64,
    amplitude: f64,
    out: *mut *mut ElnNetwork,
) -> i32 {
    guard(|| {
        let name: ScenarioName = str_arg(name, "name")?.parse()?;
        let mut spec = ScenarioSpec::new(name, grid, mu);
        if amplitude >= 0.0 {
            spec = spec.with_amplitude(amplitude);
        }
        let s = scenario::build(&spec)?;
        write_out(out, boxed(s.net, s.params), "out")
    })
}

/// Parses a snapshot JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eln_network_from_json(json: *const c_char, out: *mut *mut ElnNetwork) -> i32 {
    guard(|| {
        let snap = Snapshot::from_json(str_arg(json, "json")?)?;
        write_out(out, boxed(snap.to_network()?, snap.params()?), "out")
    })
}

/// Serializes the network as a snapshot JSON document. Release the string
/// with [`eln_string_free`].
///
/// # Safety
/// `net` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eln_network_to_json(net: *const ElnNetwork, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let h = net_arg(net)?;
        let text = Snapshot::from_network(&h.net, &h.params).to_json();
        let c = CString::new(text).map_err(|_| Fail(ELN_ERR_NUMERIC, "interior NUL".into()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn eln_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `net` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn eln_network_free(net: *mut ElnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of grid intervals `N`; each curve has `N + 1` nodes.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eln_network_grid(net: *const ElnNetwork, out: *mut usize) -> i32 {
    guard(|| write_out(out, net_arg(net)?.net.n(), "out"))
}

/// Elastic energy summed over the three curves.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eln_network_energy(net: *const ElnNetwork, out: *mut f64) -> i32 {
    guard(|| {
        let h = net_arg(net)?;
        write_out(out, h.net.energy(&h.params)?, "out")
    })
}

/// Copies the nodes of `curve` (0, 1 or 2) as `x0, y0, x1, y1, ...` into
/// `buf`, which must hold `2 (N + 1)` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eln_network_points(net: *const ElnNetwork, curve: usize, buf: *mut f64, len: usize) -> i32 {
    guard(|| {
        let h = net_arg(net)?;
        if curve > 2 {
            return Err(Fail(ELN_ERR_INVALID, format!("curve index {curve} out of range")));
        }
        let pts = h.net.curve(curve).points();
        if len < 2 * pts.len() {
            return Err(Fail(
                ELN_ERR_INVALID,
                format!("buffer holds {len} values, need {}", 2 * pts.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * pts.len());
        for (k, p) in pts.iter().enumerate() {
            out[2 * k] = p.x;
            out[2 * k + 1] = p.y;
        }
        Ok(())
    })
}

/// Runs the geometric and parametric admissibility checks. A positive
/// `tolerance` overrides the default one.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eln_check(
    net: *const ElnNetwork,
    flavor: i32,
    tolerance: f64,
    geometric_pass: *mut bool,
    parametric_pass: *mut bool,
) -> i32 {
    guard(|| {
        let h = net_arg(net)?;
        let flavor = flavor_arg(flavor)?;
        let mut g = geometric_admissibility(&h.net, &h.params, flavor)?;
        let mut p = parametric_admissibility(&h.net, &h.params, flavor);
        if tolerance > 0.0 {
            g = g.with_tolerance(tolerance);
            p = p.with_tolerance(tolerance);
        }
        write_out(geometric_pass, g.pass(), "geometric_pass")?;
        write_out(parametric_pass, p.pass(), "parametric_pass")
    })
}

/// Samples the complementing condition at the junctions; reports the
/// smallest normalized singular value and the verdict.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eln_ls_verify(
    net: *const ElnNetwork,
    flavor: i32,
    min_ratio: *mut f64,
    pass: *mut bool,
) -> i32 {
    guard(|| {
        let h = net_arg(net)?;
        let report = ls_verify(&h.net, &h.params, flavor_arg(flavor)?)?;
        write_out(min_ratio, report.min_ratio, "min_ratio")?;
        write_out(pass, report.pass, "pass")
    })
}

/// Reparametrizes a geometrically admissible network into a new handle.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eln_reparametrize(net: *const ElnNetwork, out: *mut *mut ElnNetwork) -> i32 {
    guard(|| {
        let h = net_arg(net)?;
        let map = build_reparametrization(&h.net, &h.params)?;
        write_out(out, boxed(map.apply(&h.net)?, h.params), "out")
    })
}

/// One time step of size `dt`, returned as a new handle.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eln_step(net: *const ElnNetwork, dt: f64, out: *mut *mut ElnNetwork) -> i32 {
    guard(|| {
        let h = net_arg(net)?;
        let state = FlowState::new(h.net.clone(), &h.params)?;
        let res = flow::step(&state, dt, &h.params, flow::flavor_of(&h.net))?;
        write_out(out, boxed(res.state.net, h.params), "out")
    })
}

/// Runs the adaptive flow to `t_final` starting with step `dt`. Writes the
/// final network, the number of accepted steps and whether `t_final` was
/// reached.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn eln_simulate(
    net: *const ElnNetwork,
    t_final: f64,
    dt: f64,
    out: *mut *mut ElnNetwork,
    steps: *mut usize,
    reached: *mut bool,
) -> i32 {
    guard(|| {
        let h = net_arg(net)?;
        let config = SchemeConfig {
            n: h.net.n(),
            t_final,
            dt_init: dt,
            ..SchemeConfig::default()
        };
        let trace = flow::run(&h.net, &config, &h.params, flow::flavor_of(&h.net))?;
        write_out(steps, trace.entries.len() - 1, "steps")?;
        write_out(reached, trace.termination == flow::Termination::TFinal, "reached")?;
        write_out(out, boxed(trace.final_state, h.params), "out")
    })
}
