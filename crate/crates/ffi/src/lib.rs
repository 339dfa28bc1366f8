//! C ABI over the `ringaccel` cost model and tiling search.
//!
//! Networks and plans are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns a
//! [`RaStatus`]; on failure a message is available from
//! [`ra_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ringaccel::cost::{energy_efficiency, performance};
use ringaccel::net::resolve_network;
use ringaccel::report::{analyze, build_plan, no_reuse_breakdown, AnalysisOptions};
use ringaccel::{Builtin, DsePlan, EnergyParams, Error, HardwareConfig, NetworkSpec, Strategy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    UnknownNetwork = 3,
    Io = 4,
    Parse = 5,
    Validation = 6,
    Tiling = 7,
    NoFeasibleTiling = 8,
    Hardware = 9,
    Capacity = 10,
    OutOfRange = 11,
    InvalidArgument = 12,
    Internal = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaStrategy {
    OutputReuse = 0,
    InputReuse = 1,
    NoReuse = 2,
}

/// Planning options. Zero `clock_mhz` or `mac_budget` keeps the default
/// hardware value. `tm`/`tn` force a tiling when both are non-zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RaPlanOptions {
    pub strategy: RaStrategy,
    pub ofp: bool,
    pub ppfs: bool,
    pub decompose: bool,
    pub tm: usize,
    pub tn: usize,
    pub clock_mhz: f64,
    pub mac_budget: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RaLayerResult {
    pub tm: usize,
    pub tn: usize,
    pub decomposed: bool,
    pub cycles: u64,
    pub utilization: f64,
    pub gops: f64,
    pub input_bytes: u64,
    pub weight_bytes: u64,
    pub output_bytes: u64,
    pub total_bytes: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RaPlanSummary {
    pub layers: usize,
    pub total_cycles: u64,
    pub total_bytes: u64,
    pub latency_s: f64,
    pub utilization: f64,
    pub gops: f64,
}

/// A validated network description.
pub struct RaNetwork {
    net: NetworkSpec,
}

/// Tiling choices and costs for one network under one configuration.
pub struct RaPlan {
    plan: DsePlan,
    utilization: f64,
    gops: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> RaStatus {
    match err {
        Error::Io { .. } => RaStatus::Io,
        Error::Parse(_) | Error::Report(_) => RaStatus::Parse,
        Error::Validation { .. } | Error::PlanMismatch { .. } | Error::Shape(_) => RaStatus::Validation,
        Error::Tiling { .. } => RaStatus::Tiling,
        Error::NoFeasibleTiling(_) => RaStatus::NoFeasibleTiling,
        Error::Hardware(_) => RaStatus::Hardware,
        Error::NonPositivePower(_) => RaStatus::InvalidArgument,
        Error::Capacity { .. } | Error::SimulationCap { .. } => RaStatus::Capacity,
        Error::UnknownNetwork(_) => RaStatus::UnknownNetwork,
    }
}

struct Fail(RaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RaStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            RaStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RaStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RaStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn hardware(o: &RaPlanOptions) -> Result<HardwareConfig, Fail> {
    let mut hw = HardwareConfig::default();
    if o.clock_mhz != 0.0 {
        if !(o.clock_mhz.is_finite() && o.clock_mhz > 0.0) {
            return Err(Fail(RaStatus::Hardware, format!("clock {} MHz", o.clock_mhz)));
        }
        hw = hw.with_clock_mhz(o.clock_mhz);
    }
    if o.mac_budget != 0 {
        hw = hw.with_mac_budget(o.mac_budget);
    }
    hw.validate()?;
    Ok(hw)
}

fn analysis(o: &RaPlanOptions) -> AnalysisOptions {
    AnalysisOptions {
        strategy: match o.strategy {
            RaStrategy::OutputReuse => Some(Strategy::OutputReuse),
            RaStrategy::InputReuse => Some(Strategy::InputReuse),
            RaStrategy::NoReuse => None,
        },
        ofp: o.ofp,
        ppfs: o.ppfs,
        decompose: o.decompose,
        tiling: (o.tm != 0 && o.tn != 0).then_some((o.tm, o.tn)),
    }
}

/// Default options: output reuse, searched tiling, default hardware.
#[no_mangle]
pub extern "C" fn ra_plan_options_default() -> RaPlanOptions {
    RaPlanOptions {
        strategy: RaStrategy::OutputReuse,
        ofp: false,
        ppfs: false,
        decompose: false,
        tm: 0,
        tn: 0,
        clock_mhz: 0.0,
        mac_budget: 0,
    }
}

/// Builds a built-in network (`ecnn`, `vgg16`, `mobilenet_v1`, `ecnn-mini`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_network_builtin(name: *const c_char, out: *mut *mut RaNetwork) -> RaStatus {
    guard(|| {
        let name = text(name, "name")?;
        if name != "ecnn-mini" && name.parse::<Builtin>().is_err() {
            return Err(Error::UnknownNetwork(name.to_owned()).into());
        }
        let net = resolve_network(name)?;
        write(out, Box::into_raw(Box::new(RaNetwork { net })), "out")
    })
}

/// Loads a network from a JSON config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_network_load(path: *const c_char, out: *mut *mut RaNetwork) -> RaStatus {
    guard(|| {
        let path = text(path, "path")?;
        let net = ringaccel::net::load_network(path)?;
        write(out, Box::into_raw(Box::new(RaNetwork { net })), "out")
    })
}

/// # Safety
/// `net` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ra_network_free(net: *mut RaNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_network_layer_count(net: *const RaNetwork, out: *mut usize) -> RaStatus {
    guard(|| {
        let n = borrow(net, "net")?;
        write(out, n.net.layers.len(), "out")
    })
}

/// Total multiply-accumulates over all layers.
///
/// # Safety
/// `net` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_network_total_macs(net: *const RaNetwork, out: *mut u64) -> RaStatus {
    guard(|| {
        let n = borrow(net, "net")?;
        write(out, n.net.total_macs(), "out")
    })
}

/// Runs the tiling search (or applies a forced tiling) and the cost model.
/// A null `opts` means [`ra_plan_options_default`].
///
/// # Safety
/// `net` must be a live handle, `opts` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_plan_network(
    net: *const RaNetwork,
    opts: *const RaPlanOptions,
    out: *mut *mut RaPlan,
) -> RaStatus {
    guard(|| {
        let n = borrow(net, "net")?;
        let o = opts.as_ref().copied().unwrap_or(ra_plan_options_default());
        let hw = hardware(&o)?;
        let mut plan = build_plan(&n.net, &hw, &analysis(&o))?;
        if o.strategy == RaStrategy::NoReuse {
            let layers: Vec<_> = n.net.layers.iter().map(no_reuse_breakdown).collect();
            let mut total = ringaccel::AccessBreakdown::default();
            for a in &layers {
                total.input_bytes += a.input_bytes;
                total.weight_bytes += a.weight_bytes;
                total.output_bytes += a.output_bytes;
                total.total_bytes += a.total_bytes;
            }
            plan.access.layers = layers;
            plan.access.total = total;
            plan.access.resident = vec![false; n.net.layers.len()];
        }
        let utilization = plan.utilization(&n.net, &hw);
        let gops = performance(utilization, &hw);
        write(out, Box::into_raw(Box::new(RaPlan { plan, utilization, gops })), "out")
    })
}

/// # Safety
/// `plan` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ra_plan_free(plan: *mut RaPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `plan` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_plan_layer(plan: *const RaPlan, index: usize, out: *mut RaLayerResult) -> RaStatus {
    guard(|| {
        let p = &borrow(plan, "plan")?.plan;
        let n = p.choices.len();
        if index >= n {
            return Err(Fail(RaStatus::OutOfRange, format!("layer {index} of {n}")));
        }
        let (t, perf, a) = (p.choices[index], p.perf[index], p.access.layers[index]);
        let r = RaLayerResult {
            tm: t.tm,
            tn: t.tn,
            decomposed: p.decomposed[index],
            cycles: perf.cycles,
            utilization: perf.utilization,
            gops: perf.gops,
            input_bytes: a.input_bytes,
            weight_bytes: a.weight_bytes,
            output_bytes: a.output_bytes,
            total_bytes: a.total_bytes,
        };
        write(out, r, "out")
    })
}

/// # Safety
/// `plan` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_plan_summary(plan: *const RaPlan, out: *mut RaPlanSummary) -> RaStatus {
    guard(|| {
        let p = borrow(plan, "plan")?;
        let s = RaPlanSummary {
            layers: p.plan.choices.len(),
            total_cycles: p.plan.total_cycles,
            total_bytes: p.plan.total_bytes(),
            latency_s: p.plan.latency_s(),
            utilization: p.utilization,
            gops: p.gops,
        };
        write(out, s, "out")
    })
}

/// # Safety
/// `plan` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_plan_total_bytes(plan: *const RaPlan, out: *mut u64) -> RaStatus {
    guard(|| {
        let p = borrow(plan, "plan")?;
        write(out, p.plan.total_bytes(), "out")
    })
}

/// Throughput in Gops for a utilization at the given clock and MAC budget
/// (zero keeps the default).
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_performance_gops(
    utilization: f64,
    clock_mhz: f64,
    mac_budget: usize,
    out: *mut f64,
) -> RaStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&utilization) {
            return Err(Fail(RaStatus::InvalidArgument, format!("utilization {utilization} outside [0, 1]")));
        }
        let o = RaPlanOptions {
            clock_mhz,
            mac_budget,
            ..ra_plan_options_default()
        };
        let hw = hardware(&o)?;
        write(out, performance(utilization, &hw), "out")
    })
}

/// Tops/W for a throughput in Gops at a power in watts.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_energy_efficiency(gops: f64, power_w: f64, out: *mut f64) -> RaStatus {
    guard(|| {
        let e = energy_efficiency(gops, &EnergyParams { power_w })?;
        write(out, e, "out")
    })
}

/// Per-layer report as JSON. Release the string with [`ra_string_free`].
///
/// # Safety
/// `net` must be a live handle, `opts` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ra_report_json(
    net: *const RaNetwork,
    opts: *const RaPlanOptions,
    out: *mut *mut c_char,
) -> RaStatus {
    guard(|| {
        let n = borrow(net, "net")?;
        let o = opts.as_ref().copied().unwrap_or(ra_plan_options_default());
        let hw = hardware(&o)?;
        let json = analyze(&n.net, &hw, &analysis(&o))?.to_json();
        let s = CString::new(json).map_err(|_| Fail(RaStatus::Internal, "NUL in report".into()))?;
        write(out, s.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ra_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null after a
/// successful one. Valid until the next call into the library.
#[no_mangle]
pub extern "C" fn ra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
