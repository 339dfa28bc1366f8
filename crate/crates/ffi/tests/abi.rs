use std::ffi::{CStr, CString};
use std::ptr;

use ringaccel_ffi::*;

fn builtin(name: &str) -> *mut RaNetwork {
    let name = CString::new(name).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { ra_network_builtin(name.as_ptr(), &mut net) }, RaStatus::Ok);
    assert!(!net.is_null());
    net
}

fn last_error() -> String {
    let p = ra_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

#[test]
fn ecnn_plan_through_handles() {
    let net = builtin("ecnn");
    let mut n = 0;
    assert_eq!(unsafe { ra_network_layer_count(net, &mut n) }, RaStatus::Ok);
    assert_eq!(n, 9);

    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { ra_plan_network(net, ptr::null(), &mut plan) }, RaStatus::Ok);
    let mut first = RaLayerResult::default();
    assert_eq!(unsafe { ra_plan_layer(plan, 0, &mut first) }, RaStatus::Ok);
    assert_eq!((first.tm, first.tn, first.cycles), (32, 3, 65538));
    assert_eq!(first.total_bytes, 2_297_708);

    let mut total = 0;
    assert_eq!(unsafe { ra_plan_total_bytes(plan, &mut total) }, RaStatus::Ok);
    assert_eq!(total, 5_246_956);
    let mut s = RaPlanSummary::default();
    assert_eq!(unsafe { ra_plan_summary(plan, &mut s) }, RaStatus::Ok);
    assert_eq!((s.layers, s.total_bytes, s.total_cycles), (9, 5_246_956, 415_890));
    assert!(s.utilization > 0.0 && s.utilization <= 1.0);

    let mut r = RaLayerResult::default();
    assert_eq!(unsafe { ra_plan_layer(plan, 9, &mut r) }, RaStatus::OutOfRange);
    assert!(last_error().contains("layer 9"));
    unsafe {
        ra_plan_free(plan);
        ra_network_free(net);
    }
}

#[test]
fn options_change_traffic() {
    let net = builtin("ecnn");
    let total = |opts: RaPlanOptions| {
        let mut plan = ptr::null_mut();
        assert_eq!(unsafe { ra_plan_network(net, &opts, &mut plan) }, RaStatus::Ok);
        let mut t = 0;
        unsafe {
            ra_plan_total_bytes(plan, &mut t);
            ra_plan_free(plan);
        }
        t
    };
    let base = ra_plan_options_default();
    assert_eq!(total(RaPlanOptions { ofp: true, ..base }), 3_157_996);
    assert_eq!(total(RaPlanOptions { ofp: true, ppfs: true, ..base }), 2_770_284);
    assert_eq!(total(RaPlanOptions { ppfs: true, ..base }), 4_666_604);
    assert!(total(RaPlanOptions { strategy: RaStrategy::NoReuse, ..base }) > total(base));
    unsafe { ra_network_free(net) };
}

#[test]
fn forced_tiling_is_checked() {
    let net = builtin("ecnn");
    let opts = RaPlanOptions {
        tm: 64,
        tn: 4,
        ..ra_plan_options_default()
    };
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { ra_plan_network(net, &opts, &mut plan) }, RaStatus::Tiling);
    assert!(plan.is_null());
    assert!(!last_error().is_empty());
    unsafe { ra_network_free(net) };
}

#[test]
fn errors_are_reported() {
    let mut net = ptr::null_mut();
    let bad = CString::new("resnet").unwrap();
    assert_eq!(unsafe { ra_network_builtin(bad.as_ptr(), &mut net) }, RaStatus::UnknownNetwork);
    assert!(last_error().contains("resnet"));
    assert_eq!(unsafe { ra_network_builtin(ptr::null(), &mut net) }, RaStatus::NullArgument);
    let missing = CString::new("/nonexistent/net.json").unwrap();
    assert_eq!(unsafe { ra_network_load(missing.as_ptr(), &mut net) }, RaStatus::Io);

    let ok = builtin("vgg16");
    assert!(ra_last_error_message().is_null());
    assert_eq!(unsafe { ra_network_layer_count(ok, ptr::null_mut()) }, RaStatus::NullArgument);
    unsafe { ra_network_free(ok) };
    unsafe { ra_network_free(ptr::null_mut()) };
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    std::fs::write(&path, ringaccel::net::to_json(&ringaccel::builtin_network(ringaccel::Builtin::Ecnn))).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { ra_network_load(c.as_ptr(), &mut net) }, RaStatus::Ok);
    let mut macs = 0;
    assert_eq!(unsafe { ra_network_total_macs(net, &mut macs) }, RaStatus::Ok);
    assert_eq!(macs, ringaccel::builtin_network(ringaccel::Builtin::Ecnn).total_macs());
    unsafe { ra_network_free(net) };

    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(unsafe { ra_network_load(c.as_ptr(), &mut net) }, RaStatus::Parse);
}

#[test]
fn throughput_and_efficiency() {
    let mut g = 0.0;
    assert_eq!(unsafe { ra_performance_gops(1.0, 0.0, 0, &mut g) }, RaStatus::Ok);
    assert!((g - 1152.0).abs() < 1e-9);
    assert_eq!(unsafe { ra_performance_gops(1.0, 0.0, 168, &mut g) }, RaStatus::Ok);
    assert!((g - 168.0).abs() < 1e-9);
    assert_eq!(unsafe { ra_performance_gops(1.5, 0.0, 0, &mut g) }, RaStatus::InvalidArgument);
    let mut e = 0.0;
    assert_eq!(unsafe { ra_energy_efficiency(1152.0, 0.5545682, &mut e) }, RaStatus::Ok);
    assert!((e - 2.08).abs() < 0.005);
    assert_eq!(unsafe { ra_energy_efficiency(1.0, 0.0, &mut e) }, RaStatus::InvalidArgument);
}

#[test]
fn report_json_round_trips() {
    let net = builtin("ecnn-mini");
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ra_report_json(net, ptr::null(), &mut s) }, RaStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe {
        ra_string_free(s);
        ra_network_free(net);
    }
    let report = ringaccel::Report::from_json(&text).unwrap();
    assert_eq!(report.network, "ecnn-mini");
    assert_eq!(report.rows.len(), 10);
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(ra_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
