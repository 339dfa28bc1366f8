use std::process::{Command, Output};

use ringaccel::report::Report;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringaccel")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analyze_ecnn_csv_total() {
    let o = cli(&["analyze", "--network", "ecnn", "--strategy", "output", "--format", "csv"]);
    assert!(o.status.success());
    let r = Report::from_csv(&stdout(&o)).unwrap();
    let t = r.total().unwrap();
    assert_eq!(t.mb, 5.003887);
    assert_eq!(t.total_bytes, 5_246_956);
    assert!(stdout(&o).starts_with("layer,tm,tn,strategy,cycles,utilization,gops,input_bytes,weight_bytes,output_bytes,total_bytes,mb\n"));
}

#[test]
fn analyze_ofp_ppfs_footnote() {
    let o = cli(&["analyze", "--network", "ecnn", "--strategy", "output", "--ofp", "--ppfs"]);
    let text = stdout(&o);
    let r = Report::from_csv(&text).unwrap();
    assert_eq!(r.total().unwrap().total_bytes, 2_770_284);
    assert!(text.contains("# output+ofp+ppfs total: computed 2.641949 MB, published 2.28 MB"), "{text}");
}

#[test]
fn analyze_vgg_json_with_deviation() {
    let o = cli(&["analyze", "--network", "vgg16", "--format", "json"]);
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert_eq!(r.total().unwrap().total_bytes, 87_030_232);
    assert!(r.notes.iter().any(|n| n.contains("published 90.29586 MB")));
}

#[test]
fn dse_table_and_budget_override() {
    let o = cli(&["dse", "--network", "ecnn", "--format", "json"]);
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert_eq!((r.rows[0].tm, r.rows[0].tn), (32, 3));
    assert!(r.rows[1..9].iter().all(|x| (x.tm, x.tn) == (32, 4)));
    assert!((r.rows[0].gops - 863.97).abs() < 0.01);
    let o = cli(&["dse", "--network", "ecnn", "--mac-budget", "9", "--format", "json"]);
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert!(r.rows[..9].iter().all(|x| (x.tm, x.tn) == (1, 1)));
    assert!(cli(&["dse", "--format", "table"]).status.success());
}

#[test]
fn forced_tiling_and_bad_flags() {
    let o = cli(&["analyze", "--tm", "16", "--tn", "2", "--format", "json"]);
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert!(r.rows[..9].iter().all(|x| (x.tm, x.tn) == (16, 2)));
    let bad = cli(&["analyze", "--tm", "64", "--tn", "4"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("invalid tiling"));
    assert!(!cli(&["analyze", "--network", "nope"]).status.success());
    assert!(!cli(&["analyze", "--strategy", "sideways"]).status.success());
    assert!(!cli(&["analyze", "--mac-budget", "5000"]).status.success());
}

#[test]
fn compare_and_energy() {
    let o = cli(&["analyze", "--compare", "--format", "json"]);
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert_eq!(r.rows.len(), 7);
    assert!(r.notes.iter().any(|n| n.contains("published ratio 533x")));
    let o = cli(&["analyze", "--power-w", "0.5545682", "--format", "json"]);
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert!(r.notes.iter().any(|n| n.starts_with("energy efficiency")));
    assert!(!cli(&["analyze", "--power-w", "0"]).status.success());
}

#[test]
fn simulate_layer_passes() {
    let o = cli(&["simulate", "--layer", "16x16x4x32k3s1p1", "--seed", "1"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("PASS oracle equivalence"));
    assert!(text.contains("cycles=258"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn simulate_without_reuse_registers() {
    let o = cli(&["simulate", "--layer", "16x16x4x32k3s1p1", "--disable-reuse-regs"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("PASS reuse-register read reduction: disabled/enabled steady reads: 16x16x4x32k3s1p1 3.000"));
}

#[test]
fn simulate_mini_network_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let o = cli(&["simulate", "--network", "ecnn-mini", "--seed", "7", "--trace", path.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    let trace = std::fs::read_to_string(&path).unwrap();
    assert!(trace.lines().count() > 100);
    assert!(trace.lines().all(|l| l.split(',').count() == 5));
}

#[test]
fn simulate_cap_and_bad_layer() {
    let o = cli(&["simulate", "--network", "vgg16", "--mac-cap", "1e6"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds cap"));
    assert!(!cli(&["simulate", "--layer", "16x16k3"]).status.success());
}

#[test]
fn builtins_and_config_files() {
    let o = cli(&["builtins"]);
    let text = stdout(&o);
    for name in ["ecnn", "vgg16", "mobilenet_v1", "ecnn-mini"] {
        assert!(text.contains(name));
    }
    let dump = stdout(&cli(&["builtins", "--dump", "ecnn"]));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ecnn.json");
    std::fs::write(&path, &dump).unwrap();
    let loaded = ringaccel::net::load_network(&path).unwrap();
    assert_eq!(loaded, ringaccel::builtin_network(ringaccel::Builtin::Ecnn));
    let o = cli(&["analyze", "--network", path.to_str().unwrap(), "--format", "json"]);
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert_eq!(r.total().unwrap().total_bytes, 5_246_956);
}

#[test]
fn network_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"name":"b","layers":[{"name":"x","kind":"standard_conv","in_h":6,"in_w":6,"in_ch":1,"out_ch":1,"kernel":3,"stride":2,"pad":0,"pool_after":false,"relu":true}]}"#,
    )
    .unwrap();
    let err = ringaccel::net::load_network(&bad).unwrap_err().to_string();
    assert!(err.contains("not divisible"), "{err}");
    let extra = dir.path().join("extra.json");
    std::fs::write(&extra, r#"{"name":"b","layers":[],"colour":1}"#).unwrap();
    assert!(ringaccel::net::load_network(&extra).is_err());
    let o = cli(&["analyze", "--network", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
