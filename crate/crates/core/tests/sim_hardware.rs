use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ringaccel::cost::{Strategy, TilingChoice};
use ringaccel::verify::{simulate, simulate_layer, SimRequest};
use ringaccel::{HardwareConfig, LayerSpec, QKernels, QTensor, SimMachine, SimOptions};

#[test]
fn identical_seeds_give_identical_traces() {
    let net = ringaccel::net::resolve_network("ecnn-mini").unwrap();
    let req = SimRequest {
        seed: 42,
        trace: true,
        ofp: true,
        ppfs: true,
        ..SimRequest::default()
    };
    let hw = HardwareConfig::default();
    let a = simulate(&net, &hw, &req).unwrap();
    let b = simulate(&net, &hw, &req).unwrap();
    assert!(a.trace.len() > 100);
    assert_eq!(a.trace.to_text(), b.trace.to_text());
    assert_eq!(a.total, b.total);
    let c = simulate(&net, &hw, &SimRequest { seed: 43, ..req }).unwrap();
    assert_eq!(a.total.cycles, c.total.cycles);
}

#[test]
fn trace_lines_have_five_fields() {
    let layer = LayerSpec::conv3x3("t", 8, 4, 8, true);
    let req = SimRequest {
        trace: true,
        ofp: true,
        ..SimRequest::default()
    };
    let out = simulate_layer(&layer, &HardwareConfig::default(), &req).unwrap();
    for line in out.trace.to_text().lines() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 5, "{line}");
        f[0].parse::<u64>().unwrap();
        f[4].parse::<u64>().unwrap();
    }
}

/// After the first row of each pooled row pair, the pool unit emits one
/// result every two cycles.
#[test]
fn pool_emits_every_other_cycle() {
    let layer = LayerSpec::conv3x3("p", 16, 4, 32, true);
    let req = SimRequest {
        trace: true,
        ofp: true,
        ..SimRequest::default()
    };
    let out = simulate_layer(&layer, &HardwareConfig::default(), &req).unwrap();
    assert!(out.passed());
    let events: Vec<(u64, String)> = out
        .trace
        .events()
        .iter()
        .filter(|e| e.unit == "pool" && e.op == "out")
        .map(|e| (e.cycle, e.loc.split(':').next().unwrap().to_owned()))
        .collect();
    assert_eq!(events.len(), 64);
    let mut gaps = 0;
    for w in events.windows(2) {
        if w[0].1 == w[1].1 {
            assert_eq!(w[1].0 - w[0].0, 2, "{w:?}");
            gaps += 1;
        }
    }
    assert_eq!(gaps, 8 * 7);
    assert_eq!(out.total.pooled_pixels, 8 * 8 * 32);
}

#[test]
fn pooled_dram_volume_is_a_quarter() {
    let layer = LayerSpec::conv3x3("p", 16, 4, 32, true);
    let hw = HardwareConfig::default();
    let fused = simulate_layer(&layer, &hw, &SimRequest { ofp: true, ..SimRequest::default() }).unwrap();
    let plain = simulate_layer(&layer, &hw, &SimRequest::default()).unwrap();
    assert!(fused.passed() && plain.passed());
    assert_eq!(fused.total.dram_write_bytes * 4, plain.total.dram_write_bytes);
}

#[test]
fn kernel_load_is_32x_faster_with_banks() {
    let layer = LayerSpec::conv3x3("k", 8, 4, 32, false);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = QTensor::random(4, 8, 8, &mut rng);
    let k = QKernels::random(32, 4, 3, &mut rng);
    let t = TilingChoice::new(32, 4, Strategy::OutputReuse);
    let banked = HardwareConfig::default();
    let single = HardwareConfig {
        wsram_banks: 1,
        ..HardwareConfig::default()
    };
    let run = |hw: HardwareConfig| {
        let mut sim = SimMachine::new(hw, SimOptions::default()).unwrap();
        sim.run_standard_conv(&layer, &t, &x, &k, 8, false).unwrap()
    };
    let a = run(banked);
    let b = run(single);
    assert_eq!(a.output, b.output);
    assert_eq!(a.counters.kernel_load_cycles, 128 / 32);
    assert_eq!(b.counters.kernel_load_cycles, 128);
}

#[test]
fn reuse_registers_cut_steady_reads_by_two_thirds() {
    let layer = LayerSpec::conv3x3("r", 16, 4, 32, false);
    let hw = HardwareConfig::default();
    let on = simulate_layer(&layer, &hw, &SimRequest::default()).unwrap();
    let off = simulate_layer(&layer, &hw, &SimRequest { reuse_regs: false, ..SimRequest::default() }).unwrap();
    assert!(on.passed() && off.passed());
    assert_eq!(on.total.steady_lr_steps, off.total.steady_lr_steps);
    assert_eq!(on.total.steady_reads_per_step(), 1.0);
    assert_eq!(off.total.steady_reads_per_step(), 3.0);
    assert!(on.total.reuse_reg_hits > 0);
    assert_eq!(off.total.reuse_reg_hits, 0);
    assert!(on.total.fsram_reads_total() < off.total.fsram_reads_total());
}

#[test]
fn stride_two_steady_reads() {
    let layer = LayerSpec {
        stride: 2,
        ..LayerSpec::conv3x3("s2", 17, 4, 8, false)
    };
    let hw = HardwareConfig::default();
    let on = simulate_layer(&layer, &hw, &SimRequest::default()).unwrap();
    let off = simulate_layer(&layer, &hw, &SimRequest { reuse_regs: false, ..SimRequest::default() }).unwrap();
    assert!(on.passed() && off.passed());
    assert_eq!(on.total.steady_reads_per_step(), 4.0);
    assert_eq!(off.total.steady_reads_per_step(), 6.0);
}

#[test]
fn padding_never_touches_banks() {
    for p in [0, 1] {
        let layer = LayerSpec {
            pad: p,
            ..LayerSpec::conv3x3("h", 12, 3, 8, false)
        };
        let out = simulate_layer(&layer, &HardwareConfig::default(), &SimRequest::default()).unwrap();
        assert_eq!(out.total.halo_bank_accesses, 0);
        assert!(out.passed());
    }
}

#[test]
fn capacity_overflow_is_reported() {
    let layer = LayerSpec::conv3x3("big", 64, 4, 32, false);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = QTensor::random(4, 64, 64, &mut rng);
    let k = QKernels::random(32, 4, 3, &mut rng);
    let mut sim = SimMachine::new(HardwareConfig::default(), SimOptions::default()).unwrap();
    // 32 x 64 x 64 partial sums at 4 bytes exceed one buffer
    let t = TilingChoice::new(32, 4, Strategy::OutputReuse);
    assert!(matches!(
        sim.run_standard_conv(&layer, &t, &x, &k, 8, false),
        Err(ringaccel::Error::Capacity { .. })
    ));
    let fitted = simulate_layer(&layer, &HardwareConfig::default(), &SimRequest::default()).unwrap();
    assert!(fitted.passed());
}
