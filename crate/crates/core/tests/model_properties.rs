use proptest::prelude::*;
use ringaccel::cost::{access, access_no_reuse, cycles_for_layer, network_access, performance, utilization, Strategy as Reuse, TilingChoice};
use ringaccel::dse::{enumerate_tilings, plan_network, select_optimal, PlanOptions};
use ringaccel::{builtin_network, Builtin, HardwareConfig, LayerKind, LayerSpec, NetworkSpec};

fn small_layer() -> impl Strategy<Value = LayerSpec> {
    (0usize..3, 1usize..=6, 1usize..=70, 1usize..=70, any::<bool>()).prop_map(|(kind, half, n, m, pool)| {
        let size = 2 * half;
        match kind {
            0 => LayerSpec::conv3x3("c", size, n, m, pool),
            1 => LayerSpec::pointwise("p", size, n, m),
            _ => LayerSpec::depthwise("d", size, n, 1),
        }
    })
}

fn hardware() -> impl Strategy<Value = HardwareConfig> {
    (1usize..=32, 1usize..=4, 0.0f64..1.0, 100.0f64..1000.0).prop_map(|(rows, cols, frac, mhz)| {
        let mut hw = HardwareConfig {
            pea_rows: rows,
            pea_cols: cols,
            ..HardwareConfig::default()
        };
        hw.mac_budget = 9 + ((hw.physical_macs() - 9) as f64 * frac) as usize;
        hw.with_clock_mhz(mhz)
    })
}

/// Exhaustive search written out independently of the library's search.
fn brute_force(l: &LayerSpec, hw: &HardwareConfig) -> (usize, usize) {
    let tn_max = match l.kind {
        LayerKind::StandardConv => hw.pea_cols,
        LayerKind::PointwiseConv => hw.fsram_banks,
        LayerKind::DepthwiseConv => 1,
    };
    let mut best: Option<(f64, u64, usize, usize)> = None;
    for tm in 1..=hw.pea_rows {
        for tn in 1..=tn_max {
            if tm * tn * l.kernel * l.kernel > hw.mac_budget {
                continue;
            }
            let t = TilingChoice::new(tm, tn, Reuse::OutputReuse);
            let gops = performance(utilization(l, &t, false, hw), hw);
            let bytes = access(l, &t, hw, false).unwrap().total_bytes;
            let better = match best {
                None => true,
                Some((g, b, _, _)) => gops > g || (gops == g && bytes < b),
            };
            if better {
                best = Some((gops, bytes, tm, tn));
            }
        }
    }
    let b = best.unwrap();
    (b.2, b.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn search_equals_brute_force(l in small_layer(), hw in hardware()) {
        let t = select_optimal(&l, &hw, Reuse::OutputReuse, false).unwrap();
        prop_assert_eq!((t.tm, t.tn), brute_force(&l, &hw));
    }

    #[test]
    fn every_candidate_is_feasible(l in small_layer(), hw in hardware()) {
        for t in enumerate_tilings(&l, &hw) {
            prop_assert!(t.tm * t.tn * l.kernel * l.kernel <= hw.mac_budget);
            prop_assert!(t.tm <= hw.pea_rows && t.tsize >= 1);
        }
    }

    #[test]
    fn clock_scales_gops_not_choice(l in small_layer(), hw in hardware(), k in 1.5f64..4.0) {
        let fast = hw.clone().with_clock_mhz(hw.clock_hz / 1e6 * k);
        let a = select_optimal(&l, &hw, Reuse::OutputReuse, false).unwrap();
        let b = select_optimal(&l, &fast, Reuse::OutputReuse, false).unwrap();
        prop_assert_eq!(a, b);
        let u = utilization(&l, &a, false, &hw);
        let ratio = performance(u, &fast) / performance(u, &hw);
        prop_assert!((ratio - k).abs() < 1e-9);
    }

    #[test]
    fn traffic_invariants(l in small_layer(), tm in 1usize..=32, tn in 1usize..=4) {
        let hw = HardwareConfig::default();
        let tn = if l.kind == LayerKind::DepthwiseConv { 1 } else { tn };
        let out = TilingChoice::new(tm, tn, Reuse::OutputReuse);
        let inp = TilingChoice::new(tm, tn, Reuse::InputReuse);
        let a = access(&l, &out, &hw, false).unwrap();
        let b = access(&l, &inp, &hw, false).unwrap();
        prop_assert_eq!(a.total_bytes, a.input_bytes + a.weight_bytes + a.output_bytes);
        prop_assert_eq!(b.total_bytes, b.input_bytes + b.weight_bytes + b.output_bytes);
        prop_assert!(a.output_bytes <= b.output_bytes);
        prop_assert!(a.total_bytes <= access_no_reuse(&l));
        if l.pool_after {
            prop_assert!(access(&l, &out, &hw, true).unwrap().total_bytes <= a.total_bytes);
        }
        prop_assert!(cycles_for_layer(&l, &out, false, &hw) >= 1);
        let u = utilization(&l, &out, false, &hw);
        prop_assert!(u > 0.0 && u <= 1.0);
    }

    #[test]
    fn plans_are_deterministic(l in small_layer()) {
        let net = NetworkSpec::new("one", vec![l]).unwrap();
        let hw = HardwareConfig::default();
        let opts = PlanOptions::default();
        prop_assert_eq!(plan_network(&net, &hw, opts).unwrap(), plan_network(&net, &hw, opts).unwrap());
    }
}

#[test]
fn ppfs_and_ofp_never_increase_totals() {
    let hw = HardwareConfig::default();
    for b in Builtin::ALL {
        let net = builtin_network(b);
        let plan = plan_network(&net, &hw, PlanOptions::default()).unwrap();
        for ofp in [false, true] {
            let base = network_access(&net, &plan.choices, ofp, false, &hw).unwrap();
            let ppfs = network_access(&net, &plan.choices, ofp, true, &hw).unwrap();
            assert!(ppfs.total.total_bytes <= base.total.total_bytes, "{}", net.name);
            assert!(!ppfs.resident.last().unwrap());
        }
        let plain = network_access(&net, &plan.choices, false, false, &hw).unwrap();
        let ofp = network_access(&net, &plan.choices, true, false, &hw).unwrap();
        assert!(ofp.total.total_bytes <= plain.total.total_bytes);
    }
}

#[test]
fn weights_read_once_under_output_reuse() {
    let hw = HardwareConfig::default();
    for b in Builtin::ALL {
        let net = builtin_network(b);
        let plan = plan_network(&net, &hw, PlanOptions::default()).unwrap();
        let params: u64 = net.layers.iter().map(LayerSpec::parameters).sum();
        assert_eq!(plan.access.total.weight_bytes, params, "{}", net.name);
    }
}

#[test]
fn builtin_chains_are_consistent() {
    for b in Builtin::ALL {
        let net = builtin_network(b);
        for w in net.layers.windows(2) {
            let (h, wd) = w[0].next_dims();
            assert_eq!((w[1].in_h, w[1].in_w, w[1].in_ch), (h, wd, w[0].out_ch));
        }
        assert_eq!(net, builtin_network(b));
    }
    assert_eq!(builtin_network(Builtin::Ecnn).layers.len(), 9);
    let vgg = builtin_network(Builtin::Vgg16);
    assert_eq!(vgg.layers.len(), 13);
    assert_eq!((vgg.layers[0].in_ch, vgg.layers[0].out_ch), (3, 64));
}
