//! Simulator runs with built-in cross-checks: oracle equivalence, counter
//! reconciliation against the closed forms, and reuse-register efficacy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::segmented_cycles;
use crate::dse::{plan_network, DsePlan, PlanOptions};
use crate::error::{Error, Result};
use crate::hw::HardwareConfig;
use crate::net::{LayerKind, LayerSpec, NetworkSpec};
use crate::oracle::network_ref;
use crate::quant::{QKernels, QTensor, QuantMode};
use crate::sim::{run_network, NetworkRun, SimCounters, SimMachine, SimOptions, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_owned(),
            passed,
            detail,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRequest {
    pub seed: u64,
    pub reuse_regs: bool,
    pub quant_mode: QuantMode,
    pub ofp: bool,
    pub ppfs: bool,
    pub decompose: bool,
    pub trace: bool,
    /// Refuse networks with more MACs than this.
    pub mac_cap: u64,
    /// Right shift applied after every layer.
    pub shift: u32,
}

impl Default for SimRequest {
    fn default() -> Self {
        SimRequest {
            seed: 0,
            reuse_regs: true,
            quant_mode: QuantMode::PostAccumulation,
            ofp: false,
            ppfs: false,
            decompose: false,
            trace: false,
            mac_cap: 2_000_000_000,
            shift: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub network: String,
    pub checks: Vec<Check>,
    pub layers: Vec<(String, SimCounters)>,
    pub total: SimCounters,
    pub trace: Trace,
}

impl SimOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Random input and kernels for `net`, drawn in layer order from one seed.
pub fn random_operands(net: &NetworkSpec, seed: u64) -> (QTensor, Vec<QKernels>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = &net.layers[0];
    let input = QTensor::random(first.in_ch, first.in_h, first.in_w, &mut rng);
    let weights = net
        .layers
        .iter()
        .map(|l| {
            let planes = if l.kind == LayerKind::DepthwiseConv { 1 } else { l.in_ch };
            QKernels::random(l.out_ch, planes, l.kernel, &mut rng)
        })
        .collect();
    (input, weights)
}

fn execute(
    net: &NetworkSpec,
    plan: &DsePlan,
    hw: &HardwareConfig,
    req: &SimRequest,
    reuse_regs: bool,
    input: &QTensor,
    weights: &[QKernels],
) -> Result<(NetworkRun, Trace)> {
    let opts = SimOptions {
        reuse_regs,
        quant_mode: req.quant_mode,
        ofp: req.ofp,
        trace: req.trace,
    };
    let mut sim = SimMachine::new(hw.clone(), opts)?;
    let shifts = vec![req.shift; net.layers.len()];
    let run = run_network(&mut sim, net, plan, input, weights, &shifts)?;
    Ok((run, sim.take_trace()))
}

/// Whether the layer streams a sliding window through the reuse registers.
fn uses_window(l: &LayerSpec) -> bool {
    l.kind == LayerKind::StandardConv && l.kernel > l.stride
}

pub fn simulate(net: &NetworkSpec, hw: &HardwareConfig, req: &SimRequest) -> Result<SimOutcome> {
    let macs = net.total_macs();
    if macs > req.mac_cap {
        return Err(Error::SimulationCap { macs, cap: req.mac_cap });
    }
    let plan = plan_network(
        net,
        hw,
        PlanOptions {
            ofp: req.ofp,
            ppfs: req.ppfs,
            decompose: req.decompose,
            ..PlanOptions::default()
        },
    )?;
    let (input, weights) = random_operands(net, req.seed);
    let (run, trace) = execute(net, &plan, hw, req, req.reuse_regs, &input, &weights)?;
    let shifts = vec![req.shift; net.layers.len()];
    let want = network_ref(net, &input, &weights, &shifts, req.quant_mode)?;

    let mut checks = Vec::new();
    let diffs = run.output.data.iter().zip(&want.data).filter(|(a, b)| a != b).count();
    checks.push(Check::new(
        "oracle equivalence",
        run.output == want,
        format!("{} output values, {diffs} differ", want.len()),
    ));

    let mut bad_bytes = Vec::new();
    let mut bad_cycles = Vec::new();
    for (k, l) in net.layers.iter().enumerate() {
        let c = &run.layers[k];
        let a = &plan.access.layers[k];
        let got = (c.dram_input_bytes, c.dram_weight_bytes, c.dram_output_bytes);
        let exp = (a.input_bytes, a.weight_bytes, a.output_bytes);
        if got != exp {
            bad_bytes.push(format!("{} sim {got:?} model {exp:?}", l.name));
        }
        let t = plan.choices[k].with_tsize(run.tsizes[k]);
        let model = segmented_cycles(l, &t, plan.decomposed[k], hw);
        if c.cycles != model {
            bad_cycles.push(format!("{} sim {} model {model}", l.name, c.cycles));
        }
    }
    checks.push(Check::new(
        "dram bytes reconcile",
        bad_bytes.is_empty(),
        if bad_bytes.is_empty() {
            format!("{} B total, equals closed form", run.total.dram_total_bytes())
        } else {
            bad_bytes.join("; ")
        },
    ));
    checks.push(Check::new(
        "cycles reconcile",
        bad_cycles.is_empty(),
        if bad_cycles.is_empty() {
            format!("{} cycles, equals closed form (segments {:?})", run.total.cycles, run.tsizes)
        } else {
            bad_cycles.join("; ")
        },
    ));
    checks.push(Check::new(
        "no padding in SRAM",
        run.total.halo_bank_accesses == 0,
        format!("{} bank accesses to padding coordinates", run.total.halo_bank_accesses),
    ));

    let windowed: Vec<usize> = (0..net.layers.len())
        .filter(|&k| uses_window(&net.layers[k]) && run.layers[k].steady_lr_steps > 0)
        .collect();
    if !windowed.is_empty() {
        let mut bad = Vec::new();
        for &k in &windowed {
            let l = &net.layers[k];
            let per = run.layers[k].steady_reads_per_step();
            let exp = if req.reuse_regs { l.stride * l.stride } else { l.kernel * l.stride };
            if per != exp as f64 {
                bad.push(format!("{} {per} vs {exp}", l.name));
            }
        }
        checks.push(Check::new(
            "steady-row reads per step",
            bad.is_empty(),
            if bad.is_empty() {
                format!("reuse registers {}", if req.reuse_regs { "on" } else { "off" })
            } else {
                bad.join("; ")
            },
        ));
        if !req.reuse_regs {
            let on = SimRequest { trace: false, ..*req };
            let (with, _) = execute(net, &plan, hw, &on, true, &input, &weights)?;
            let mut bad = Vec::new();
            let mut ratios = Vec::new();
            for &k in &windowed {
                let l = &net.layers[k];
                let ratio = run.layers[k].steady_reads_per_step() / with.layers[k].steady_reads_per_step();
                ratios.push(format!("{} {ratio:.3}", l.name));
                if ratio != l.kernel as f64 / l.stride as f64 {
                    bad.push(l.name.clone());
                }
            }
            checks.push(Check::new(
                "reuse-register read reduction",
                bad.is_empty(),
                format!("disabled/enabled steady reads: {}", ratios.join(", ")),
            ));
        }
    }

    Ok(SimOutcome {
        network: net.name.clone(),
        checks,
        layers: net.layers.iter().map(|l| l.name.clone()).zip(run.layers).collect(),
        total: run.total,
        trace,
    })
}

/// Simulates a single layer as a one-layer network.
pub fn simulate_layer(layer: &LayerSpec, hw: &HardwareConfig, req: &SimRequest) -> Result<SimOutcome> {
    let net = NetworkSpec::new(&layer.name, vec![layer.clone()])?;
    simulate(&net, hw, req)
}
