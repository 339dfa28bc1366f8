//! Tiling-factor search. Each layer is planned independently: the feasible
//! `(tm, tn)` pairs are scored by throughput, then by DRAM traffic, then by
//! the pair itself so the result never depends on evaluation order.

use serde::{Deserialize, Serialize};

use crate::cost::{
    self, access, access_no_reuse, cycles_for_layer, decomposition_applies, network_access,
    NetworkAccess, PerfReport, Strategy, TilingChoice,
};
use crate::error::{Error, Result};
use crate::hw::HardwareConfig;
use crate::net::{LayerKind, LayerSpec, NetworkSpec};

/// Smallest power-of-two segment count such that one channel's input strip
/// fits a feature-SRAM bank.
pub fn staging_tsize(layer: &LayerSpec, hw: &HardwareConfig) -> usize {
    let bank = hw.fsram_bank_bytes();
    let mut tsize = 1;
    while tsize < layer.in_h && layer.in_h.div_ceil(tsize) * layer.in_w > bank {
        tsize *= 2;
    }
    tsize
}

fn tn_limit(layer: &LayerSpec, hw: &HardwareConfig) -> usize {
    match layer.kind {
        LayerKind::StandardConv => hw.pea_cols,
        LayerKind::PointwiseConv => hw.fsram_banks,
        LayerKind::DepthwiseConv => 1,
    }
}

/// All admissible output-reuse tilings for the layer, in `(tm, tn)` order.
pub fn enumerate_tilings(layer: &LayerSpec, hw: &HardwareConfig) -> Vec<TilingChoice> {
    let taps = layer.kernel * layer.kernel;
    let tsize = staging_tsize(layer, hw);
    let mut out = Vec::new();
    for tm in 1..=hw.pea_rows {
        for tn in 1..=tn_limit(layer, hw) {
            if tm * tn * taps <= hw.mac_budget {
                out.push(TilingChoice::new(tm, tn, Strategy::OutputReuse).with_tsize(tsize));
            }
        }
    }
    out
}

/// Ranking key: fewer cycles (same MACs, so higher utilization and Gops),
/// then less traffic, then the smaller pair.
fn score(
    layer: &LayerSpec,
    t: &TilingChoice,
    decompose: bool,
    hw: &HardwareConfig,
) -> Result<(u64, u64, usize, usize)> {
    let cycles = cycles_for_layer(layer, t, decompose, hw);
    let bytes = access(layer, t, hw, false)?.total_bytes;
    Ok((cycles, bytes, t.tm, t.tn))
}

pub fn select_optimal(
    layer: &LayerSpec,
    hw: &HardwareConfig,
    strategy: Strategy,
    decompose: bool,
) -> Result<TilingChoice> {
    let mut best: Option<((u64, u64, usize, usize), TilingChoice)> = None;
    for t in enumerate_tilings(layer, hw) {
        let t = TilingChoice { strategy, ..t };
        let key = score(layer, &t, decompose, hw)?;
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, t));
        }
    }
    best.map(|(_, t)| t)
        .ok_or_else(|| Error::NoFeasibleTiling(layer.name.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsePlan {
    pub network: String,
    pub choices: Vec<TilingChoice>,
    pub decomposed: Vec<bool>,
    pub perf: Vec<PerfReport>,
    pub access: NetworkAccess,
    pub ofp: bool,
    pub ppfs: bool,
    pub total_cycles: u64,
}

impl DsePlan {
    pub fn total_bytes(&self) -> u64 {
        self.access.total.total_bytes
    }

    /// Latency over all layers at the configured clock.
    pub fn latency_s(&self) -> f64 {
        self.perf.iter().map(|p| p.latency_s).sum()
    }

    /// Network-level utilization: all useful MACs over all MAC-cycles.
    pub fn utilization(&self, net: &NetworkSpec, hw: &HardwareConfig) -> f64 {
        net.total_macs() as f64 / (hw.mac_budget as f64 * self.total_cycles as f64)
    }
}

/// Options for [`plan_network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOptions {
    pub strategy: Strategy,
    pub ofp: bool,
    pub ppfs: bool,
    /// Spread few-channel layers over the array columns.
    pub decompose: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            strategy: Strategy::OutputReuse,
            ofp: false,
            ppfs: false,
            decompose: false,
        }
    }
}

pub fn plan_network(net: &NetworkSpec, hw: &HardwareConfig, opts: PlanOptions) -> Result<DsePlan> {
    hw.validate()?;
    let choices = net
        .layers
        .iter()
        .map(|l| select_optimal(l, hw, opts.strategy, opts.decompose))
        .collect::<Result<Vec<_>>>()?;
    plan_with_choices(net, hw, choices, opts)
}

/// Evaluates a fixed per-layer tiling instead of searching for one.
pub fn plan_with_choices(
    net: &NetworkSpec,
    hw: &HardwareConfig,
    choices: Vec<TilingChoice>,
    opts: PlanOptions,
) -> Result<DsePlan> {
    let access = network_access(net, &choices, opts.ofp, opts.ppfs, hw)?;
    let decomposed: Vec<bool> = net
        .layers
        .iter()
        .map(|l| opts.decompose && decomposition_applies(l, hw))
        .collect();
    let perf: Vec<PerfReport> = net
        .layers
        .iter()
        .zip(&choices)
        .zip(&decomposed)
        .map(|((l, t), &d)| cost::perf_report(l, t, d, hw))
        .collect();
    let total_cycles = perf.iter().map(|p| p.cycles).sum();
    Ok(DsePlan {
        network: net.name.clone(),
        choices,
        decomposed,
        perf,
        access,
        ofp: opts.ofp,
        ppfs: opts.ppfs,
        total_cycles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub label: String,
    pub total_bytes: u64,
    pub mb: f64,
    /// No-reuse total divided by this row's total.
    pub ratio: f64,
    pub published_mb: Option<f64>,
    pub published_ratio: Option<f64>,
}

/// Published reference totals `(label, MB, ratio)` for the built-in networks.
fn published_rows(network: &str) -> &'static [(&'static str, f64, f64)] {
    match network {
        "ecnn" => &[
            ("no_reuse", 1261.41, 1.0),
            ("input", 10.72, 117.0),
            ("output", 5.003887, 252.0),
            ("input+ofp", 6.43, 196.0),
            ("output+ofp", 2.92, 432.0),
            ("output+ofp+ppfs", 2.28, 533.0),
        ],
        "vgg16" => &[
            ("output", 90.295860, 1.12),
            ("output+ofp", 78.620079, 1.29),
            ("output+ofp+ppfs", 72.332971, 1.4),
        ],
        "mobilenet_v1" => &[
            ("no_reuse", 2044.77, 1.0),
            ("output", 58.3, 35.0),
            ("output+ppfs", 23.98, 86.0),
        ],
        _ => &[],
    }
}

pub fn published_reference(network: &str, label: &str) -> Option<(f64, f64)> {
    published_rows(network)
        .iter()
        .find(|(l, _, _)| *l == label)
        .map(|&(_, mb, ratio)| (mb, ratio))
}

/// Traffic totals for the reuse variants, each planned with its own search.
pub fn compare_strategies(net: &NetworkSpec, hw: &HardwareConfig) -> Result<Vec<StrategyRow>> {
    let baseline: u64 = net.layers.iter().map(access_no_reuse).sum();
    let variants = [
        ("input", Strategy::InputReuse, false, false),
        ("output", Strategy::OutputReuse, false, false),
        ("input+ofp", Strategy::InputReuse, true, false),
        ("output+ofp", Strategy::OutputReuse, true, false),
        ("output+ppfs", Strategy::OutputReuse, false, true),
        ("output+ofp+ppfs", Strategy::OutputReuse, true, true),
    ];
    let row = |label: &str, bytes: u64| {
        let published = published_reference(&net.name, label);
        StrategyRow {
            label: label.to_owned(),
            total_bytes: bytes,
            mb: cost::mb_rounded(bytes),
            ratio: baseline as f64 / bytes.max(1) as f64,
            published_mb: published.map(|p| p.0),
            published_ratio: published.map(|p| p.1),
        }
    };
    let mut rows = vec![row("no_reuse", baseline)];
    for (label, strategy, ofp, ppfs) in variants {
        let opts = PlanOptions {
            strategy,
            ofp,
            ppfs,
            decompose: false,
        };
        let plan = plan_network(net, hw, opts)?;
        rows.push(row(label, plan.total_bytes()));
    }
    Ok(rows)
}
