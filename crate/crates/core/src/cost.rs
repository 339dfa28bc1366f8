//! Analytical cost model: DRAM traffic per reuse strategy, cycles,
//! utilization, throughput and energy efficiency.
//!
//! Traffic is counted at one byte per value. A layer's total access is the
//! sum of three `data x trips` products (input, weight, output). When the
//! tile factors do not divide the channel counts the trailing tile is
//! partially filled; its idle lanes cost cycles but not bytes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hw::HardwareConfig;
use crate::net::{LayerKind, LayerSpec, NetworkSpec};
use crate::sim::decompose::decompose_channels;

pub const BYTES_PER_MB: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Input tiles stay on chip; partial sums spill to DRAM.
    InputReuse,
    /// Partial sums stay on chip; each output is written once.
    OutputReuse,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::InputReuse => "input",
            Strategy::OutputReuse => "output",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TilingChoice {
    pub tm: usize,
    pub tn: usize,
    pub tsize: usize,
    pub strategy: Strategy,
}

impl TilingChoice {
    pub fn new(tm: usize, tn: usize, strategy: Strategy) -> Self {
        TilingChoice {
            tm,
            tn,
            tsize: 1,
            strategy,
        }
    }

    pub fn with_tsize(mut self, tsize: usize) -> Self {
        self.tsize = tsize;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessBreakdown {
    pub input_bytes: u64,
    pub weight_bytes: u64,
    pub output_bytes: u64,
    pub total_bytes: u64,
    pub passes_in: u64,
    pub passes_weight: u64,
    pub passes_out: u64,
}

impl AccessBreakdown {
    fn new(input: u64, weight: u64, output: u64, passes: (u64, u64, u64)) -> Self {
        AccessBreakdown {
            input_bytes: input,
            weight_bytes: weight,
            output_bytes: output,
            total_bytes: input + weight + output,
            passes_in: passes.0,
            passes_weight: passes.1,
            passes_out: passes.2,
        }
    }

    fn retotal(&mut self) {
        self.total_bytes = self.input_bytes + self.weight_bytes + self.output_bytes;
    }

    pub fn mb(&self) -> f64 {
        self.total_bytes as f64 / BYTES_PER_MB as f64
    }

    fn accumulate(&mut self, other: &AccessBreakdown) {
        self.input_bytes += other.input_bytes;
        self.weight_bytes += other.weight_bytes;
        self.output_bytes += other.output_bytes;
        self.passes_in += other.passes_in;
        self.passes_weight += other.passes_weight;
        self.passes_out += other.passes_out;
        self.retotal();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub cycles: u64,
    pub utilization: f64,
    pub gops: f64,
    pub latency_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub power_w: f64,
}

pub(crate) fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Input rows/cols touched by the layer's windows, padding included:
/// `S * (F - 1) + K`, i.e. `S*F + K - S`.
pub fn input_extent(layer: &LayerSpec) -> (usize, usize) {
    let (oh, ow) = layer.output_dims();
    let ext = |o: usize| layer.stride * (o - 1) + layer.kernel;
    (ext(oh), ext(ow))
}

/// Checks the tile factors against the array shape and MAC budget.
pub fn check_tiling(layer: &LayerSpec, t: &TilingChoice, hw: &HardwareConfig) -> Result<()> {
    let fail = |r: String| Err(Error::tiling(&layer.name, r));
    if t.tm == 0 || t.tn == 0 || t.tsize == 0 {
        return fail("tiling factors must be >= 1".into());
    }
    let taps = layer.kernel * layer.kernel;
    let tn_cap = match layer.kind {
        LayerKind::StandardConv => hw.pea_cols,
        LayerKind::PointwiseConv => hw.fsram_banks,
        LayerKind::DepthwiseConv => 1,
    };
    if t.tm > hw.pea_rows {
        return fail(format!("tm {} exceeds {} PEA rows", t.tm, hw.pea_rows));
    }
    if t.tn > tn_cap {
        return fail(format!("tn {} exceeds {tn_cap}", t.tn));
    }
    if t.tm * t.tn * taps > hw.mac_budget {
        return fail(format!(
            "tm x tn x K^2 = {} exceeds MAC budget {}",
            t.tm * t.tn * taps,
            hw.mac_budget
        ));
    }
    Ok(())
}

fn tile_passes(layer: &LayerSpec, t: &TilingChoice) -> (u64, u64) {
    match layer.kind {
        LayerKind::DepthwiseConv => (ceil_div(layer.out_ch, t.tm) as u64, 1),
        _ => (
            ceil_div(layer.out_ch, t.tm) as u64,
            ceil_div(layer.in_ch, t.tn) as u64,
        ),
    }
}

fn output_map_bytes(layer: &LayerSpec, pooled_branch: bool) -> u64 {
    let full = layer.output_pixels() * layer.out_ch as u64;
    if pooled_branch {
        full / 4
    } else {
        full
    }
}

/// Traffic for one layer under `t.strategy`. `pooled_branch` selects the
/// quarter-size output term used when pooling is fused on chip.
pub fn access(
    layer: &LayerSpec,
    t: &TilingChoice,
    hw: &HardwareConfig,
    pooled_branch: bool,
) -> Result<AccessBreakdown> {
    check_tiling(layer, t, hw)?;
    let (eh, ew) = input_extent(layer);
    let plane = (eh * ew) as u64;
    let n = layer.in_ch as u64;
    let (m_tiles, n_tiles) = tile_passes(layer, t);
    let out = output_map_bytes(layer, pooled_branch);
    let weight = layer.parameters();

    if layer.kind == LayerKind::DepthwiseConv {
        // channels are independent: no partial sums to spill or keep
        return Ok(AccessBreakdown::new(
            n * plane,
            weight,
            out,
            (m_tiles, m_tiles, m_tiles),
        ));
    }
    let bd = match t.strategy {
        Strategy::OutputReuse => AccessBreakdown::new(
            n * plane * m_tiles,
            weight,
            out,
            (m_tiles * n_tiles, m_tiles * n_tiles, m_tiles),
        ),
        Strategy::InputReuse => AccessBreakdown::new(
            n * plane,
            weight,
            out * 2 * n_tiles,
            (n_tiles, m_tiles * n_tiles, 2 * n_tiles * m_tiles),
        ),
    };
    Ok(bd)
}

pub fn access_output_reuse(
    layer: &LayerSpec,
    t: &TilingChoice,
    hw: &HardwareConfig,
) -> Result<AccessBreakdown> {
    let t = TilingChoice {
        strategy: Strategy::OutputReuse,
        ..*t
    };
    access(layer, &t, hw, false)
}

pub fn access_input_reuse(
    layer: &LayerSpec,
    t: &TilingChoice,
    hw: &HardwareConfig,
) -> Result<AccessBreakdown> {
    let t = TilingChoice {
        strategy: Strategy::InputReuse,
        ..*t
    };
    access(layer, &t, hw, false)
}

/// Baseline with no on-chip reuse: both operands fetched for every MAC and
/// each output written once.
pub fn access_no_reuse(layer: &LayerSpec) -> u64 {
    2 * layer.macs() + layer.output_pixels() * layer.out_ch as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkAccess {
    pub layers: Vec<AccessBreakdown>,
    pub total: AccessBreakdown,
    /// `resident[k]` is true when layer k's output stays in the feature SRAM.
    pub resident: Vec<bool>,
}

/// Whether layer `k`'s output can stay in a feature-SRAM buffer and be
/// consumed in place by layer `k + 1`.
///
/// The output must fit one buffer (the partner buffer holds the consumer's
/// products). A consumer running fused pooling writes its pooled results
/// back into the buffer holding its input, so its input cannot be resident.
pub fn ppfs_resident(
    layers: &[LayerSpec],
    k: usize,
    ofp: bool,
    hw: &HardwareConfig,
) -> bool {
    let Some(next) = layers.get(k + 1) else {
        return false;
    };
    let layer = &layers[k];
    let dram_out = output_map_bytes(layer, ofp && layer.pool_after);
    dram_out <= hw.fsram_bytes_per_buffer as u64 && !(ofp && next.pool_after)
}

pub fn network_access(
    net: &NetworkSpec,
    plan: &[TilingChoice],
    ofp: bool,
    ppfs: bool,
    hw: &HardwareConfig,
) -> Result<NetworkAccess> {
    if plan.len() != net.layers.len() {
        return Err(Error::PlanMismatch {
            plan: plan.len(),
            network: net.layers.len(),
        });
    }
    let mut layers = net
        .layers
        .iter()
        .zip(plan)
        .map(|(l, t)| access(l, t, hw, ofp && l.pool_after))
        .collect::<Result<Vec<_>>>()?;
    let mut resident = vec![false; layers.len()];
    if ppfs {
        for k in 0..layers.len().saturating_sub(1) {
            if !ppfs_resident(&net.layers, k, ofp, hw) {
                continue;
            }
            resident[k] = true;
            let l = &net.layers[k];
            let final_map = output_map_bytes(l, ofp && l.pool_after);
            let out = &mut layers[k];
            out.output_bytes = match plan[k].strategy {
                Strategy::OutputReuse => 0,
                Strategy::InputReuse if l.kind == LayerKind::DepthwiseConv => 0,
                // partial-sum spills still go to DRAM; only the final map stays
                Strategy::InputReuse => out.output_bytes - final_map,
            };
            out.retotal();
            let next = &mut layers[k + 1];
            next.input_bytes = 0;
            next.retotal();
        }
    }
    let mut total = AccessBreakdown::default();
    for l in &layers {
        total.accumulate(l);
    }
    Ok(NetworkAccess {
        layers,
        total,
        resident,
    })
}

/// True when the layer has fewer input channels than PEA columns, so
/// spreading channel x segment tasks over the columns helps.
pub fn decomposition_applies(layer: &LayerSpec, hw: &HardwareConfig) -> bool {
    layer.kind == LayerKind::StandardConv && layer.in_ch < hw.pea_cols
}

/// Splits `rows` into `segments` contiguous strips whose sizes differ by at
/// most one (larger strips first).
pub fn segment_rows(rows: usize, segments: usize) -> Vec<usize> {
    let segments = segments.clamp(1, rows.max(1));
    let base = rows / segments;
    let extra = rows % segments;
    (0..segments).map(|i| base + usize::from(i < extra)).collect()
}

pub fn cycles_for_layer(
    layer: &LayerSpec,
    t: &TilingChoice,
    decomposed: bool,
    hw: &HardwareConfig,
) -> u64 {
    let (oh, ow) = layer.output_dims();
    let pixels = (oh * ow) as u64;
    let overhead = hw.pass_overhead_cycles;
    let (m_tiles, n_tiles) = tile_passes(layer, t);
    if decomposed && decomposition_applies(layer, hw) {
        let seg = segment_rows(oh, t.tsize);
        let columns = decompose_channels(layer.in_ch, seg.len(), hw.pea_cols);
        let busiest = columns
            .iter()
            .map(|tasks| {
                tasks
                    .iter()
                    .map(|task| (seg[task.segment] * ow) as u64 + hw.decomp_task_fill_cycles)
                    .sum::<u64>()
            })
            .max()
            .unwrap_or(0);
        return m_tiles * busiest;
    }
    m_tiles * n_tiles * (pixels + overhead)
}

/// Cycles when every pass is split into `t.tsize` row strips, each paying
/// its own pipeline fill. Equals [`cycles_for_layer`] for `tsize == 1` and
/// for decomposed layers (which already charge per task).
pub fn segmented_cycles(
    layer: &LayerSpec,
    t: &TilingChoice,
    decomposed: bool,
    hw: &HardwareConfig,
) -> u64 {
    if decomposed && decomposition_applies(layer, hw) {
        return cycles_for_layer(layer, t, true, hw);
    }
    let (oh, ow) = layer.output_dims();
    let nseg = segment_rows(oh, t.tsize).len() as u64;
    let (m_tiles, n_tiles) = tile_passes(layer, t);
    m_tiles * n_tiles * ((oh * ow) as u64 + hw.pass_overhead_cycles * nseg)
}

/// Useful MAC-cycles divided by the MAC-cycles available over the layer.
pub fn utilization(
    layer: &LayerSpec,
    t: &TilingChoice,
    decomposed: bool,
    hw: &HardwareConfig,
) -> f64 {
    let cycles = cycles_for_layer(layer, t, decomposed, hw);
    layer.macs() as f64 / (hw.mac_budget as f64 * cycles as f64)
}

/// Computation performance in Gops: two ops (multiply + add) per MAC.
pub fn performance(util: f64, hw: &HardwareConfig) -> f64 {
    2.0 * hw.mac_budget as f64 * util * hw.clock_hz / 1.0e9
}

/// Energy efficiency in Tops/W.
pub fn energy_efficiency(perf_gops: f64, e: &EnergyParams) -> Result<f64> {
    if e.power_w.is_nan() || e.power_w <= 0.0 {
        return Err(Error::NonPositivePower(e.power_w));
    }
    Ok(perf_gops / 1000.0 / e.power_w)
}

pub fn perf_report(
    layer: &LayerSpec,
    t: &TilingChoice,
    decomposed: bool,
    hw: &HardwareConfig,
) -> PerfReport {
    let cycles = cycles_for_layer(layer, t, decomposed, hw);
    let util = utilization(layer, t, decomposed, hw);
    PerfReport {
        cycles,
        utilization: util,
        gops: performance(util, hw),
        latency_s: cycles as f64 / hw.clock_hz,
    }
}

/// Round-half-even of `bytes / 2^20` to six decimals, returned in millionths.
pub fn mb_micro(bytes: u64) -> u64 {
    let num = bytes as u128 * 1_000_000;
    let den = BYTES_PER_MB as u128;
    let q = num / den;
    let r = num % den;
    let q = match (2 * r).cmp(&den) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal if q % 2 == 1 => q + 1,
        _ => q,
    };
    q as u64
}

pub fn mb_rounded(bytes: u64) -> f64 {
    mb_micro(bytes) as f64 / 1.0e6
}
