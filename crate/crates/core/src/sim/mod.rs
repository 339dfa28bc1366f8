//! Functional, bank-level simulator of the accelerator datapath.
//!
//! Values flow through the modelled memories (feature SRAM ping-pong
//! buffers, weight SRAM, reuse registers, feature- and pooling-reuse SRAM)
//! and every access is counted. DRAM is a byte counter with no timing.

pub mod counters;
pub mod decompose;
mod layer;
pub mod network;
pub mod pool;
pub mod reuse;
pub mod ring;
pub mod sram;
pub mod trace;
mod window;

use serde::{Deserialize, Serialize};

use crate::cost::TilingChoice;
use crate::error::{Error, Result};
use crate::hw::HardwareConfig;
use crate::net::{LayerKind, LayerSpec};
use crate::quant::{QKernels, QTensor, QuantMode};

pub use counters::SimCounters;
pub use decompose::{decompose_channels, Task};
pub use network::{run_network, NetworkRun};
pub use pool::run_onfly_pool;
pub use ring::{schedule_ring, RingStep, Shift};
pub use trace::{Trace, TraceEvent};

use layer::LayerJob;
use sram::{FeatureBuffer, LineStore, WeightSram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub reuse_regs: bool,
    pub quant_mode: QuantMode,
    /// Fuse 2x2 pooling into single-layer runs of pooled layers.
    pub ofp: bool,
    pub trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            reuse_regs: true,
            quant_mode: QuantMode::PostAccumulation,
            ofp: true,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRun {
    /// Conv output, or the pooled map when pooling was fused.
    pub output: QTensor,
    pub counters: SimCounters,
    /// Number of spatial segments actually used.
    pub tsize: usize,
    pub pooled: bool,
}

#[derive(Debug, Clone)]
pub struct SimMachine {
    hw: HardwareConfig,
    opts: SimOptions,
    fsram: [FeatureBuffer; 2],
    /// Buffer holding the current layer's input.
    active: usize,
    wsram: WeightSram,
    frsram: LineStore,
    prsram: LineStore,
    trace: Trace,
    clock: u64,
}

impl SimMachine {
    pub fn new(hw: HardwareConfig, opts: SimOptions) -> Result<Self> {
        hw.validate()?;
        let bank = hw.fsram_bank_bytes();
        Ok(SimMachine {
            fsram: [
                FeatureBuffer::new(hw.fsram_banks, bank),
                FeatureBuffer::new(hw.fsram_banks, bank),
            ],
            active: 0,
            wsram: WeightSram::new(hw.wsram_banks, hw.wsram_bank_bytes()),
            frsram: LineStore::new("feature-reuse SRAM", hw.frsram_bytes),
            prsram: LineStore::new("pooling-reuse SRAM", hw.prsram_bytes),
            trace: Trace::new(opts.trace),
            clock: 0,
            hw,
            opts,
        })
    }

    pub fn hw(&self) -> &HardwareConfig {
        &self.hw
    }

    pub fn options(&self) -> SimOptions {
        self.opts
    }

    /// Global cycle count over everything run so far.
    pub fn cycle(&self) -> u64 {
        self.clock
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Trace {
        std::mem::replace(&mut self.trace, Trace::new(self.opts.trace))
    }

    fn single(
        &mut self,
        layer: &LayerSpec,
        t: &TilingChoice,
        input: &QTensor,
        kernels: &QKernels,
        shift: u32,
        decomposed: bool,
    ) -> Result<LayerRun> {
        let job = LayerJob {
            layer,
            t: *t,
            kernels,
            shift,
            input: Some(input),
            input_exp: input.scale_exp,
            out_resident: false,
            fuse_pool: self.opts.ofp,
            decomposed,
        };
        self.execute(&job)
    }

    fn expect_kind(layer: &LayerSpec, kind: LayerKind) -> Result<()> {
        if layer.kind != kind {
            return Err(Error::Shape(format!("layer `{}` is {}, expected {kind}", layer.name, layer.kind)));
        }
        Ok(())
    }

    pub fn run_standard_conv(
        &mut self,
        layer: &LayerSpec,
        t: &TilingChoice,
        input: &QTensor,
        kernels: &QKernels,
        shift: u32,
        decomposed: bool,
    ) -> Result<LayerRun> {
        Self::expect_kind(layer, LayerKind::StandardConv)?;
        self.single(layer, t, input, kernels, shift, decomposed)
    }

    pub fn run_pointwise(
        &mut self,
        layer: &LayerSpec,
        t: &TilingChoice,
        input: &QTensor,
        kernels: &QKernels,
        shift: u32,
    ) -> Result<LayerRun> {
        Self::expect_kind(layer, LayerKind::PointwiseConv)?;
        self.single(layer, t, input, kernels, shift, false)
    }

    pub fn run_depthwise(
        &mut self,
        layer: &LayerSpec,
        t: &TilingChoice,
        input: &QTensor,
        kernels: &QKernels,
        shift: u32,
    ) -> Result<LayerRun> {
        Self::expect_kind(layer, LayerKind::DepthwiseConv)?;
        self.single(layer, t, input, kernels, shift, false)
    }

    /// Runs any layer kind.
    pub fn run_layer(
        &mut self,
        layer: &LayerSpec,
        t: &TilingChoice,
        input: &QTensor,
        kernels: &QKernels,
        shift: u32,
        decomposed: bool,
    ) -> Result<LayerRun> {
        self.single(layer, t, input, kernels, shift, decomposed)
    }
}
