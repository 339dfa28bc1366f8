//! Modeling toolkit for a tiled CNN inference accelerator with a ring
//! streaming dataflow: analytical DRAM-traffic and cycle model, tiling
//! search, and a bank-level functional simulator checked against a naive
//! quantized reference.

pub mod cost;
pub mod dse;
pub mod error;
pub mod hw;
pub mod net;
pub mod oracle;
pub mod quant;
pub mod report;
pub mod sim;
pub mod verify;

pub use cost::{AccessBreakdown, EnergyParams, PerfReport, Strategy, TilingChoice};
pub use dse::{plan_network, DsePlan, PlanOptions};
pub use error::{Error, Result};
pub use hw::HardwareConfig;
pub use net::{builtin_network, Builtin, LayerKind, LayerSpec, NetworkSpec};
pub use quant::{QKernels, QTensor, QuantMode};
pub use report::{Report, ReportRow};
pub use sim::{SimCounters, SimMachine, SimOptions};
