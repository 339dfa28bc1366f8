use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed network file: {0}")]
    Parse(#[from] serde_json::Error),

    /// A layer or network violates a structural invariant.
    #[error("layer `{layer}`: {reason}")]
    Validation { layer: String, reason: String },

    /// A tiling choice is not admissible for the layer/hardware pair.
    #[error("layer `{layer}`: invalid tiling: {reason}")]
    Tiling { layer: String, reason: String },

    #[error("plan covers {plan} layers but network has {network}")]
    PlanMismatch { plan: usize, network: usize },

    #[error("no feasible tiling for layer `{0}`")]
    NoFeasibleTiling(String),

    #[error("invalid hardware configuration: {0}")]
    Hardware(String),

    #[error("non-positive power {0} W")]
    NonPositivePower(f64),

    #[error("tensor shape mismatch: {0}")]
    Shape(String),

    /// An on-chip memory would overflow; the tiler must split the work further.
    #[error("{unit} capacity exceeded: need {needed} bytes, have {available}")]
    Capacity {
        unit: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("simulation too large: {macs} MACs exceeds cap {cap}")]
    SimulationCap { macs: u64, cap: u64 },

    #[error("report encoding failed: {0}")]
    Report(String),

    #[error("unknown network `{0}`")]
    UnknownNetwork(String),
}

impl Error {
    pub(crate) fn validation(layer: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            layer: layer.to_owned(),
            reason: reason.into(),
        }
    }

    pub(crate) fn tiling(layer: &str, reason: impl Into<String>) -> Self {
        Error::Tiling {
            layer: layer.to_owned(),
            reason: reason.into(),
        }
    }
}
