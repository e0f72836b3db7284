use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the synthesis flow.
///
/// Infeasibility variants are recoverable inside the design-space loop (the
/// design point is skipped); everything else aborts the current operation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("layer {layer}: invalid field `{field}`: {message}")]
    Validation {
        layer: usize,
        field: &'static str,
        message: String,
    },

    #[error("model graph error: {0}")]
    Graph(String),

    #[error("layer {layer} ({kind}) does not carry weights")]
    UnsupportedLayer { layer: usize, kind: String },

    #[error("no hardware parameters configured for {0}")]
    MissingParameter(String),

    #[error("invalid hardware parameter: {0}")]
    InvalidParameter(String),

    #[error("ADC resolution {required} bits exceeds the supported maximum of {max} bits")]
    InfeasiblePrecision { required: u32, max: u32 },

    #[error("crossbar budget of {available} cannot hold one copy of every layer ({required} needed, short by {shortfall})")]
    InfeasibleBudget {
        available: u64,
        required: u64,
        shortfall: u64,
    },

    #[error("workload matrix has no positive entry")]
    DegenerateWorkload,

    #[error("peripheral power budget {budget:.6} W cannot supply the minimum of {required:.6} W")]
    InfeasiblePeripheralPower { budget: f64, required: f64 },

    #[error("no feasible macro partition: {0}")]
    InfeasiblePartition(String),

    #[error("dataflow compiler invariant violated: {0}")]
    CompilerInternal(String),

    #[error("scheduling deadlock with {unfinished} unfinished nodes; blocked frontier: {frontier:?}")]
    Deadlock {
        unfinished: usize,
        frontier: Vec<u32>,
    },

    #[error("no feasible design point: {0}")]
    GlobalInfeasibility(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for errors that reject a single design point rather than the run.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::InfeasiblePrecision { .. }
                | Error::InfeasibleBudget { .. }
                | Error::InfeasiblePeripheralPower { .. }
                | Error::InfeasiblePartition(_)
                | Error::GlobalInfeasibility(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
