use thiserror::Error;

/// Errors raised by model construction, simulation and analysis.
///
/// Node and edge ids inside messages are 1-based, matching the external formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("network is disconnected: nodes {unreachable:?} cannot be reached from node 1")]
    Disconnected { unreachable: Vec<usize> },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("voltage collapse at node {node}: |V| = {vmag}")]
    VoltageCollapse { node: usize, vmag: f64 },

    #[error("non-finite value in state at step {step}")]
    NonFinite { step: usize },

    #[error("step budget exceeded: {steps} steps requested, limit is {limit}")]
    StepBudget { steps: usize, limit: usize },

    #[error("susceptance system is inconsistent: max residual {residual:.3e} exceeds {tolerance:.3e}")]
    InconsistentSusceptances { residual: f64, tolerance: f64 },

    #[error("equilibrium residual {residual:.3e} exceeds bound {bound:.3e}")]
    NotAnEquilibrium { residual: f64, bound: f64 },

    #[error("trajectory has {len} samples, at least 3 are needed")]
    TrajectoryTooShort { len: usize },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("config: {0}")]
    Config(String),
}

impl GridError {
    /// True for errors raised while integrating (collapse, non-finite state).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GridError::VoltageCollapse { .. } | GridError::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, GridError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GridError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
