use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("unknown input slot {slot} (layout has {arity} slots)")]
    UnknownInputSlot { slot: usize, arity: usize },

    #[error("derivative order {order} exceeds the supported nesting depth {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("input point has {got} coordinates, network layout expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("checkpoint schema error: {0}")]
    CheckpointSchema(String),

    #[error("checkpoint parse error: {0}")]
    CheckpointParse(#[from] serde_json::Error),

    #[error("invalid network spec: {0}")]
    InvalidNetworkSpec(String),

    #[error("invalid problem definition: {0}")]
    InvalidProblem(String),

    #[error("unknown sampling strategy `{0}`")]
    UnknownStrategy(String),

    #[error("adaptive sampling requires a network to rank residuals")]
    AdaptiveNeedsNetwork,

    #[error("parameter `{0}` is not a network input")]
    UnknownParameter(String),

    #[error("invalid optimizer config: {0}")]
    InvalidOptimizerConfig(String),

    #[error("loss evaluation produced a non-finite value in term `{0}`")]
    NonFiniteLoss(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("linear solver did not converge (residual {residual:.3e} after {iterations} iterations)")]
    LinearSolve { residual: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, CoreError>;
