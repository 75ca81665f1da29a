use thiserror::Error;

/// Errors surfaced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("adjacency graph is not connected ({missing} states unreachable from state 0)")]
    NotConnected { missing: usize },

    #[error("chain is periodic with period {period}; stationary analysis requires aperiodicity")]
    Periodic { period: u64 },

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations (tol {tol:.3e})")]
    NotConverged {
        residual: f64,
        iterations: u64,
        tol: f64,
    },

    #[error("step count {requested} exceeds the configured cap {cap} (override with MIXLAB_CAP_STEPS)")]
    StepCapExceeded { requested: u64, cap: u64 },

    #[error("work budget exceeded: {work} elementary operations requested, cap {cap}")]
    WorkBudgetExceeded { work: u128, cap: u128 },

    #[error("bound is vacuous: {0}")]
    VacuousBound(String),

    #[error("sampled pair is not adjacent (distance {distance})")]
    NonAdjacentPair { distance: u64 },

    #[error("start state is outside the interior of the restricted set")]
    OutsideRestrictedSet,

    #[error("insufficient samples: {got} provided, {needed} needed ({context})")]
    InsufficientSamples {
        got: usize,
        needed: usize,
        context: String,
    },

    #[error("ODE integration unstable: monotonicity violated by {violation:.3e} at t={t:.4}; retry with a smaller dt")]
    OdeUnstable { violation: f64, t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not mixed within the step cap {cap} (distance {distance:.6} at the cap)")]
    NotMixedWithinCap { cap: u64, distance: f64 },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
