use thiserror::Error;

use crate::expr::ExprError;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("running cost is not convex: {0}")]
    NonConvexCost(String),

    #[error("volatility vanishes (min |sigma| = {min_abs:.3e}); use the regularized solver path")]
    DegenerateVolatility { min_abs: f64 },

    #[error("resolvent parameter lambda = {lambda} must exceed lambda0 = {lambda0}")]
    ResolventParameter { lambda: f64, lambda0: f64 },

    #[error("time step {eps} too large; maximal admissible step is {max_eps}")]
    StepTooLarge { eps: f64, max_eps: f64 },

    #[error("nonlinear solve did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("regularization level {level}: {source}")]
    Level {
        level: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("L-infinity bound violated at node {node}: |y| = {value:.6e} > M = {bound:.6e}")]
    BoundViolated { node: usize, value: f64, bound: f64 },

    #[error("no finite L-infinity bound: lambda = {lambda} too small for the comparison argument")]
    NoBound { lambda: f64 },

    #[error("{excluded} of {total} simulated paths blew up (more than 1%)")]
    SimulationBlowup { excluded: usize, total: usize },

    #[error("singular linear system at row {0}")]
    Singular(usize),

    #[error(transparent)]
    Expr(#[from] ExprError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}
