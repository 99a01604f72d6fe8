//! Noiseless least-squares testbed: problems, runs under every controller,
//! eigenbasis dynamics and the closed-form iteration bounds.

mod bounds;
mod dynamics;
mod problem;
mod ruil;
mod verify;

pub use bounds::{
    bound_b_limit, bound_crossing, bound_stochastic_bmax, bound_stochastic_dist, bound_stochastic_n,
    bound_t, BLimit, InitCase, Method, StochasticN, TheoryBounds,
};
pub use dynamics::{
    hat_dynamics_step, linreg_signal, run_linreg, LinRegTrajectory, Mode, RunOptions, StepRecord,
    DIVERGENCE_THRESHOLD,
};
pub use problem::{gen_problem, Conditioning, LinRegProblem};
pub use ruil::{estimate_ruil, ruil_fraction, RuilEstimate, RuilKind};
pub use verify::{verify_inequalities, Inequality, InequalityCheck, InequalityReport};

use numerics_core::NumericsError;
use stepsize_controllers::ControllerError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinRegError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
    #[error("index {index} out of range for {n} samples")]
    Index { index: usize, n: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("bound not applicable: {0}")]
    NotApplicable(String),
    #[error("unsupported optimizer for linear regression: {0}")]
    Unsupported(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, LinRegError>;
