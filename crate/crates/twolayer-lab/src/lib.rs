//! Two-layer ReLU network with a fixed sign output layer: kernels,
//! activation-pattern sets, training under every controller, and the
//! constants and checks of the over-parameterized analysis.

mod bounds;
mod data;
mod gram;
mod net;
mod train;
mod verify;

pub use bounds::{
    bounds_and_constants, condition2_b, condition2_threshold, dynamical_system_n, square_rule_drift_bound, BoundInputs,
    TwoLayerBounds, C2_GAUSSIAN,
};
pub use data::{gen_dataset, DataSet};
pub use gram::{gram_empirical, gram_info, gram_infinity, pattern_sets, ActivationBits, GramInfo, PatternSets};
pub use net::{init_net, TwoLayerNet};
pub use train::{train, NetStepRecord, NetTrajectory, TrainMode, TrainOptions, DIVERGENCE_THRESHOLD};
pub use verify::{
    condition2_monte_carlo, dynamical_property_holds, sandwich_check, verify_suite, CheckRow, McConfig, McOutcome,
    SandwichCheck, SuiteInputs, SuiteReport,
};

use numerics_core::NumericsError;
use stepsize_controllers::ControllerError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TwoLayerError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, TwoLayerError>;
