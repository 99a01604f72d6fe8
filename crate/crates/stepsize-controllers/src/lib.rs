//! Adaptive stepsize state machines.
//!
//! A [`ControllerState`] accumulates a nonnegative signal into the denominator
//! `b` and exposes `eta / b`. Signals are computed by the testbeds; this crate
//! never looks at a model.

mod adam;

pub use adam::{AdamKind, AdamState, ADAM_EPSILON, BETA1, BETA2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("invalid signal {0}: must be finite and nonnegative")]
    InvalidSignal(f64),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, ControllerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    /// b² += α|loss − c|
    AdaLoss,
    /// b² += ‖grad‖²
    AdaGradNorm,
    /// b² += α²√n‖y − u‖²
    SquareRuleLoss,
    /// b += α√n‖y − u‖
    NormRuleLoss,
    Constant,
    /// b = b₀ + c_s√t
    DecaySqrt,
}

impl ControllerKind {
    /// Kinds whose `b` grows with the signal.
    pub fn is_accumulating(self) -> bool {
        matches!(self, Self::AdaLoss | Self::AdaGradNorm | Self::SquareRuleLoss | Self::NormRuleLoss)
    }
}

/// Default decay coefficient for [`ControllerKind::DecaySqrt`].
pub const DEFAULT_DECAY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub kind: ControllerKind,
    pub b: f64,
    pub b0: f64,
    pub eta: f64,
    pub alpha: f64,
    pub c: f64,
    pub step_index: u64,
    pub c_s: f64,
}

impl ControllerState {
    pub fn new(kind: ControllerKind, b0: f64, eta: f64) -> Result<Self> {
        positive("b0", b0)?;
        positive("eta", eta)?;
        Ok(Self { kind, b: b0, b0, eta, alpha: 1.0, c: 0.0, step_index: 0, c_s: DEFAULT_DECAY })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_offset(mut self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(ControllerError::InvalidParameter { name: "c", value: c });
        }
        self.c = c;
        Ok(self)
    }

    pub fn with_decay(mut self, c_s: f64) -> Result<Self> {
        if !(c_s.is_finite() && c_s >= 0.0) {
            return Err(ControllerError::InvalidParameter { name: "c_s", value: c_s });
        }
        self.c_s = c_s;
        Ok(self)
    }

    /// Fold one signal into `b`. The meaning of `signal` depends on the kind;
    /// see [`ControllerKind`].
    pub fn accumulate_signal(self, signal: f64) -> Result<Self> {
        if !(signal.is_finite() && signal >= 0.0) {
            return Err(ControllerError::InvalidSignal(signal));
        }
        let mut next = self;
        next.step_index += 1;
        next.b = match self.kind {
            ControllerKind::AdaLoss | ControllerKind::AdaGradNorm | ControllerKind::SquareRuleLoss => {
                (self.b * self.b + signal).sqrt()
            }
            ControllerKind::NormRuleLoss => self.b + signal,
            ControllerKind::Constant => self.b,
            ControllerKind::DecaySqrt => self.b0 + self.c_s * (next.step_index as f64).sqrt(),
        };
        Ok(next)
    }

    /// `η / b` with the current (already updated) `b`.
    pub fn effective_stepsize(&self) -> f64 {
        self.eta / self.b
    }

    /// `α|loss − c|`
    pub fn loss_signal(&self, loss: f64) -> f64 {
        self.alpha * (loss - self.c).abs()
    }
}

/// Either a scalar `b` controller or an Adam-family state.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Scalar(ControllerState),
    Adam(AdamState),
}

impl Optimizer {
    /// Current stepsize denominator (`b_t` for AdamLoss, `b₀` for AdamSqrt).
    pub fn b(&self) -> f64 {
        match self {
            Self::Scalar(s) => s.b,
            Self::Adam(a) => a.eta_or_b,
        }
    }

    pub fn effective_stepsize(&self) -> f64 {
        match self {
            Self::Scalar(s) => s.effective_stepsize(),
            Self::Adam(a) => a.current_eta(),
        }
    }

    pub fn is_accumulating(&self) -> bool {
        match self {
            Self::Scalar(s) => s.kind.is_accumulating(),
            Self::Adam(a) => a.kind == AdamKind::AdamLoss,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ControllerError::InvalidParameter { name, value })
    }
}
