use crate::{positive, ControllerError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdamKind {
    /// Fixed step η.
    Adam,
    /// η_t = 1/√b_t with b_t = b_{t−1} + α·loss.
    AdamLoss,
    /// η_t = 1/√(b₀² + t).
    AdamSqrt,
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.99;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub kind: AdamKind,
    pub m1: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub t: u64,
    /// η for `Adam`, the running b_t for `AdamLoss`, b₀ for `AdamSqrt`.
    pub eta_or_b: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(kind: AdamKind, dim: usize, eta_or_b: f64) -> Result<Self> {
        positive("eta_or_b", eta_or_b)?;
        Ok(Self {
            kind,
            m1: vec![0.0; dim],
            v: vec![0.0; dim],
            beta1: BETA1,
            beta2: BETA2,
            t: 0,
            eta_or_b,
            alpha: 1.0,
            epsilon: ADAM_EPSILON,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    /// Step scale for the most recent step (before any step: the initial value).
    pub fn current_eta(&self) -> f64 {
        match self.kind {
            AdamKind::Adam => self.eta_or_b,
            AdamKind::AdamLoss => 1.0 / self.eta_or_b.sqrt(),
            AdamKind::AdamSqrt => 1.0 / (self.eta_or_b * self.eta_or_b + self.t as f64).sqrt(),
        }
    }

    /// Advance the moments with `grad` and return the update direction
    /// `−η_t m̂/√(v̂ + ε)`. `loss_value` only matters for `AdamLoss`.
    pub fn step(&mut self, grad: &[f64], loss_value: f64) -> Result<Vec<f64>> {
        if grad.len() != self.m1.len() {
            return Err(ControllerError::InvalidInput(format!(
                "gradient length {} != state dimension {}",
                grad.len(),
                self.m1.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(ControllerError::InvalidInput("non-finite gradient".into()));
        }
        if self.kind == AdamKind::AdamLoss && !(loss_value.is_finite() && loss_value >= 0.0) {
            return Err(ControllerError::InvalidSignal(loss_value));
        }
        self.t += 1;
        if self.kind == AdamKind::AdamLoss {
            self.eta_or_b += self.alpha * loss_value;
        }
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let eta = self.current_eta();
        let mut dir = Vec::with_capacity(grad.len());
        for ((m, v), &g) in self.m1.iter_mut().zip(self.v.iter_mut()).zip(grad) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            dir.push(-eta * m_hat / (v_hat + self.epsilon).sqrt());
        }
        Ok(dir)
    }
}
