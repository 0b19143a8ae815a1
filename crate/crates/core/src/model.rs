//! Scalar model parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `alpha`, `gamma`, `tauhat` and `epsilon` of the fast-reaction scaled system
/// `eps^2 U_s = eps^2 U_xx + U - U^3 - eps (alpha V + gamma)`,
/// `tauhat V_s = V_xx - (1 + f1) V + (1 + f2) U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub gamma: f64,
    pub tauhat: f64,
    #[serde(default)]
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, gamma: f64, tauhat: f64, epsilon: f64) -> Result<Self> {
        let p = Self { alpha, gamma, tauhat, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.gamma.is_finite()) {
            return Err(Error::Validation("alpha and gamma must be finite".into()));
        }
        if !(self.tauhat > 0.0) || !self.tauhat.is_finite() {
            return Err(Error::Validation(format!("tauhat must be positive, got {}", self.tauhat)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Validation(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Parameters of the named experiments (epsilon left at 0).
    pub fn example(id: &str) -> Result<Self> {
        let (alpha, gamma) = match id {
            "fig1" => return Ok(Self { alpha: 0.94, gamma: 0.0, tauhat: 1.0, epsilon: 0.15 }),
            "ex0" => (0.5, 0.2),
            "ex1" => (-2.0, -0.2),
            "ex2" | "ex3" => (2.5, 0.2),
            other => return Err(Error::UnknownExample(other.into())),
        };
        Ok(Self { alpha, gamma, tauhat: 1.0, epsilon: 0.0 })
    }
}
