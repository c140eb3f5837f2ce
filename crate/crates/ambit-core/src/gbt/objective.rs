use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EXP_CLAMP: f64 = 34.0;

/// Second-order boosting objective. Count objectives (`Poisson`, `Tweedie`)
/// work in log-link space: the ensemble output `F` is a log rate and
/// predictions are `exp(F)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Squared,
    Poisson,
    Tweedie { power: f64 },
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        if let Objective::Tweedie { power } = self {
            if !(*power > 1.0 && *power < 2.0) {
                return Err(Error::InvalidConfig(format!(
                    "tweedie power must lie in (1, 2), got {power}"
                )));
            }
        }
        Ok(())
    }

    pub fn needs_nonnegative_targets(&self) -> bool {
        !matches!(self, Objective::Squared)
    }

    /// Initial prediction in link space.
    pub fn base_score(&self, targets: &[f64]) -> f64 {
        let mean = targets.iter().sum::<f64>() / targets.len().max(1) as f64;
        match self {
            Objective::Squared => mean,
            Objective::Poisson | Objective::Tweedie { .. } => mean.max(1e-9).ln(),
        }
    }

    /// Gradient and hessian of the per-row loss at link-space output `f`.
    #[inline]
    pub fn grad_hess(&self, f: f64, y: f64) -> (f64, f64) {
        match *self {
            Objective::Squared => (f - y, 1.0),
            Objective::Poisson => {
                let mu = f.clamp(-EXP_CLAMP, EXP_CLAMP).exp();
                (mu - y, mu)
            }
            Objective::Tweedie { power } => {
                let a = ((1.0 - power) * f).clamp(-EXP_CLAMP, EXP_CLAMP).exp();
                let b = ((2.0 - power) * f).clamp(-EXP_CLAMP, EXP_CLAMP).exp();
                let grad = -y * a + b;
                let hess = (power - 1.0) * y * a + (2.0 - power) * b;
                (grad, hess.max(1e-16))
            }
        }
    }

    /// Per-row loss (up to y-only constants).
    #[inline]
    pub fn loss(&self, f: f64, y: f64) -> f64 {
        match *self {
            Objective::Squared => 0.5 * (f - y) * (f - y),
            Objective::Poisson => {
                let mu = f.clamp(-EXP_CLAMP, EXP_CLAMP).exp();
                mu - y * f
            }
            Objective::Tweedie { power } => {
                let a = ((1.0 - power) * f).clamp(-EXP_CLAMP, EXP_CLAMP).exp();
                let b = ((2.0 - power) * f).clamp(-EXP_CLAMP, EXP_CLAMP).exp();
                -y * a / (1.0 - power) + b / (2.0 - power)
            }
        }
    }

    /// Link-space output to response scale.
    #[inline]
    pub fn transform(&self, f: f64) -> f64 {
        match self {
            Objective::Squared => f,
            Objective::Poisson | Objective::Tweedie { .. } => {
                f.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Squared => "squared",
            Objective::Poisson => "poisson",
            Objective::Tweedie { .. } => "tweedie",
        }
    }
}
