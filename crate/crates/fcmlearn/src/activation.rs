//! Activation functions used by the map dynamics and their inverses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squashing function family. Sigmoid maps into (0, 1), tanh into (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationFamily {
    Sigmoid,
    Tanh,
}

impl ActivationFamily {
    /// Closed range the family squashes into.
    pub fn range(&self) -> (f64, f64) {
        match self {
            ActivationFamily::Sigmoid => (0.0, 1.0),
            ActivationFamily::Tanh => (-1.0, 1.0),
        }
    }
}

impl std::str::FromStr for ActivationFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationFamily::Sigmoid),
            "tanh" => Ok(ActivationFamily::Tanh),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation family `{other}` (expected `sigmoid` or `tanh`)"
            ))),
        }
    }
}

impl std::fmt::Display for ActivationFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActivationFamily::Sigmoid => write!(f, "sigmoid"),
            ActivationFamily::Tanh => write!(f, "tanh"),
        }
    }
}

/// Activation family plus the shape parameter `lambda` (> 0) that controls
/// its steepness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub family: ActivationFamily,
    pub lambda: f64,
}

impl ActivationSpec {
    pub fn new(family: ActivationFamily, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "activation lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { family, lambda })
    }

    pub fn sigmoid(lambda: f64) -> Result<Self> {
        Self::new(ActivationFamily::Sigmoid, lambda)
    }

    pub fn tanh(lambda: f64) -> Result<Self> {
        Self::new(ActivationFamily::Tanh, lambda)
    }

    /// Squash a raw weighted sum into the family's range.
    pub fn activate(&self, x: f64) -> f64 {
        match self.family {
            ActivationFamily::Sigmoid => 1.0 / (1.0 + (-self.lambda * x).exp()),
            ActivationFamily::Tanh => (self.lambda * x).tanh(),
        }
    }

    /// Inverse of [`activate`](Self::activate). The input is first clamped
    /// into the range `[lo + clamp_eps, hi - clamp_eps]` so that observed
    /// values pushed outside the open range by noise still invert to a
    /// finite value.
    pub fn activate_inverse(&self, y: f64, clamp_eps: f64) -> f64 {
        debug_assert!(clamp_eps > 0.0 && clamp_eps < 0.5);
        match self.family {
            ActivationFamily::Sigmoid => {
                let y = y.clamp(clamp_eps, 1.0 - clamp_eps);
                -((1.0 - y) / y).ln() / self.lambda
            }
            ActivationFamily::Tanh => {
                let y = y.clamp(-1.0 + clamp_eps, 1.0 - clamp_eps);
                ((1.0 + y) / (1.0 - y)).ln() / (2.0 * self.lambda)
            }
        }
    }
}
