//! Closed catalogue of increasing, bounded reaction terms.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A member of the monotone catalogue; every entry is C¹, nondecreasing
/// and bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Zero,
    Arctan,
    /// `scale · tanh(u)` with `scale ≥ 0`.
    Tanh { scale: f64 },
    /// `1/(1 + e^{−u}) − 1/2`.
    Logistic,
}

impl Nonlinearity {
    /// Parses `zero`, `arctan`, `logistic`, `tanh` or `tanh:<scale>`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "zero" => Ok(Self::Zero),
            "arctan" => Ok(Self::Arctan),
            "logistic" => Ok(Self::Logistic),
            "tanh" => Ok(Self::Tanh { scale: 1.0 }),
            _ => {
                if let Some(rest) = s.strip_prefix("tanh:") {
                    let scale: f64 = rest.parse().map_err(|_| Error::InvalidInput(format!("bad tanh scale in {s:?}")))?;
                    let g = Self::Tanh { scale };
                    g.validate()?;
                    Ok(g)
                } else {
                    Err(Error::InvalidInput(format!("unknown nonlinearity {s:?}")))
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Tanh { scale } if !(*scale >= 0.0 && scale.is_finite()) => {
                Err(Error::InvalidInput(format!("tanh scale {scale} makes the reaction decreasing")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Arctan => u.atan(),
            Self::Tanh { scale } => scale * u.tanh(),
            Self::Logistic => 1.0 / (1.0 + (-u).exp()) - 0.5,
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Arctan => 1.0 / (1.0 + u * u),
            Self::Tanh { scale } => {
                let t = u.tanh();
                scale * (1.0 - t * t)
            }
            Self::Logistic => {
                let s = 1.0 / (1.0 + (-u).exp());
                s * (1.0 - s)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero) || matches!(self, Self::Tanh { scale } if *scale == 0.0)
    }
}
