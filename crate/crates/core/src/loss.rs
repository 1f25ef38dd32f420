//! Margin losses `phi(u)` evaluated at `u = y * f(x)`.

use serde::{Deserialize, Serialize};

use crate::math::{exp, ln_1p};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Logistic,
    Hinge,
}

impl LossKind {
    #[inline]
    pub fn value(self, u: f64) -> f64 {
        match self {
            LossKind::Logistic => logistic_loss(u),
            LossKind::Hinge => hinge_loss(u),
        }
    }

    /// d phi / du. The hinge subgradient at the kink `u = 1` is 0.
    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            LossKind::Logistic => {
                if u >= 0.0 {
                    let e = exp(-u);
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + exp(u))
                }
            }
            LossKind::Hinge => {
                if u < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `max{0, 1 - u}`.
#[inline]
pub fn hinge_loss(u: f64) -> f64 {
    if u < 1.0 {
        1.0 - u
    } else {
        0.0
    }
}

/// `log(1 + exp(-u))`, branched at `u = 0` so neither side overflows.
#[inline]
pub fn logistic_loss(u: f64) -> f64 {
    if u >= 0.0 {
        ln_1p(exp(-u))
    } else {
        -u + ln_1p(exp(u))
    }
}
