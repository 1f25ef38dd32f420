//! Activation functions: ReLU, leaky ReLU, ReLU^k and the approx-sign family.
//!
//! The approx-sign of order `k` with bandwidth `tau` is a signed difference of
//! two `k`-th order finite differences of ReLU^k:
//!
//! ```text
//! sigma_k_tau(x) = 1/(k! tau^k) * sum_l (-1)^l C(k,l) [ relu(x - l tau)^k - relu(-x - l tau)^k ]
//! ```
//!
//! For `k = 1` it is the clipped ramp `clamp(x / tau, -1, 1)`. It is exactly
//! `+1` for `x >= k tau` and `-1` for `x <= -k tau`; those branches are taken
//! explicitly because the alternating sum cancels catastrophically for large
//! `|x|`.

use serde::{Deserialize, Serialize};

use crate::math::{binomial, factorial, powi};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationSpec {
    Relu,
    LeakyRelu { slope: f64 },
    ReluK { k: u32 },
    ApproxSign { k: u32, tau: f64 },
}

impl Default for ActivationSpec {
    fn default() -> Self {
        ActivationSpec::LeakyRelu { slope: 0.01 }
    }
}

impl ActivationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationSpec::Relu => Ok(()),
            ActivationSpec::LeakyRelu { slope } => {
                if slope > 0.0 && slope < 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("leaky ReLU slope must lie in (0, 1)"))
                }
            }
            ActivationSpec::ReluK { k } => check_order(k),
            ActivationSpec::ApproxSign { k, tau } => {
                check_order(k)?;
                check_bandwidth(tau)
            }
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationSpec::Relu => relu(x),
            ActivationSpec::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            ActivationSpec::ReluK { k } => relu_pow(x, k),
            ActivationSpec::ApproxSign { k, tau } => approx_sign_unchecked(x, tau, k),
        }
    }

    /// Derivative, taking the right-continuous branch at kinks of ReLU-type
    /// units (0 at the origin for ReLU, `slope` for leaky ReLU).
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ActivationSpec::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationSpec::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            ActivationSpec::ReluK { k } => {
                if x > 0.0 {
                    f64::from(k) * powi(x, k - 1)
                } else {
                    0.0
                }
            }
            ActivationSpec::ApproxSign { k, tau } => approx_sign_derivative(x, tau, k),
        }
    }
}

fn check_order(k: u32) -> Result<()> {
    if k >= 1 {
        Ok(())
    } else {
        Err(Error::invalid("ReLU^k order k must be at least 1"))
    }
}

fn check_bandwidth(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("approx-sign bandwidth tau must lie in (0, 1]"))
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn relu_pow(x: f64, k: u32) -> f64 {
    if x > 0.0 {
        powi(x, k)
    } else {
        0.0
    }
}

/// `(max{0, x})^k`.
pub fn relu_k(x: f64, k: u32) -> Result<f64> {
    check_order(k)?;
    Ok(relu_pow(x, k))
}

/// The approx-sign function of order `k` and bandwidth `tau`.
pub fn approx_sign(x: f64, tau: f64, k: u32) -> Result<f64> {
    check_bandwidth(tau)?;
    check_order(k)?;
    Ok(approx_sign_unchecked(x, tau, k))
}

pub(crate) fn approx_sign_unchecked(x: f64, tau: f64, k: u32) -> f64 {
    let reach = f64::from(k) * tau;
    if x >= reach {
        return 1.0;
    }
    if x <= -reach {
        return -1.0;
    }
    if k == 1 {
        return x / tau;
    }
    let scale = factorial(k) * powi(tau, k);
    let mut pos = 0.0;
    let mut neg = 0.0;
    for l in 0..=k {
        let c = binomial(k, l);
        let shift = f64::from(l) * tau;
        let term_pos = c * relu_pow(x - shift, k);
        let term_neg = c * relu_pow(-x - shift, k);
        if l % 2 == 0 {
            pos += term_pos;
            neg += term_neg;
        } else {
            pos -= term_pos;
            neg -= term_neg;
        }
    }
    (pos - neg) / scale
}

pub(crate) fn approx_sign_derivative(x: f64, tau: f64, k: u32) -> f64 {
    let reach = f64::from(k) * tau;
    if x >= reach || x <= -reach {
        return 0.0;
    }
    if k == 1 {
        return 1.0 / tau;
    }
    let scale = factorial(k) * powi(tau, k);
    let kf = f64::from(k);
    let mut acc = 0.0;
    for l in 0..=k {
        let c = binomial(k, l);
        let shift = f64::from(l) * tau;
        let term = c * kf * (relu_pow(x - shift, k - 1) + relu_pow(-x - shift, k - 1));
        if l % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn piecewise(x: f64, tau: f64) -> f64 {
        if x >= tau {
            1.0
        } else if x >= -tau {
            x / tau
        } else {
            -1.0
        }
    }

    /// Independent route: sigma_k_tau(x) = F(x) - F(-x) where F is the CDF of
    /// a sum of k independent Uniform(0, tau) variables, integrated here as
    /// the volume of {u in [0,tau]^k : sum u <= x} on a midpoint grid.
    fn kfold_volume(x: f64, tau: f64, k: u32, cells: usize) -> f64 {
        let h = tau / cells as f64;
        let mut count = 0usize;
        let mut idx = vec![0usize; k as usize];
        let total = cells.pow(k);
        for _ in 0..total {
            let s: f64 = idx.iter().map(|&i| (i as f64 + 0.5) * h).sum();
            if s <= x {
                count += 1;
            }
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < cells {
                    break;
                }
                *slot = 0;
            }
        }
        count as f64 / total as f64
    }

    #[test]
    fn relu_k_examples() {
        assert_eq!(relu_k(2.0, 1).unwrap(), 2.0);
        assert_eq!(relu_k(-1.0, 3).unwrap(), 0.0);
        assert_eq!(relu_k(1.5, 2).unwrap(), 2.25);
        assert!(matches!(relu_k(1.0, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn approx_sign_examples() {
        assert_eq!(approx_sign(0.05, 0.1, 1).unwrap(), 0.5);
        assert_eq!(approx_sign(0.0, 0.3, 2).unwrap(), 0.0);
        let v = approx_sign(0.15, 0.1, 2).unwrap();
        assert!(v > 0.0 && v < 1.0);
        // Closed form for k = 2 on [tau, 2 tau]: 1 - (2 tau - x)^2 / (2 tau^2).
        assert!((v - (1.0 - 0.05f64.powi(2) / 0.02)).abs() < 1e-12);
        let oracle = kfold_volume(0.15, 0.1, 2, 2000) - kfold_volume(-0.15, 0.1, 2, 2000);
        assert!((v - oracle).abs() < 2e-4, "{v} vs {oracle}");
    }

    #[test]
    fn approx_sign_matches_kfold_integral_for_k3() {
        for &x in &[-0.25, -0.1, 0.02, 0.07, 0.13, 0.2] {
            let v = approx_sign(x, 0.1, 3).unwrap();
            let oracle = kfold_volume(x, 0.1, 3, 200) - kfold_volume(-x, 0.1, 3, 200);
            assert!((v - oracle).abs() < 2e-4, "x={x}: {v} vs {oracle}");
        }
    }

    #[test]
    fn approx_sign_rejects_bad_parameters() {
        assert!(approx_sign(0.0, 0.0, 1).is_err());
        assert!(approx_sign(0.0, 1.5, 1).is_err());
        assert!(approx_sign(0.0, 0.5, 0).is_err());
        assert!(ActivationSpec::LeakyRelu { slope: 1.0 }.validate().is_err());
    }

    #[test]
    fn derivative_matches_central_differences() {
        let h = 1e-7;
        for spec in [
            ActivationSpec::ReluK { k: 3 },
            ActivationSpec::ApproxSign { k: 2, tau: 0.2 },
            ActivationSpec::ApproxSign { k: 3, tau: 0.1 },
        ] {
            for &x in &[-0.31, -0.05, 0.013, 0.17, 0.26] {
                let fd = (spec.apply(x + h) - spec.apply(x - h)) / (2.0 * h);
                assert!((fd - spec.derivative(x)).abs() < 1e-5, "{spec:?} at {x}");
            }
        }
    }

    proptest! {
        #[test]
        fn approx_sign_is_odd_and_bounded(x in -2.0f64..2.0, k in 1u32..4, tau in 0.01f64..1.0) {
            let a = approx_sign(x, tau, k).unwrap();
            let b = approx_sign(-x, tau, k).unwrap();
            prop_assert!((a + b).abs() <= 1e-12);
            prop_assert!(a.abs() <= 1.0 + 1e-12);
            if x != 0.0 {
                prop_assert!(a.signum() == x.signum() || a == 0.0 && x.abs() < 1e-300);
            }
        }

        #[test]
        fn approx_sign_is_monotone(x in -1.0f64..1.0, dx in 0.0f64..0.5, k in 1u32..4, tau in 0.01f64..1.0) {
            let a = approx_sign(x, tau, k).unwrap();
            let b = approx_sign(x + dx, tau, k).unwrap();
            prop_assert!(b >= a - 1e-12);
        }

        #[test]
        fn order_one_is_the_clipped_ramp(x in -2.0f64..2.0, tau in 0.01f64..1.0) {
            prop_assert!((approx_sign(x, tau, 1).unwrap() - piecewise(x, tau)).abs() <= 1e-14);
        }
    }
}
