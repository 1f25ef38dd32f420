//! Network size that achieves the minimax excess-risk rate for
//! `alpha`-Hölder regression functions, and the rate itself.
//!
//! ```text
//! N  = ceil( (n / ln(n)^4)^(d / (d + alpha (q + 2))) )
//! tau = N^(-alpha/d)
//! L* = 8 + (m + 5) (1 + ceil(log2 max{d, alpha}))
//! w* = 6 (d + ceil(alpha)) N
//! v* = 141 (d + alpha + 1)^(3 + d) N (m + 6)
//! K* = 1
//! ```
//!
//! The logarithm in `N` is the natural one.

use serde::{Deserialize, Serialize};

use crate::math::{ceil, floor, ln, log2, powf};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitecturePlan {
    pub n_min: u64,
    pub alpha: f64,
    pub d: u32,
    pub q: f64,
    pub m: u32,
    pub hoelder_radius: f64,
    pub n: u64,
    pub tau: f64,
    pub depth: u64,
    pub width: u64,
    /// Nonzero-parameter budget; exact whenever `alpha` is an integer and
    /// the product fits in 53 bits.
    pub nonzero: f64,
    /// Integer-exact `v*` for integer `alpha` (`None` on overflow).
    pub nonzero_exact: Option<u128>,
    pub bound: f64,
}

/// `d / (d + alpha (q + 2))`, the exponent inside `N`.
pub fn grid_exponent(alpha: f64, d: u32, q: f64) -> f64 {
    let d = f64::from(d);
    d / (d + alpha * (q + 2.0))
}

/// Excess-risk rate exponent `alpha (q + 1) / (d + alpha (q + 2))`.
pub fn rate_exponent(alpha: f64, d: u32, q: f64) -> f64 {
    alpha * (q + 1.0) / (f64::from(d) + alpha * (q + 2.0))
}

fn ceil_log2(x: f64) -> u64 {
    if x <= 1.0 {
        return 0;
    }
    if floor(x) == x && x < 9.007_199_254_740_992e15 {
        let v = x as u64;
        return u64::from(64 - (v - 1).leading_zeros());
    }
    ceil(log2(x)) as u64
}

pub fn architecture_plan(n_min: u64, alpha: f64, d: u32, q: f64, m: u32, hoelder_radius: f64) -> Result<ArchitecturePlan> {
    if n_min < 3 {
        return Err(Error::invalid("n_min must be at least 3"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::invalid("q must be non-negative"));
    }
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if !(hoelder_radius > 0.0) {
        return Err(Error::invalid("Hölder radius must be positive"));
    }
    let nf = n_min as f64;
    let base = nf / powf(ln(nf), 4.0);
    let n = (ceil(powf(base, grid_exponent(alpha, d, q))) as u64).max(1);
    let tau = powf(n as f64, -alpha / f64::from(d));
    let depth = 8 + u64::from(m + 5) * (1 + ceil_log2(f64::from(d).max(alpha)));
    let width = 6 * (u64::from(d) + ceil(alpha) as u64) * n;
    let nonzero = 141.0 * powf(f64::from(d) + alpha + 1.0, f64::from(3 + d)) * n as f64 * f64::from(m + 6);
    let nonzero_exact = if floor(alpha) == alpha {
        let b = u128::from(d) + alpha as u128 + 1;
        (0..3 + d)
            .try_fold(141u128, |acc, _| acc.checked_mul(b))
            .and_then(|v| v.checked_mul(u128::from(n)))
            .and_then(|v| v.checked_mul(u128::from(m + 6)))
    } else {
        None
    };
    Ok(ArchitecturePlan {
        n_min,
        alpha,
        d,
        q,
        m,
        hoelder_radius,
        n,
        tau,
        depth,
        width,
        nonzero,
        nonzero_exact,
        bound: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_is_one_third_when_alpha_equals_d_and_q_zero() {
        for d in 1..6 {
            assert!((grid_exponent(f64::from(d), d, 0.0) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn one_dimensional_n() {
        let p = architecture_plan(10_000, 1.0, 1, 0.0, 1, 1.0).unwrap();
        let expect = (10_000f64 / 10_000f64.ln().powi(4)).powf(1.0 / 3.0).ceil() as u64;
        assert_eq!(p.n, expect);
        assert_eq!(p.n, 2);
        assert!((p.tau - 0.5).abs() < 1e-15);
    }

    #[test]
    fn depth_example() {
        let p = architecture_plan(1000, 1.0, 2, 0.0, 1, 1.0).unwrap();
        assert_eq!(p.depth, 20);
        assert_eq!(p.width, 6 * 3 * p.n);
        assert_eq!(p.nonzero_exact, Some(141 * 4u128.pow(5) * u128::from(p.n) * 7));
    }

    #[test]
    fn rate_example() {
        assert!((rate_exponent(1.0, 1, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ceil_log2_is_exact_on_powers_of_two() {
        assert_eq!(ceil_log2(1.0), 0);
        assert_eq!(ceil_log2(2.0), 1);
        assert_eq!(ceil_log2(4.0), 2);
        assert_eq!(ceil_log2(5.0), 3);
        assert_eq!(ceil_log2(2.5), 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(architecture_plan(2, 1.0, 1, 0.0, 1, 1.0).is_err());
        assert!(architecture_plan(10, 0.0, 1, 0.0, 1, 1.0).is_err());
        assert!(architecture_plan(10, 1.0, 0, 0.0, 1, 1.0).is_err());
        assert!(architecture_plan(10, 1.0, 1, -1.0, 1, 1.0).is_err());
        assert!(architecture_plan(10, 1.0, 1, 0.0, 0, 1.0).is_err());
    }
}
