//! Quantities measured against a known [`MixtureProblem`]: misclassification
//! and excess risk, the symmetric-difference error of the predicted normal
//! set, sup-norm distance to the regression function, the noise-exponent
//! probe and the approximation/bandwidth bound.
//!
//! A scorer `f` predicts *normal* where `f(x) >= 0`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::quadrature::{integrate_many, Quadrature};
use crate::activation::approx_sign_unchecked;
use crate::math::{abs, exp, ln, powf};
use crate::problem::{LevelSetSpec, MixtureProblem, NoiseCondition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub risk: f64,
    pub bayes_risk: f64,
    pub excess: f64,
    pub quadrature: Quadrature,
    pub nodes: usize,
    /// Standard error of `excess` (zero for grid rules).
    pub std_error: f64,
}

/// Runs `f` inside a closure that cannot fail, remembering the first error.
struct Fallible<F> {
    f: F,
    err: Option<Error>,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Fallible<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        if self.err.is_some() {
            return 0.0;
        }
        match (self.f)(x) {
            Ok(v) => v,
            Err(e) => {
                self.err = Some(e);
                0.0
            }
        }
    }

    fn finish<T>(self, value: T) -> Result<T> {
        match self.err {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

/// `R(f) = ∫ [s h1 1{f<0} + (1-s) h2 1{f>=0}] dμ`, together with the Bayes
/// risk on the same nodes.
pub fn misclassification_risk(
    problem: &MixtureProblem,
    f: impl FnMut(&[f64]) -> Result<f64>,
    rule: &Quadrature,
) -> Result<RiskEstimate> {
    let s = problem.s();
    let mut f = Fallible { f, err: None };
    let out = integrate_many(problem.dim(), rule, 3, |x, v| {
        let (h1, h2) = problem.densities(x);
        let (a, b) = (s * h1, (1.0 - s) * h2);
        let r = if f.call(x) >= 0.0 { b } else { a };
        let bayes = if a - b >= 0.0 { b } else { a };
        v[0] = r;
        v[1] = bayes;
        v[2] = r - bayes;
    });
    f.finish(RiskEstimate {
        risk: out[0].value,
        bayes_risk: out[1].value,
        excess: out[2].value,
        quadrature: *rule,
        nodes: rule.node_count(problem.dim()),
        std_error: out[2].std_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetError {
    pub value: f64,
    pub std_error: f64,
}

/// `S = μ({f >= 0} Δ {h1/h2 >= rho})`. Points where both densities vanish
/// count as outside the level set.
pub fn symmetric_difference_error(
    problem: &MixtureProblem,
    f: impl FnMut(&[f64]) -> Result<f64>,
    spec: LevelSetSpec,
    rule: &Quadrature,
) -> Result<SetError> {
    let mut f = Fallible { f, err: None };
    let out = integrate_many(problem.dim(), rule, 1, |x, v| {
        let inside = problem.level_set_indicator(spec, x).unwrap_or(false);
        v[0] = if (f.call(x) >= 0.0) != inside { 1.0 } else { 0.0 };
    });
    f.finish(SetError { value: out[0].value, std_error: out[0].std_error })
}

/// Max of `|f - f_P|` over the nodes `i / n`, `i = 0..=n`, per axis.
/// Nodes where `f_P` is undefined are skipped.
pub fn sup_error(problem: &MixtureProblem, mut f: impl FnMut(&[f64]) -> Result<f64>, n: usize) -> Result<f64> {
    let d = problem.dim();
    if n == 0 {
        return Err(Error::invalid("sup-norm grid needs at least one interval"));
    }
    let per_axis = n + 1;
    let total = per_axis
        .checked_pow(d as u32)
        .filter(|&t| t <= 100_000_000)
        .ok_or_else(|| Error::invalid("sup-norm grid too large for this dimension"))?;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut best: f64 = 0.0;
    for _ in 0..total {
        for (xi, &i) in x.iter_mut().zip(&idx) {
            *xi = i as f64 / n as f64;
        }
        if let Ok(fp) = problem.regression_function(&x) {
            best = best.max(abs(f(&x)? - fp));
        }
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(best)
}

/// `C_q = c0^(1/q) / (2q) · (q + 1)^(1 + 1/q)`, defined for `q > 0`.
pub fn comparison_constant(q: f64, c0: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Domain("comparison constant needs q > 0"));
    }
    if !(c0 > 0.0) {
        return Err(Error::invalid("c0 must be positive"));
    }
    Ok(powf(c0, 1.0 / q) / (2.0 * q) * powf(q + 1.0, 1.0 + 1.0 / q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProbe {
    /// `(t, P_X(|f_P| <= t))`.
    pub table: Vec<(f64, f64)>,
    /// Least-squares slope of `log P` on `log t` over points with `P > 0`.
    pub q_hat: Option<f64>,
}

/// `n` thresholds log-spaced over `[1e-3, 0.5]`.
pub fn default_probe_thresholds(n: usize) -> Vec<f64> {
    let (lo, hi) = (ln(1e-3), ln(0.5));
    (0..n).map(|i| exp(lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64)).collect()
}

pub fn noise_exponent_probe(problem: &MixtureProblem, thresholds: &[f64], rule: &Quadrature) -> Result<NoiseProbe> {
    if thresholds.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::invalid("probe thresholds must be positive"));
    }
    let out = integrate_many(problem.dim(), rule, thresholds.len(), |x, v| {
        let p = problem.marginal_density(x);
        let fp = problem.regression_function(x).map(abs);
        for (vj, &t) in v.iter_mut().zip(thresholds) {
            *vj = match fp {
                Ok(a) if a <= t => p,
                _ => 0.0,
            };
        }
    });
    let table: Vec<(f64, f64)> = thresholds.iter().zip(&out).map(|(&t, i)| (t, i.value)).collect();
    let pts: Vec<(f64, f64)> = table.iter().filter(|(_, p)| *p > 0.0).map(|&(t, p)| (ln(t), ln(p))).collect();
    let q_hat = least_squares_slope(&pts);
    Ok(NoiseProbe { table, q_hat })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// Excess risk of `approx_sign(f)`.
    pub lhs: f64,
    /// `4 c0 (k tau + sup|f - f_P|)^(q + 1)`.
    pub rhs: f64,
    pub sup_error: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Checks `R(σ_τ^k(f)) - R* <= 4 c0 (k τ + ‖f - f_P‖∞)^(q+1)` with the sup
/// norm taken over a grid of `sup_grid` intervals per axis.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_bound_check(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    problem: &MixtureProblem,
    tau: f64,
    k: u32,
    noise: NoiseCondition,
    rule: &Quadrature,
    sup_grid: usize,
    slack: f64,
) -> Result<BoundCheck> {
    crate::activation::ActivationSpec::ApproxSign { k, tau }.validate()?;
    let risk = misclassification_risk(problem, |x| Ok(approx_sign_unchecked(f(x)?, tau, k)), rule)?;
    let sup = sup_error(problem, &mut f, sup_grid)?;
    let rhs = 4.0 * noise.c0 * powf(f64::from(k) * tau + sup, noise.q + 1.0);
    Ok(BoundCheck { lhs: risk.excess, rhs, sup_error: sup, slack, holds: risk.excess <= rhs + slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{example1_problem, sign};

    fn grid(n: usize) -> Quadrature {
        Quadrature::Grid { points_per_axis: n }
    }

    fn bayes(p: &MixtureProblem) -> impl Fn(&[f64]) -> Result<f64> + '_ {
        move |x| Ok(p.bayes_classifier(x).sign())
    }

    #[test]
    fn bayes_has_zero_excess_and_constant_normal_has_anomaly_mass() {
        let p = example1_problem(0.3, 0.5).unwrap();
        let r = misclassification_risk(&p, bayes(&p), &grid(100_000)).unwrap();
        assert!(r.excess.abs() < 1e-15);
        let all_normal = misclassification_risk(&p, |_| Ok(1.0), &grid(100_000)).unwrap();
        assert!((all_normal.risk - 0.7).abs() < 1e-9);
    }

    #[test]
    fn label_flip_identity() {
        let p = example1_problem(0.5, 0.5).unwrap();
        let rule = grid(100_000);
        let r = misclassification_risk(&p, bayes(&p), &rule).unwrap();
        // −f_c flips the prediction except at ties, which have measure zero here.
        let flipped = misclassification_risk(&p, |x| Ok(-p.bayes_classifier(x).sign()), &rule).unwrap();
        assert!((flipped.risk - (1.0 - r.bayes_risk)).abs() < 1e-9);
    }

    #[test]
    fn set_error_examples() {
        let p = example1_problem(0.5, 0.5).unwrap();
        let spec = p.default_level_set();
        let ind = |x: &[f64]| Ok(if p.level_set_indicator(spec, x)? { 1.0 } else { -1.0 });
        let s = symmetric_difference_error(&p, ind, spec, &grid(10_000)).unwrap();
        assert_eq!(s.value, 0.0);
        let huge = LevelSetSpec::new(1e9).unwrap();
        let s = symmetric_difference_error(&p, |_| Ok(1.0), huge, &grid(10_000)).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn comparison_constant_examples() {
        assert!((comparison_constant(1.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        for q in [0.5, 1.0, 2.0, 3.5] {
            let a = comparison_constant(q, 4.0).unwrap();
            let b = comparison_constant(q, 1.0).unwrap();
            assert!((a - 4f64.powf(1.0 / q) * b).abs() < 1e-12 * a);
        }
        assert!(matches!(comparison_constant(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn probe_examples() {
        let p = example1_problem(0.5, 0.5).unwrap();
        let probe = noise_exponent_probe(&p, &[1.0, 2.0], &grid(100_000)).unwrap();
        for (_, v) in &probe.table {
            assert!((v - 1.0).abs() < 1e-9);
        }
        let probe = noise_exponent_probe(&p, &default_probe_thresholds(20), &grid(100_000)).unwrap();
        let q = probe.q_hat.unwrap();
        assert!((q - 1.0).abs() <= 0.15, "q_hat {q}");
    }

    #[test]
    fn bound_holds_for_the_regression_function() {
        let p = example1_problem(0.5, 0.5).unwrap();
        for tau in [0.01, 0.05, 0.3] {
            let c = theorem1_bound_check(
                |x| p.regression_function(x),
                &p,
                tau,
                1,
                NoiseCondition::trivial(),
                &grid(100_000),
                100_000,
                1e-3,
            )
            .unwrap();
            assert_eq!(c.sup_error, 0.0);
            assert!(c.holds);
        }
    }

    #[test]
    fn bayes_is_optimal_for_sign_of_random_functions() {
        let p = example1_problem(0.4, 0.3).unwrap();
        let rule = grid(20_000);
        for a in [-3.0, -1.0, 0.5, 2.0] {
            let r = misclassification_risk(&p, |x| Ok(sign(a * (x[0] - 0.6))), &rule).unwrap();
            assert!(r.excess >= -1e-12);
        }
    }

    #[test]
    fn sup_error_detects_zero_margin_jump() {
        let p = example1_problem(0.5, 1.0).unwrap();
        let e = sup_error(&p, |_| Ok(0.0), 100_000).unwrap();
        assert_eq!(e, 1.0);
        let smooth = |x: &[f64]| Ok((x[0] - 0.5) * 100.0);
        assert!(sup_error(&p, |x| smooth(x).map(|v: f64| v.clamp(-1.0, 1.0)), 100_000).unwrap() >= 0.99);
    }
}
