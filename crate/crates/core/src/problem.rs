//! The classification model of anomaly detection.
//!
//! Normal data has density `h1`, known anomalies density `h-`, and synthetic
//! anomalies are uniform, so the anomaly class has the mixture density
//!
//! ```text
//! h2(x) = s~ h-(x) + (1 - s~)
//! ```
//!
//! With normal-class proportion `s`, the regression function is
//! `f_P = (s h1 - (1-s) h2) / (s h1 + (1-s) h2)` and the Bayes classifier is
//! its sign. `s~ = 1` recovers the setting without synthetic anomalies
//! (`h2 = h-`), where supports that touch with zero margin make `f_P` jump.

use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::{Error, Result};

/// Class label: `+1` normal, `-1` anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Normal => 1.0,
            Label::Anomaly => -1.0,
        }
    }

    /// Classification by sign with the tie `0 -> +1`.
    #[inline]
    pub fn from_score(score: f64) -> Label {
        if score >= 0.0 {
            Label::Normal
        } else {
            Label::Anomaly
        }
    }
}

/// `sign` with `sign(0) = +1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    Label::from_score(x).sign()
}

/// Likelihood-ratio threshold `rho` of the level set `{h1 / h2 >= rho}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetSpec {
    rho: f64,
}

impl LevelSetSpec {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho.is_finite() {
            Ok(LevelSetSpec { rho })
        } else {
            Err(Error::invalid("likelihood-ratio threshold rho must be positive and finite"))
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Tsybakov noise condition `P_X(|f_P| <= t) <= c0 t^q` for all `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCondition {
    pub q: f64,
    pub c0: f64,
}

impl NoiseCondition {
    pub fn new(q: f64, c0: f64) -> Result<Self> {
        if q >= 0.0 && q.is_finite() && c0 > 0.0 && c0.is_finite() {
            Ok(NoiseCondition { q, c0 })
        } else {
            Err(Error::invalid("noise condition needs q >= 0 and c0 > 0"))
        }
    }

    /// `q = 0, c0 = 1`: satisfied by every distribution.
    pub fn trivial() -> Self {
        NoiseCondition { q: 0.0, c0: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureProblem {
    h1: DensityModel,
    h_minus: DensityModel,
    s: f64,
    s_tilde: f64,
}

impl MixtureProblem {
    /// `s` in (0,1). `s_tilde` in [0,1]; `s_tilde = 1` means no synthetic
    /// anomalies, and then `h2` may vanish.
    pub fn new(h1: DensityModel, h_minus: DensityModel, s: f64, s_tilde: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::invalid("normal-class proportion s must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&s_tilde) {
            return Err(Error::invalid("known-anomaly share s~ must lie in [0, 1]"));
        }
        if h1.dim() != h_minus.dim() {
            return Err(Error::Shape { expected: h1.dim(), got: h_minus.dim() });
        }
        Ok(MixtureProblem { h1, h_minus, s, s_tilde })
    }

    pub fn dim(&self) -> usize {
        self.h1.dim()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn s_tilde(&self) -> f64 {
        self.s_tilde
    }

    pub fn h1(&self) -> &DensityModel {
        &self.h1
    }

    pub fn h_minus(&self) -> &DensityModel {
        &self.h_minus
    }

    /// Mixture anomaly density, bounded below by `1 - s~`.
    #[inline]
    pub fn h2(&self, x: &[f64]) -> f64 {
        let known = if self.s_tilde > 0.0 { self.s_tilde * self.h_minus.eval(x) } else { 0.0 };
        known + (1.0 - self.s_tilde)
    }

    /// `(h1(x), h2(x))`.
    #[inline]
    pub fn densities(&self, x: &[f64]) -> (f64, f64) {
        (self.h1.eval(x), self.h2(x))
    }

    /// Density of the marginal `P_X = s Q + (1-s) W` w.r.t. the uniform measure.
    #[inline]
    pub fn marginal_density(&self, x: &[f64]) -> f64 {
        let (h1, h2) = self.densities(x);
        self.s * h1 + (1.0 - self.s) * h2
    }

    /// Default threshold `rho = (1 - s) / s`, at which the level set is the
    /// Bayes normal region.
    pub fn default_level_set(&self) -> LevelSetSpec {
        LevelSetSpec { rho: (1.0 - self.s) / self.s }
    }

    /// `f_P(x) = E[Y | X = x]`, written in the expanded three-term form.
    pub fn regression_function(&self, x: &[f64]) -> Result<f64> {
        let a = self.s * self.h1.eval(x);
        let b = (1.0 - self.s) * self.s_tilde * self.h_minus.eval(x);
        let c = (1.0 - self.s) * (1.0 - self.s_tilde);
        let den = a + b + c;
        if den > 0.0 {
            Ok((a - b - c) / den)
        } else {
            Err(Error::UndefinedPoint)
        }
    }

    /// `eta(x) = P(Y = +1 | X = x) = s h1 / (s h1 + (1-s) h2)`.
    pub fn conditional_class_prob(&self, x: &[f64]) -> Result<f64> {
        let (h1, h2) = self.densities(x);
        let a = self.s * h1;
        let den = a + (1.0 - self.s) * h2;
        if den > 0.0 {
            Ok(a / den)
        } else {
            Err(Error::UndefinedPoint)
        }
    }

    /// `+1` iff `s h1(x) - (1-s) h2(x) >= 0`.
    pub fn bayes_classifier(&self, x: &[f64]) -> Label {
        let (h1, h2) = self.densities(x);
        Label::from_score(self.s * h1 - (1.0 - self.s) * h2)
    }

    /// `h1(x) / h2(x) >= rho`, with `h2(x) = 0 < h1(x)` counting as inside.
    pub fn level_set_indicator(&self, spec: LevelSetSpec, x: &[f64]) -> Result<bool> {
        let (h1, h2) = self.densities(x);
        if h2 > 0.0 {
            Ok(h1 >= spec.rho * h2)
        } else if h1 > 0.0 {
            Ok(true)
        } else {
            Err(Error::UndefinedPoint)
        }
    }
}

/// Two touching hats on `[0,1]`: `h1 = 4 H(4x - 3)` on `[1/2, 1]` and
/// `h- = 4 H(4x - 1)` on `[0, 1/2]`, `H(x) = max{1 - |x|, 0}`.
pub fn example1_problem(s: f64, s_tilde: f64) -> Result<MixtureProblem> {
    MixtureProblem::new(
        DensityModel::hat_1d(0.75, 0.25)?,
        DensityModel::hat_1d(0.25, 0.25)?,
        s,
        s_tilde,
    )
}

/// Product hats `prod_i max{2 - 4|x_i|, 0}` shifted by `-/+ (1/2, 0, ..., 0)`.
///
/// The original construction lives on `[-1/2, 1/2]^d`; it is mapped onto
/// `[0,1]^d` by `y = x + 1/2`, so `h1` is centered at `(0, 1/2, ..., 1/2)`
/// and `h-` at `(1, 1/2, ..., 1/2)`. Half of each hat then falls outside the
/// cube and both densities are rescaled by 2 to keep unit mass.
pub fn example2_problem(d: usize, s: f64, s_tilde: f64) -> Result<MixtureProblem> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut c1 = vec![0.5; d];
    c1[0] = 0.0;
    let mut c2 = vec![0.5; d];
    c2[0] = 1.0;
    MixtureProblem::new(
        DensityModel::product_hat(c1, 0.5)?,
        DensityModel::product_hat(c2, 0.5)?,
        s,
        s_tilde,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::hinge_loss;
    use crate::rng::{seeded, unit};
    use proptest::prelude::*;

    #[test]
    fn example1_left_half_is_anomalous() {
        for &s in &[0.2, 0.5, 0.9] {
            let p = example1_problem(s, 0.0).unwrap();
            assert_eq!(p.regression_function(&[0.25]).unwrap(), -1.0);
        }
    }

    #[test]
    fn example1_mixed_region_value() {
        let p = example1_problem(0.5, 0.5).unwrap();
        let f = p.regression_function(&[0.75]).unwrap();
        assert!((f - 1.75 / 2.25).abs() < 1e-12);
        let eta = p.conditional_class_prob(&[0.75]).unwrap();
        assert!((eta - 8.0 / 9.0).abs() < 1e-12);
        assert!((2.0 * eta - 1.0 - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_densities_cancel() {
        let h = DensityModel::hat_1d(0.5, 0.5).unwrap();
        let p = MixtureProblem::new(h.clone(), h, 0.5, 1.0).unwrap();
        assert_eq!(p.regression_function(&[0.4]).unwrap(), 0.0);
    }

    #[test]
    fn undefined_where_both_densities_vanish() {
        let p = example1_problem(0.5, 1.0).unwrap();
        assert_eq!(p.regression_function(&[0.5]), Err(Error::UndefinedPoint));
        assert_eq!(p.conditional_class_prob(&[0.5]), Err(Error::UndefinedPoint));
        let spec = LevelSetSpec::new(1.0).unwrap();
        assert_eq!(p.level_set_indicator(spec, &[0.5]), Err(Error::UndefinedPoint));
    }

    #[test]
    fn conditional_probability_edge_cases() {
        let p = example1_problem(0.5, 0.3).unwrap();
        assert_eq!(p.conditional_class_prob(&[0.2]).unwrap(), 0.0);
        let q = example1_problem(0.5, 1.0).unwrap();
        assert_eq!(q.conditional_class_prob(&[0.8]).unwrap(), 1.0);
    }

    #[test]
    fn bayes_classifier_examples() {
        let p = example1_problem(0.5, 0.0).unwrap();
        assert_eq!(p.bayes_classifier(&[0.25]), Label::Anomaly);
        assert_eq!(p.bayes_classifier(&[0.75]), Label::Normal);
        // s h1 = (1-s) h2 at h1 = 1: x = 0.5 + 1/16.
        let tie = example1_problem(0.5, 0.0).unwrap();
        let x = 0.5 + 1.0 / 16.0;
        assert_eq!(tie.h1().eval(&[x]), 1.0);
        assert_eq!(tie.bayes_classifier(&[x]), Label::Normal);
    }

    #[test]
    fn level_set_examples() {
        let p = example1_problem(0.5, 0.5).unwrap();
        let one = LevelSetSpec::new(1.0).unwrap();
        assert!(p.level_set_indicator(one, &[0.75]).unwrap());
        assert_eq!(p.h1().eval(&[0.75]) / p.h2(&[0.75]), 8.0);
        for &rho in &[0.01, 1.0, 100.0] {
            let spec = LevelSetSpec::new(rho).unwrap();
            assert!(!p.level_set_indicator(spec, &[0.2]).unwrap());
        }
        assert!(LevelSetSpec::new(0.0).is_err());
    }

    #[test]
    fn no_known_anomaly_share_reduces_to_density_threshold() {
        let p = example1_problem(0.4, 0.0).unwrap();
        for &rho in &[0.5, 1.0, 3.0] {
            let spec = LevelSetSpec::new(rho).unwrap();
            for i in 0..2001 {
                let x = [i as f64 / 2000.0];
                assert_eq!(p.h2(&x), 1.0);
                assert_eq!(p.level_set_indicator(spec, &x).unwrap(), p.h1().eval(&x) >= rho);
            }
        }
    }

    #[test]
    fn example2_densities() {
        let p = example2_problem(2, 0.5, 0.5).unwrap();
        assert!((p.h1().eval(&[0.0, 0.5]) - 8.0).abs() < 1e-12);
        assert!((p.h_minus().eval(&[1.0, 0.5]) - 8.0).abs() < 1e-12);
        assert_eq!(p.h1().eval(&[0.6, 0.5]), 0.0);
        assert!(example2_problem(0, 0.5, 0.5).is_err());
    }

    #[test]
    fn parameters_are_validated() {
        assert!(example1_problem(0.0, 0.5).is_err());
        assert!(example1_problem(1.0, 0.5).is_err());
        assert!(example1_problem(0.5, 1.1).is_err());
        assert!(NoiseCondition::new(-1.0, 1.0).is_err());
        assert!(NoiseCondition::new(0.0, 0.0).is_err());
    }

    #[test]
    fn continuity_with_synthetic_anomalies() {
        // Lipschitz constant of f_P on (1/2, 3/4) is 32 s / ((1-s)(1-s~)),
        // attained as x -> 1/2 from the right.
        for &(s, st) in &[(0.5, 0.5), (0.3, 0.2), (0.8, 0.6)] {
            let p = example1_problem(s, st).unwrap();
            let lip = 32.0 * s / ((1.0 - s) * (1.0 - st));
            let n = 100_000;
            let dx = 1.0 / n as f64;
            let mut prev = p.regression_function(&[0.0]).unwrap();
            let mut max_jump: f64 = 0.0;
            let mut max_slope: f64 = 0.0;
            for i in 1..=n {
                let x = i as f64 * dx;
                let f = p.regression_function(&[x]).unwrap();
                max_jump = max_jump.max((f - prev).abs());
                if x > 0.5 && x < 0.75 {
                    max_slope = max_slope.max((f - prev).abs() / dx);
                }
                prev = f;
            }
            assert!(max_jump <= lip * dx * (1.0 + 1e-9), "jump {max_jump} vs {}", lip * dx);
            assert!((max_slope - lip).abs() / lip < 0.01, "slope {max_slope} vs {lip}");
        }
    }

    #[test]
    fn bayes_label_minimizes_pointwise_hinge_risk() {
        let mut rng = seeded(5);
        for _ in 0..100 {
            let h1 = 4.0 * unit(&mut rng);
            let h2 = 4.0 * unit(&mut rng);
            let s = 0.05 + 0.9 * unit(&mut rng);
            let phi = |u: f64| s * h1 * hinge_loss(u) + (1.0 - s) * h2 * hinge_loss(-u);
            let grid_min = (0..2001)
                .map(|i| phi(-1.0 + i as f64 / 1000.0))
                .fold(f64::INFINITY, f64::min);
            let label = Label::from_score(s * h1 - (1.0 - s) * h2);
            assert!(phi(label.sign()) <= grid_min + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn regression_is_twice_eta_minus_one(x in 0.0f64..1.0, s in 0.01f64..0.99, st in 0.0f64..0.99) {
            let p = example1_problem(s, st).unwrap();
            let f = p.regression_function(&[x]).unwrap();
            let eta = p.conditional_class_prob(&[x]).unwrap();
            prop_assert!((f - (2.0 * eta - 1.0)).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&f));
            prop_assert!(p.h2(&[x]) >= 1.0 - st - 1e-15);
        }
    }
}
