//! Synthetic anomalies: points drawn uniformly from the normalized feature
//! domain, with one-hot groups sampled from the training vocabulary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureBlock, FeatureLayout};
use crate::rng::{seeded, unit};
use crate::{Error, Matrix, Result};

/// How many synthetic anomalies to draw, relative to the real sample size
/// `n + n⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum CountPolicy {
    #[default]
    MatchReal,
    Multiplier(f64),
    Absolute(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub count_policy: CountPolicy,
    pub seed: u64,
}

/// Resolves `n'`; fractional multiples round half up.
pub fn resolve_count(policy: CountPolicy, n: usize, n_minus: usize) -> Result<usize> {
    let real = n + n_minus;
    match policy {
        CountPolicy::MatchReal => Ok(real),
        CountPolicy::Absolute(c) => Ok(c),
        CountPolicy::Multiplier(m) => {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::invalid("synthetic multiplier must be finite and non-negative"));
            }
            Ok(crate::math::floor(m * real as f64 + 0.5) as usize)
        }
    }
}

/// Draws `count` rows: numeric coordinates i.i.d. uniform on `[0,1)`, one
/// uniformly chosen active entry per one-hot group.
pub fn sample_synthetic(layout: &FeatureLayout, count: usize, seed: u64) -> Matrix {
    let width = layout.width();
    let mut out = Matrix::zeros(count, width);
    let mut rng = seeded(seed);
    for i in 0..count {
        let row = out.row_mut(i);
        let mut offset = 0;
        for block in &layout.blocks {
            match block {
                FeatureBlock::Numeric { .. } => row[offset] = unit(&mut rng),
                FeatureBlock::OneHot { categories, .. } => {
                    if !categories.is_empty() {
                        row[offset + rng.gen_range(0..categories.len())] = 1.0;
                    }
                }
            }
            offset += block.width();
        }
    }
    out
}

/// [`resolve_count`] followed by [`sample_synthetic`].
pub fn sample_for(layout: &FeatureLayout, config: &SyntheticConfig, n: usize, n_minus: usize) -> Result<Matrix> {
    let count = resolve_count(config.count_policy, n, n_minus)?;
    Ok(sample_synthetic(layout, count, config.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn count_examples() {
        assert_eq!(resolve_count(CountPolicy::MatchReal, 70, 30).unwrap(), 100);
        assert_eq!(resolve_count(CountPolicy::MatchReal, 70_000, 1000).unwrap(), 71_000);
        assert_eq!(resolve_count(CountPolicy::Multiplier(0.001), 70_000, 1000).unwrap(), 71);
        assert_eq!(resolve_count(CountPolicy::Multiplier(3.0), 12, 5).unwrap(), 51);
        assert_eq!(resolve_count(CountPolicy::Multiplier(0.0), 12, 5).unwrap(), 0);
        assert_eq!(resolve_count(CountPolicy::Multiplier(0.5), 1, 0).unwrap(), 1);
        assert!(resolve_count(CountPolicy::Multiplier(-1.0), 1, 0).is_err());
        assert!(resolve_count(CountPolicy::Multiplier(f64::NAN), 1, 0).is_err());
    }

    #[test]
    fn multiplier_zero_is_empty() {
        let cfg = SyntheticConfig { count_policy: CountPolicy::Multiplier(0.0), seed: 1 };
        let m = sample_for(&FeatureLayout::numeric(3), &cfg, 10, 10).unwrap();
        assert_eq!((m.rows(), m.cols()), (0, 3));
    }

    #[test]
    fn uniform_moments_and_chi_square() {
        let n = 100_000;
        let m = sample_synthetic(&FeatureLayout::numeric(2), n, 42);
        // 0.5 ± 3·(1/√12)/√n
        let half = 3.0 * (1.0 / 12f64.sqrt()) / (n as f64).sqrt();
        for j in 0..2 {
            let mut bins = [0usize; 20];
            let mut sum = 0.0;
            for r in m.iter_rows() {
                assert!((0.0..1.0).contains(&r[j]));
                sum += r[j];
                bins[(r[j] * 20.0) as usize] += 1;
            }
            let mean = sum / n as f64;
            assert!((mean - 0.5).abs() <= half, "mean {mean}");
            let e = n as f64 / 20.0;
            let chi2: f64 = bins.iter().map(|&b| (b as f64 - e).powi(2) / e).sum();
            // chi-square(19) upper 1e-3 quantile
            assert!(chi2 < 43.82, "chi2 {chi2}");
        }
    }

    #[test]
    fn one_hot_groups_are_valid_and_uniform() {
        let layout = FeatureLayout {
            blocks: vec![
                FeatureBlock::Numeric { name: "a".into() },
                FeatureBlock::OneHot { name: "c".into(), categories: vec!["x".into(), "y".into(), "z".into()] },
            ],
        };
        let n = 30_000;
        let m = sample_synthetic(&layout, n, 5);
        let mut counts = [0usize; 3];
        for r in m.iter_rows() {
            assert_eq!(r[1] + r[2] + r[3], 1.0);
            for k in 0..3 {
                if r[1 + k] == 1.0 {
                    counts[k] += 1;
                }
            }
        }
        let e = n as f64 / 3.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi2 < 13.82, "chi2 {chi2}");
    }

    #[test]
    fn bit_identical_per_seed() {
        let l = FeatureLayout::numeric(4);
        assert_eq!(sample_synthetic(&l, 100, 9), sample_synthetic(&l, 100, 9));
        assert_ne!(sample_synthetic(&l, 100, 9), sample_synthetic(&l, 100, 10));
    }
}
