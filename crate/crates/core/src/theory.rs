//! Numerical experiments on problems with known ground truth, plus the
//! semi-supervised pipeline used for the synthetic-anomaly comparisons.
//!
//! Every experiment is split into independent *cells* (one training run
//! each) and a pure aggregation step, so callers can execute cells in any
//! order or in parallel and still get identical reports.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{mean_impute, ood_flag, split, ClassTag, Normalizer, RawDataset, RawValue, Schema};
use crate::density::{DensityModel, WeightedDensity};
use crate::math::{abs, ln};
use crate::metrics::quadrature::Quadrature;
use crate::activation::ActivationSpec;
use crate::metrics::{
    least_squares_slope, misclassification_risk, per_subtype_aupr, spearman, sup_error, symmetric_difference_error,
    theorem1_bound_check, BoundCheck, SubtypeScore,
};
use crate::mlp::{init_mlp, MlpClassifier, OutputMapping};
use crate::plan::rate_exponent;
use crate::problem::{example1_problem, example2_problem, LevelSetSpec, MixtureProblem, NoiseCondition};
use crate::rng::{derive_seed, seeded, standard_normal};
use crate::sampler::{resolve_count, sample_synthetic, CountPolicy, SyntheticConfig};
use crate::train::{train, ModelConfig, TrainConfig, TrainHistory, TrainingSets, WeightPreset};
use crate::data::FeatureLayout;
use crate::{Error, Matrix, Result};

// ---------------------------------------------------------------------------
// Scenarios

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure2Case {
    /// Normal density with a sparse region where known anomalies are even
    /// sparser: `h1/h-` blows up there, `h1/h2` does not.
    FalseNegative,
    /// Touching supports (the two-hat example).
    ZeroMargin,
}

pub fn scenario_figure2(case: Figure2Case, s: f64, s_tilde: f64) -> Result<MixtureProblem> {
    match case {
        Figure2Case::ZeroMargin => example1_problem(s, s_tilde),
        Figure2Case::FalseNegative => {
            let h1 = DensityModel::mixture(vec![
                WeightedDensity { weight: 0.92, density: DensityModel::hat_1d(0.3, 0.2)? },
                WeightedDensity { weight: 0.08, density: DensityModel::hat_1d(0.65, 0.2)? },
            ])?;
            MixtureProblem::new(h1, DensityModel::hat_1d(0.9, 0.1)?, s, s_tilde)
        }
    }
}

/// Closed-form problems used by the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Scenario {
    Example1 { s: f64, s_tilde: f64 },
    Example2 { d: usize, s: f64, s_tilde: f64 },
}

impl Scenario {
    pub fn problem(&self) -> Result<MixtureProblem> {
        match *self {
            Scenario::Example1 { s, s_tilde } => example1_problem(s, s_tilde),
            Scenario::Example2 { d, s, s_tilde } => example2_problem(d, s, s_tilde),
        }
    }
}

/// Draws `n` normals from `h1`, `n_minus` known anomalies from `h-` and
/// `n_prime` uniform synthetic anomalies, each from its own stream.
pub fn draw_training_sets(problem: &MixtureProblem, n: usize, n_minus: usize, n_prime: usize, seed: u64) -> TrainingSets {
    let d = problem.dim();
    TrainingSets {
        normal: problem.h1().sample(&mut seeded(derive_seed(seed, 11)), n),
        known: problem.h_minus().sample(&mut seeded(derive_seed(seed, 12)), n_minus),
        synthetic: sample_synthetic(&FeatureLayout::numeric(d), n_prime, derive_seed(seed, 13)),
    }
}

fn problem_weights(problem: &MixtureProblem) -> WeightPreset {
    WeightPreset::Explicit { s: problem.s(), s_tilde: problem.s_tilde() }
}

/// Draws training and validation sets matching `problem`'s mixture: known
/// anomalies only when `s~ > 0`, synthetic ones only when `s~ < 1`.
fn draw_for_problem(problem: &MixtureProblem, n: usize, synthetic_factor: f64, seed: u64) -> (TrainingSets, TrainingSets) {
    let st = problem.s_tilde();
    let n_minus = if st > 0.0 { n } else { 0 };
    let n_prime = if st < 1.0 { (synthetic_factor * n as f64 + 0.5) as usize } else { 0 };
    let v = (n / 4).max(10);
    let v_minus = if n_minus > 0 { v } else { 0 };
    let v_prime = if n_prime > 0 { (synthetic_factor * v as f64 + 0.5) as usize } else { 0 };
    (
        draw_training_sets(problem, n, n_minus, n_prime, derive_seed(seed, 1)),
        draw_training_sets(problem, v, v_minus, v_prime, derive_seed(seed, 2)),
    )
}

/// With `steps_per_epoch` set, the batch grows with the sample so that the
/// gradient noise (and hence the final boundary jitter) shrinks as `n` grows.
pub fn trained_model(
    problem: &MixtureProblem,
    n: usize,
    synthetic_factor: f64,
    base: &TrainConfig,
    steps_per_epoch: Option<usize>,
    seed: u64,
) -> Result<(MlpClassifier, TrainHistory)> {
    let (sets, val) = draw_for_problem(problem, n, synthetic_factor, seed);
    let mut cfg = TrainConfig { weights: problem_weights(problem), seed: derive_seed(seed, 3), ..base.clone() };
    if let Some(steps) = steps_per_epoch {
        let (a, b, c) = sets.counts();
        cfg.batch_size = cfg.batch_size.max((a + b + c).div_ceil(steps.max(1)));
    }
    train(&cfg, &sets, Some(&val))
}

/// Training setup used by the one-dimensional experiments. Patience equals
/// the epoch budget: validation sets are small and noisy at low `n`, so
/// stopping early mostly stops on noise; the best-validation epoch is still
/// the one returned.
pub fn default_1d_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        batch_size: 64,
        max_epochs: 300,
        patience: 300,
        weight_decay: 0.0,
        model: Some(ModelConfig { hidden: vec![32, 32], ..ModelConfig::for_input(1) }),
        ..TrainConfig::default()
    }
}

// ---------------------------------------------------------------------------
// Convergence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub scenario: Scenario,
    /// Strictly increasing; `n = n⁻`, `n′ = synthetic_factor · n`.
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub synthetic_factor: f64,
    /// Level-set threshold for the set error (defaults to `(1-s)/s`).
    pub rho: Option<f64>,
    pub quadrature: Option<Quadrature>,
    /// Grows the batch with `n` to cap the optimizer steps per epoch.
    pub steps_per_epoch: Option<usize>,
}

impl ExperimentGrid {
    pub fn example1(sizes: Vec<usize>, seeds: Vec<u64>) -> Self {
        ExperimentGrid {
            scenario: Scenario::Example1 { s: 0.5, s_tilde: 0.5 },
            sizes,
            seeds,
            train: default_1d_train_config(),
            synthetic_factor: 2.0,
            rho: None,
            quadrature: None,
            steps_per_epoch: Some(50),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("experiment grid needs sizes and seeds"));
        }
        if self.sizes.iter().any(|&n| n < 10) {
            return Err(Error::config("every sample size must be at least 10"));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("sample sizes must be strictly increasing"));
        }
        if !(self.synthetic_factor >= 0.0 && self.synthetic_factor.is_finite()) {
            return Err(Error::config("synthetic factor must be finite and non-negative"));
        }
        self.train.validate()
    }

    pub fn cells(&self) -> Vec<(usize, u64)> {
        self.sizes.iter().flat_map(|&n| self.seeds.iter().map(move |&s| (n, s))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub seed: u64,
    pub excess_risk: Option<f64>,
    pub s_error: Option<f64>,
    pub epochs: usize,
    pub failure: Option<String>,
}

/// One training run of the convergence study. Failures are recorded, not
/// propagated.
pub fn convergence_cell(grid: &ExperimentGrid, n: usize, seed: u64) -> Result<RunRecord> {
    let problem = grid.scenario.problem()?;
    let rule = grid.quadrature.unwrap_or_else(|| Quadrature::default_for(problem.dim()));
    let spec = match grid.rho {
        Some(r) => LevelSetSpec::new(r)?,
        None => problem.default_level_set(),
    };
    let cell_seed = derive_seed(seed, n as u64);
    let outcome = trained_model(&problem, n, grid.synthetic_factor, &grid.train, grid.steps_per_epoch, cell_seed).and_then(|(m, h)| {
        let r = misclassification_risk(&problem, |x| m.margin(x), &rule)?;
        let s = symmetric_difference_error(&problem, |x| m.margin(x), spec, &rule)?;
        Ok((r.excess, s.value, h.epochs.len() - 1))
    });
    Ok(match outcome {
        Ok((excess, s, epochs)) => {
            RunRecord { n, seed, excess_risk: Some(excess), s_error: Some(s), epochs, failure: None }
        }
        Err(e) => RunRecord { n, seed, excess_risk: None, s_error: None, epochs: 0, failure: Some(e.to_string()) },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub median_excess_risk: f64,
    pub median_s_error: f64,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of `log(median excess)` on `log n` (negative means decay).
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub runs: Vec<RunRecord>,
    pub rate: Option<RateFit>,
    /// Spearman correlation of set error and excess risk over all runs.
    pub set_vs_excess_spearman: Option<f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

fn log_log_slope(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(_, e)| *e > 0.0).map(|&(n, e)| (ln(n as f64), ln(e))).collect();
    least_squares_slope(&pts)
}

/// Medians per size, the log-log rate fit with a 95% bootstrap interval
/// (seeds resampled within each size) and the set-error/excess correlation.
pub fn summarize_convergence(grid: &ExperimentGrid, mut runs: Vec<RunRecord>) -> ConvergenceReport {
    runs.sort_by_key(|r| (r.n, r.seed));
    let by_size: Vec<(usize, Vec<&RunRecord>)> =
        grid.sizes.iter().map(|&n| (n, runs.iter().filter(|r| r.n == n).collect())).collect();
    let mut rows = Vec::new();
    for (n, rs) in &by_size {
        let mut ex: Vec<f64> = rs.iter().filter_map(|r| r.excess_risk).collect();
        let mut se: Vec<f64> = rs.iter().filter_map(|r| r.s_error).collect();
        rows.push(ConvergenceRow {
            n: *n,
            median_excess_risk: median(&mut ex).unwrap_or(f64::NAN),
            median_s_error: median(&mut se).unwrap_or(f64::NAN),
            runs: rs.len(),
            failures: rs.iter().filter(|r| r.failure.is_some()).count(),
        });
    }
    let rate = log_log_slope(&rows.iter().map(|r| (r.n, r.median_excess_risk)).collect::<Vec<_>>()).map(|slope| {
        let mut rng = seeded(derive_seed(0xB007, grid.seeds.len() as u64));
        let mut slopes = Vec::new();
        for _ in 0..1000 {
            let pts: Vec<(usize, f64)> = by_size
                .iter()
                .filter_map(|(n, rs)| {
                    let vals: Vec<f64> = rs.iter().filter_map(|r| r.excess_risk).collect();
                    if vals.is_empty() {
                        return None;
                    }
                    let mut draw: Vec<f64> = (0..vals.len()).map(|_| vals[rng.gen_range(0..vals.len())]).collect();
                    median(&mut draw).map(|m| (*n, m))
                })
                .collect();
            if let Some(s) = log_log_slope(&pts) {
                slopes.push(s);
            }
        }
        slopes.sort_by(f64::total_cmp);
        let q = |p: f64| slopes.get(((slopes.len() as f64 - 1.0) * p) as usize).copied().unwrap_or(f64::NAN);
        RateFit { slope, ci_low: q(0.025), ci_high: q(0.975) }
    });
    let pairs: Vec<(f64, f64)> = runs.iter().filter_map(|r| Some((r.s_error?, r.excess_risk?))).collect();
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let set_vs_excess_spearman = spearman(&a, &b).ok();
    ConvergenceReport { rows, runs, rate, set_vs_excess_spearman }
}

pub fn convergence_experiment(grid: &ExperimentGrid) -> Result<ConvergenceReport> {
    grid.validate()?;
    let runs = grid.cells().into_iter().map(|(n, s)| convergence_cell(grid, n, s)).collect::<Result<Vec<_>>>()?;
    Ok(summarize_convergence(grid, runs))
}

/// `alpha (q+1) / (d + alpha (q+2))` for comparison with a fitted slope.
pub fn theoretical_rate(alpha: f64, d: u32, q: f64) -> f64 {
    rate_exponent(alpha, d, q)
}

// ---------------------------------------------------------------------------
// Discontinuity

pub const DISCONTINUITY_RESOLUTIONS: [usize; 4] = [12_500, 25_000, 50_000, 100_000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityConfig {
    pub s: f64,
    /// Known-anomaly share of the contrast problem (`s~ < 1`).
    pub contrast_s_tilde: f64,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    /// Epoch budget (and patience) of the contrast models. Their worst point
    /// is the endpoint x = 1, where f_P falls to -1 with slope 64; getting
    /// there takes far more small-batch steps than the zero-margin fits,
    /// whose error is pinned by the jump anyway.
    pub contrast_epochs: usize,
    pub steps_per_epoch: Option<usize>,
    pub resolutions: Vec<usize>,
}

impl Default for DiscontinuityConfig {
    fn default() -> Self {
        DiscontinuityConfig {
            s: 0.5,
            contrast_s_tilde: 0.5,
            n: 4000,
            seeds: vec![1, 2, 3],
            train: default_1d_train_config(),
            contrast_epochs: 1000,
            steps_per_epoch: Some(200),
            resolutions: DISCONTINUITY_RESOLUTIONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupErrorAt {
    pub resolution: usize,
    pub sup_error: f64,
    /// `1 - |f(b) - f(a)| / 2` for the grid nodes `a < 1/2 < b` closest to
    /// the jump; a lower bound on the sup error of any continuous `f` there.
    pub jump_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityRecord {
    pub s_tilde: f64,
    pub seed: u64,
    pub zero_margin: bool,
    pub errors: Vec<SupErrorAt>,
    pub failure: Option<String>,
}

/// Grid sup error of `f` against `f_P` at each resolution, with the jump
/// bound around `x = 1/2`.
pub fn sup_error_profile(
    problem: &MixtureProblem,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    resolutions: &[usize],
) -> Result<Vec<SupErrorAt>> {
    resolutions
        .iter()
        .map(|&n| {
            let sup = sup_error(problem, &mut f, n)?;
            let h = 1.0 / n as f64;
            let (a, b) = if n % 2 == 0 { (0.5 - h, 0.5 + h) } else { (0.5 - 0.5 * h, 0.5 + 0.5 * h) };
            let jump_bound = 1.0 - abs(f(&[b])? - f(&[a])?) / 2.0;
            Ok(SupErrorAt { resolution: n, sup_error: sup, jump_bound })
        })
        .collect()
}

/// The zero-margin problem has `s~ = 1` (no synthetic anomalies, `h2 = h-`).
pub fn discontinuity_cell(cfg: &DiscontinuityConfig, zero_margin: bool, seed: u64) -> Result<DiscontinuityRecord> {
    let s_tilde = if zero_margin { 1.0 } else { cfg.contrast_s_tilde };
    let problem = example1_problem(cfg.s, s_tilde)?;
    let train = if zero_margin {
        cfg.train.clone()
    } else {
        TrainConfig { max_epochs: cfg.contrast_epochs, patience: cfg.contrast_epochs, ..cfg.train.clone() }
    };
    let outcome = trained_model(&problem, cfg.n, 2.0, &train, cfg.steps_per_epoch, derive_seed(seed, 0xD15C))
        .and_then(|(m, _)| sup_error_profile(&problem, |x| m.regression_estimate(x), &cfg.resolutions));
    Ok(match outcome {
        Ok(errors) => DiscontinuityRecord { s_tilde, seed, zero_margin, errors, failure: None },
        Err(e) => DiscontinuityRecord { s_tilde, seed, zero_margin, errors: vec![], failure: Some(e.to_string()) },
    })
}

pub fn discontinuity_demo(cfg: &DiscontinuityConfig) -> Result<Vec<DiscontinuityRecord>> {
    cfg.train.validate()?;
    let mut out = Vec::new();
    for zero_margin in [true, false] {
        for &seed in &cfg.seeds {
            out.push(discontinuity_cell(cfg, zero_margin, seed)?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bound verification

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundModelKind {
    /// Freshly initialized ReLU network, raw output.
    Random,
    /// Trained on the scenario; `f` is the network's regression estimate.
    Trained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSuiteConfig {
    pub s: f64,
    pub s_tilde: f64,
    pub tau: f64,
    pub k: u32,
    pub noise: NoiseCondition,
    pub random_models: usize,
    pub random_hidden: Vec<usize>,
    pub trained_models: usize,
    pub n_train: usize,
    pub train: TrainConfig,
    /// Grid points for the risk and intervals for the sup norm.
    pub grid: usize,
    pub slack: f64,
    pub seed: u64,
}

impl Default for BoundSuiteConfig {
    fn default() -> Self {
        BoundSuiteConfig {
            s: 0.5,
            s_tilde: 0.5,
            tau: 0.05,
            k: 1,
            noise: NoiseCondition::trivial(),
            random_models: 100,
            random_hidden: vec![8, 8],
            trained_models: 5,
            n_train: 1000,
            train: default_1d_train_config(),
            grid: 100_000,
            slack: 1e-3,
            seed: 0,
        }
    }
}

impl BoundSuiteConfig {
    pub fn cells(&self) -> Vec<(BoundModelKind, usize)> {
        let random = (0..self.random_models).map(|i| (BoundModelKind::Random, i));
        random.chain((0..self.trained_models).map(|i| (BoundModelKind::Trained, i))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub kind: BoundModelKind,
    pub index: usize,
    pub check: Option<BoundCheck>,
    pub failure: Option<String>,
}

pub fn bound_cell(cfg: &BoundSuiteConfig, kind: BoundModelKind, index: usize) -> Result<BoundRecord> {
    let problem = example1_problem(cfg.s, cfg.s_tilde)?;
    let rule = Quadrature::Grid { points_per_axis: cfg.grid };
    let check = |f: &dyn Fn(&[f64]) -> Result<f64>| {
        theorem1_bound_check(f, &problem, cfg.tau, cfg.k, cfg.noise, &rule, cfg.grid, cfg.slack)
    };
    let outcome = match kind {
        BoundModelKind::Random => {
            let mut dims = vec![1];
            dims.extend(&cfg.random_hidden);
            dims.push(1);
            let seed = derive_seed(cfg.seed, 0x5A_0000 + index as u64);
            init_mlp(&dims, ActivationSpec::Relu, OutputMapping::Raw, seed).and_then(|m| check(&|x| m.raw_output(x)))
        }
        BoundModelKind::Trained => {
            let seed = derive_seed(cfg.seed, 0x7B_0000 + index as u64);
            trained_model(&problem, cfg.n_train, 2.0, &cfg.train, Some(50), seed)
                .and_then(|(m, _)| check(&|x| m.regression_estimate(x)))
        }
    };
    Ok(match outcome {
        Ok(c) => BoundRecord { kind, index, check: Some(c), failure: None },
        Err(e) => BoundRecord { kind, index, check: None, failure: Some(e.to_string()) },
    })
}

pub fn verify_bound(cfg: &BoundSuiteConfig) -> Result<Vec<BoundRecord>> {
    cfg.train.validate()?;
    cfg.cells().into_iter().map(|(kind, i)| bound_cell(cfg, kind, i)).collect()
}

// ---------------------------------------------------------------------------
// Semi-supervised pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub synthetic: SyntheticConfig,
    pub val_fraction: f64,
    /// Adds synthetic anomalies to the validation split in proportion.
    pub synthetic_in_validation: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            synthetic: SyntheticConfig::default(),
            val_fraction: 0.2,
            synthetic_in_validation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub model: MlpClassifier,
    pub normalizer: Normalizer,
    pub history: TrainHistory,
    pub n_synthetic: usize,
    pub warnings: Vec<String>,
}

/// Imputes, normalizes, splits, adds synthetic anomalies and trains.
pub fn fit_pipeline(train_raw: &RawDataset, cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let imputed = mean_impute(train_raw)?;
    let normalizer = Normalizer::fit(&imputed)?;
    let data = normalizer.apply(&imputed)?;
    let parts = split(&data, cfg.val_fraction, derive_seed(cfg.train.seed, 21))?;
    let (tr, va) = (parts.train, parts.validation);
    let n = tr.count(ClassTag::Normal);
    let n_minus = tr.count(ClassTag::KnownAnomaly);
    let n_prime = resolve_count(cfg.synthetic.count_policy, n, n_minus)?;
    let n_prime_val = if cfg.synthetic_in_validation {
        (n_prime as f64 * cfg.val_fraction / (1.0 - cfg.val_fraction) + 0.5) as usize
    } else {
        0
    };
    let synthetic = sample_synthetic(&data.layout, n_prime + n_prime_val, cfg.synthetic.seed);
    let idx: Vec<usize> = (0..n_prime + n_prime_val).collect();
    let sets = TrainingSets {
        normal: tr.rows_with(ClassTag::Normal),
        known: tr.rows_with(ClassTag::KnownAnomaly),
        synthetic: synthetic.select(&idx[..n_prime]),
    };
    let val = TrainingSets {
        normal: va.rows_with(ClassTag::Normal),
        known: va.rows_with(ClassTag::KnownAnomaly),
        synthetic: synthetic.select(&idx[n_prime..]),
    };
    let (model, history) = train(&cfg.train, &sets, Some(&val))?;
    Ok(PipelineOutcome { model, normalizer, history, n_synthetic: n_prime, warnings: parts.warnings })
}

/// Anomaly scores with the out-of-domain rule: rows leaving the training
/// range (or carrying unseen categories) score 1.
pub fn score_rows(model: &MlpClassifier, normalizer: &Normalizer, raw: &RawDataset) -> Result<Vec<f64>> {
    let data = normalizer.apply(raw)?;
    data.features
        .iter_rows()
        .map(|r| if ood_flag(&data.layout, r) { Ok(1.0) } else { model.anomaly_score(r) })
        .collect()
}

pub fn evaluate_pipeline(outcome: &PipelineOutcome, test_raw: &RawDataset) -> Result<Vec<SubtypeScore>> {
    let scores = score_rows(&outcome.model, &outcome.normalizer, test_raw)?;
    let anomalous: Vec<bool> = test_raw.tags.iter().map(|t| t.is_anomaly()).collect();
    per_subtype_aupr(&scores, &anomalous, &test_raw.subtypes)
}

/// Sizes of the two-dimensional three-cluster scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSizes {
    pub normal_train: usize,
    pub known_train: usize,
    pub normal_test: usize,
    pub known_test: usize,
    pub unknown_test: usize,
}

impl Default for ClusterSizes {
    fn default() -> Self {
        ClusterSizes { normal_train: 1000, known_train: 100, normal_test: 500, known_test: 50, unknown_test: 50 }
    }
}

/// Normal cluster around (0.5, 0.3) (sd 0.07); known anomalies in a wide
/// band around (0.5, 0.8) (sd 0.2 across, 0.05 up); and — at test time
/// only — unknown anomalies around (0.15, 0.3) (sd 0.03). The unknowns sit
/// level with the normal cluster, on its side of any normal-vs-known
/// boundary, yet in a region with no training mass, inside the training
/// bounding box. Subtypes: `known`, `unknown`.
pub fn three_cluster_scenario(seed: u64, sizes: ClusterSizes) -> (RawDataset, RawDataset) {
    let mut rng = seeded(derive_seed(seed, 0xF16));
    let mut blob = |c: (f64, f64), sd: (f64, f64), count: usize, tag: ClassTag, sub: Option<&str>, out: &mut RawDataset| {
        for _ in 0..count {
            let x = c.0 + sd.0 * standard_normal(&mut rng);
            let y = c.1 + sd.1 * standard_normal(&mut rng);
            out.rows.push(vec![RawValue::Numeric(Some(x)), RawValue::Numeric(Some(y))]);
            out.tags.push(tag);
            out.subtypes.push(sub.map(|s| s.to_string()));
        }
    };
    let empty = |source: &str| RawDataset {
        schema: Schema::numeric(2),
        rows: vec![],
        tags: vec![],
        subtypes: vec![],
        source: source.into(),
    };
    let mut train = empty("three-cluster/train");
    let mut test = empty("three-cluster/test");
    let (normal, known, unknown) = ((0.5, 0.3), (0.5, 0.8), (0.15, 0.3));
    let (normal_sd, known_sd, unknown_sd) = ((0.07, 0.07), (0.2, 0.05), (0.03, 0.03));
    blob(normal, normal_sd, sizes.normal_train, ClassTag::Normal, None, &mut train);
    blob(known, known_sd, sizes.known_train, ClassTag::KnownAnomaly, Some("known"), &mut train);
    blob(normal, normal_sd, sizes.normal_test, ClassTag::Normal, None, &mut test);
    blob(known, known_sd, sizes.known_test, ClassTag::KnownAnomaly, Some("known"), &mut test);
    blob(unknown, unknown_sd, sizes.unknown_test, ClassTag::KnownAnomaly, Some("unknown"), &mut test);
    (train, test)
}

/// Training setup for small two-dimensional tabular runs.
pub fn default_2d_pipeline(seed: u64, policy: CountPolicy, hidden: Vec<usize>) -> PipelineConfig {
    PipelineConfig {
        train: TrainConfig {
            learning_rate: 0.01,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            seed,
            model: Some(ModelConfig { hidden, ..ModelConfig::for_input(2) }),
            ..TrainConfig::default()
        },
        synthetic: SyntheticConfig { count_policy: policy, seed: derive_seed(seed, 0x5A) },
        ..PipelineConfig::default()
    }
}

// ---------------------------------------------------------------------------
// Ablation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub widths: Vec<usize>,
    /// Number of hidden layers.
    pub depths: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: PipelineConfig,
}

impl AblationSpec {
    /// Desk-scale version of the width/depth/synthetic-count grid: widths
    /// 16/32/64, 2/3/8 hidden layers, multipliers 0, 0.001, 1, 5 and 20 of
    /// the real training count, seeds 0..3.
    pub fn desk_default() -> Self {
        AblationSpec {
            widths: vec![16, 32, 64],
            depths: vec![2, 3, 8],
            multipliers: vec![0.0, 0.001, 1.0, 5.0, 20.0],
            seeds: vec![0, 1, 2],
            base: default_2d_pipeline(0, CountPolicy::MatchReal, vec![32, 32]),
        }
    }

    pub fn cells(&self) -> Vec<AblationCellId> {
        let mut out = Vec::new();
        for &width in &self.widths {
            for &depth in &self.depths {
                for &multiplier in &self.multipliers {
                    for &seed in &self.seeds {
                        out.push(AblationCellId { width, depth, multiplier, seed });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.depths.is_empty() || self.multipliers.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("ablation axes must be non-empty"));
        }
        if self.widths.contains(&0) || self.depths.contains(&0) {
            return Err(Error::config("widths and depths must be positive"));
        }
        Ok(())
    }

    /// Pipeline for one cell. The training, split and synthetic seeds
    /// depend only on `seed`, so a zero-multiplier cell equals the
    /// no-synthetic baseline run with the same seed.
    pub fn cell_config(&self, id: &AblationCellId) -> PipelineConfig {
        let mut cfg = self.base.clone();
        cfg.train.seed = id.seed;
        let mut model = cfg.train.model.clone().unwrap_or_else(|| ModelConfig::for_input(2));
        model.hidden = vec![id.width; id.depth];
        cfg.train.model = Some(model);
        cfg.synthetic = SyntheticConfig {
            count_policy: CountPolicy::Multiplier(id.multiplier),
            seed: derive_seed(id.seed, 0x5A),
        };
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationCellId {
    pub width: usize,
    pub depth: usize,
    pub multiplier: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub id: AblationCellId,
    pub scores: Vec<SubtypeScore>,
    pub failure: Option<String>,
}

pub fn run_pipeline_cell(train_raw: &RawDataset, test_raw: &RawDataset, cfg: &PipelineConfig) -> Result<Vec<SubtypeScore>> {
    let outcome = fit_pipeline(train_raw, cfg)?;
    evaluate_pipeline(&outcome, test_raw)
}

pub fn ablation_cell(spec: &AblationSpec, id: AblationCellId, train_raw: &RawDataset, test_raw: &RawDataset) -> AblationCell {
    match run_pipeline_cell(train_raw, test_raw, &spec.cell_config(&id)) {
        Ok(scores) => AblationCell { id, scores, failure: None },
        Err(e) => AblationCell { id, scores: vec![], failure: Some(e.to_string()) },
    }
}

/// The no-synthetic baseline with the same seeds as a zero-multiplier cell.
pub fn baseline_config(spec: &AblationSpec, width: usize, depth: usize, seed: u64) -> PipelineConfig {
    let mut cfg = spec.cell_config(&AblationCellId { width, depth, multiplier: 0.0, seed });
    cfg.synthetic.count_policy = CountPolicy::Absolute(0);
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub width: usize,
    pub depth: usize,
    pub multiplier: f64,
    pub subtype: String,
    pub mean_aupr: f64,
    pub sd_aupr: f64,
    pub seeds: usize,
}

/// Mean and sample standard deviation over seeds, per (cell, subtype).
pub fn summarize_ablation(cells: &[AblationCell]) -> Vec<AblationRow> {
    let mut keys: Vec<(usize, usize, f64, String)> = Vec::new();
    for c in cells {
        for s in &c.scores {
            let k = (c.id.width, c.id.depth, c.id.multiplier, s.subtype.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    keys.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)).then(a.3.cmp(&b.3)));
    keys.into_iter()
        .map(|(width, depth, multiplier, subtype)| {
            let vals: Vec<f64> = cells
                .iter()
                .filter(|c| c.id.width == width && c.id.depth == depth && c.id.multiplier == multiplier)
                .flat_map(|c| c.scores.iter().filter(|s| s.subtype == subtype).map(|s| s.aupr))
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = if vals.len() > 1 {
                crate::math::sqrt(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
            } else {
                0.0
            };
            AblationRow { width, depth, multiplier, subtype, mean_aupr: mean, sd_aupr: sd, seeds: vals.len() }
        })
        .collect()
}

pub fn ablation_grid(spec: &AblationSpec, train_raw: &RawDataset, test_raw: &RawDataset) -> Result<Vec<AblationCell>> {
    spec.validate()?;
    Ok(spec.cells().into_iter().map(|id| ablation_cell(spec, id, train_raw, test_raw)).collect())
}

/// Small matrix helper for callers assembling sets by hand.
pub fn stack(rows: &[&Matrix]) -> Result<Matrix> {
    let cols = rows.first().map_or(0, |m| m.cols());
    let mut out = Matrix::with_cols(cols);
    for m in rows {
        out.append(m)?;
    }
    Ok(out)
}
