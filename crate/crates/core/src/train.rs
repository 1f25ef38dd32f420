//! The three-term weighted empirical risk and its minimization by
//! mini-batch SGD with momentum, weight decay and early stopping.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;
use crate::loss::LossKind;
use crate::mlp::{init_mlp, MlpClassifier, OutputMapping};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Matrix, Result};

/// Normal rows `T`, known anomalies `T⁻` and synthetic anomalies `T′`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSets {
    pub normal: Matrix,
    pub known: Matrix,
    pub synthetic: Matrix,
}

impl TrainingSets {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.normal.rows(), self.known.rows(), self.synthetic.rows())
    }

    fn parts(&self) -> [(&Matrix, f64); 3] {
        [(&self.normal, 1.0), (&self.known, -1.0), (&self.synthetic, -1.0)]
    }
}

/// `s` weighs the normal term; `s̃` splits the anomaly weight between known
/// (`s̃`) and synthetic (`1 - s̃`) anomalies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskWeights {
    pub s: f64,
    pub s_tilde: f64,
}

impl RiskWeights {
    pub fn new(s: f64, s_tilde: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::invalid("s must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&s_tilde) {
            return Err(Error::invalid("s~ must lie in [0, 1]"));
        }
        Ok(RiskWeights { s, s_tilde })
    }

    /// Weights of the normal, known-anomaly and synthetic terms.
    pub fn terms(&self) -> [f64; 3] {
        let a = 1.0 - self.s;
        [self.s, a * self.s_tilde, a * (1.0 - self.s_tilde)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum WeightPreset {
    Explicit { s: f64, s_tilde: f64 },
    /// `s = 1/2`, `s̃ = n⁻/(n⁻+n′)`: balanced classes, a plain mean over the
    /// pooled anomalies.
    #[default]
    Balanced,
    /// Every row weighs the same (weights proportional to counts).
    UnweightedUnion,
}

impl WeightPreset {
    pub fn resolve(&self, n: usize, n_minus: usize, n_prime: usize) -> Result<RiskWeights> {
        match *self {
            WeightPreset::Explicit { s, s_tilde } => RiskWeights::new(s, s_tilde),
            WeightPreset::Balanced => {
                let anomalies = n_minus + n_prime;
                if anomalies == 0 {
                    return Err(Error::config("no anomalies (known or synthetic) to train against"));
                }
                RiskWeights::new(0.5, n_minus as f64 / anomalies as f64)
            }
            WeightPreset::UnweightedUnion => {
                let anomalies = n_minus + n_prime;
                if anomalies == 0 || n == 0 {
                    return Err(Error::config("unweighted union needs both normal rows and anomalies"));
                }
                RiskWeights::new(n as f64 / (n + anomalies) as f64, n_minus as f64 / anomalies as f64)
            }
        }
    }
}

fn per_sample_weights(sets: &TrainingSets, weights: &RiskWeights, renormalize: bool) -> Result<[f64; 3]> {
    let terms = weights.terms();
    let counts = [sets.normal.rows(), sets.known.rows(), sets.synthetic.rows()];
    let mut out = [0.0; 3];
    let mut mass = 0.0;
    for i in 0..3 {
        if terms[i] == 0.0 {
            continue;
        }
        if counts[i] == 0 {
            if renormalize {
                continue;
            }
            return Err(Error::config("a risk term has nonzero weight but no samples"));
        }
        out[i] = terms[i] / counts[i] as f64;
        mass += terms[i];
    }
    if mass == 0.0 {
        return Err(Error::config("every weighted risk term is empty"));
    }
    if renormalize {
        out.iter_mut().for_each(|w| *w /= mass);
    }
    Ok(out)
}

fn risk_with(mlp: &MlpClassifier, sets: &TrainingSets, per_sample: [f64; 3], loss: LossKind) -> Result<f64> {
    let mut total = 0.0;
    for ((m, y), c) in sets.parts().into_iter().zip(per_sample) {
        if c == 0.0 {
            continue;
        }
        let part: f64 = mlp.margins(m)?.into_iter().map(|g| loss.value(y * g)).sum();
        total += c * part;
    }
    Ok(total)
}

/// `(s/n) Σ φ(f(X)) + ((1-s)s̃/n⁻) Σ φ(-f(X⁻)) + ((1-s)(1-s̃)/n′) Σ φ(-f(X′))`.
/// Zero-weight terms are skipped even when their set is empty.
pub fn weighted_empirical_risk(
    mlp: &MlpClassifier,
    sets: &TrainingSets,
    weights: &RiskWeights,
    loss: LossKind,
) -> Result<f64> {
    risk_with(mlp, sets, per_sample_weights(sets, weights, false)?, loss)
}

/// Like [`weighted_empirical_risk`] but empty terms are dropped and the
/// remaining weights rescaled to sum to one (validation splits may lack a
/// class).
pub fn validation_risk(mlp: &MlpClassifier, sets: &TrainingSets, weights: &RiskWeights, loss: LossKind) -> Result<f64> {
    risk_with(mlp, sets, per_sample_weights(sets, weights, true)?, loss)
}

/// Network shape used by [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: ActivationSpec,
    #[serde(default)]
    pub output: OutputMapping,
}

impl ModelConfig {
    /// Depth-3 leaky-ReLU network of [`default_hidden_width`] units.
    pub fn for_input(d: usize) -> Self {
        let w = default_hidden_width(d);
        ModelConfig { hidden: vec![w, w], activation: ActivationSpec::default(), output: OutputMapping::default() }
    }

    pub fn dims(&self, d: usize) -> Vec<usize> {
        let mut dims = vec![d];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }
}

/// Width heuristic: about six units per input feature, kept within
/// `[64, 6000]`.
pub fn default_hidden_width(d: usize) -> usize {
    (6 * d).clamp(64, 6000)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub weights: WeightPreset,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// `None` picks [`ModelConfig::for_input`].
    pub model: Option<ModelConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Logistic,
            weights: WeightPreset::Balanced,
            learning_rate: 1e-3,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 128,
            max_epochs: 500,
            patience: 10,
            seed: 0,
            model: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight decay must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_risk: f64,
    pub val_risk: Option<f64>,
}

/// Per-epoch risks; epoch 0 is the initial network.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Largest training risk before a run counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Trains a fresh network from `config.seed` and returns the snapshot with
/// the lowest validation risk (training risk when `validation` is `None`).
pub fn train(
    config: &TrainConfig,
    sets: &TrainingSets,
    validation: Option<&TrainingSets>,
) -> Result<(MlpClassifier, TrainHistory)> {
    config.validate()?;
    let d = sets.normal.cols();
    let model = config.model.clone().unwrap_or_else(|| ModelConfig::for_input(d));
    let init = init_mlp(&model.dims(d), model.activation, model.output, derive_seed(config.seed, 1))?;
    train_from(config, init, sets, validation)
}

/// [`train`] starting from a given network.
pub fn train_from(
    config: &TrainConfig,
    mut mlp: MlpClassifier,
    sets: &TrainingSets,
    validation: Option<&TrainingSets>,
) -> Result<(MlpClassifier, TrainHistory)> {
    config.validate()?;
    let (n, n_minus, n_prime) = sets.counts();
    let weights = config.weights.resolve(n, n_minus, n_prime)?;
    let per_sample = per_sample_weights(sets, &weights, false)?;
    let val_weights = match validation {
        Some(v) => Some(per_sample_weights(v, &weights, true)?),
        None => None,
    };

    // (set, row, label, weight) for every row of a nonzero-weight term.
    let mut samples: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (k, ((m, y), c)) in sets.parts().into_iter().zip(per_sample).enumerate() {
        if c > 0.0 {
            samples.extend((0..m.rows()).map(|i| (k, i, y, c)));
        }
    }
    let total = samples.len();
    let parts = sets.parts();

    let mut history = TrainHistory::default();
    let evaluate = |mlp: &MlpClassifier| -> Result<(f64, Option<f64>)> {
        let tr = risk_with(mlp, sets, per_sample, config.loss)?;
        let va = match (validation, val_weights) {
            (Some(v), Some(w)) => Some(risk_with(mlp, v, w, config.loss)?),
            _ => None,
        };
        Ok((tr, va))
    };
    let fail = |epoch: usize, history: &TrainHistory| Error::TrainingFailure { epoch, history: history.clone() };

    let (tr, va) = evaluate(&mlp).map_err(|_| fail(0, &history))?;
    history.epochs.push(EpochRecord { epoch: 0, train_risk: tr, val_risk: va });
    let mut best = (va.unwrap_or(tr), mlp.clone());
    let mut since_best = 0;

    let mut rng = seeded(derive_seed(config.seed, 2));
    let mut order: Vec<usize> = (0..total).collect();
    let mut velocity = vec![0.0; mlp.parameter_count()];
    let mut grad = vec![0.0; mlp.parameter_count()];
    let mut ws = mlp.workspace();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = total as f64 / batch.len() as f64;
            for &idx in batch {
                let (k, i, y, c) = samples[idx];
                mlp.accumulate_gradient(parts[k].0.row(i), y, c * scale, config.loss, &mut grad, &mut ws)
                    .map_err(|_| fail(epoch, &history))?;
            }
            let lr = config.learning_rate;
            for ((p, v), g) in mlp.params_mut().iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = config.momentum * *v - lr * (g + config.weight_decay * *p);
                *p += *v;
            }
        }
        let (tr, va) = evaluate(&mlp).map_err(|_| fail(epoch, &history))?;
        history.epochs.push(EpochRecord { epoch, train_risk: tr, val_risk: va });
        if !tr.is_finite() || tr > DIVERGENCE_LIMIT {
            return Err(fail(epoch, &history));
        }
        let monitored = va.unwrap_or(tr);
        if monitored < best.0 {
            best = (monitored, mlp.clone());
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                history.stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    Ok((best.1, history))
}
