//! Fully connected feedforward classifier
//! `f(x) = a · σ(W_L ... σ(W_1 x + b_1) ... + b_L) + c` with exact
//! backpropagation for weighted margin losses.
//!
//! Sign convention: a positive margin means *normal* (label `+1`), a
//! negative one *anomalous* (label `-1`).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::activation::{approx_sign_derivative, approx_sign_unchecked, ActivationSpec};
use crate::loss::LossKind;
use crate::math::{binomial, factorial, powi, sigmoid, sqrt};
use crate::rng::{seeded, unit};
use crate::{Error, Matrix, Result};

/// How the raw network output `z` becomes a score.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputMapping {
    /// Anomaly probability `sigmoid(-z)`; margin `z`.
    #[default]
    SigmoidProbability,
    /// Margin `approx_sign(z)` in `[-1, 1]`.
    TanhLike { k: u32, tau: f64 },
    /// Margin `z`, reported as is.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    dims: Vec<usize>,
    params: Vec<f64>,
    activation: ActivationSpec,
    output: OutputMapping,
}

/// Number of weights and biases for layer widths `dims` (input first, 1 last).
pub fn parameter_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 {
        return Err(Error::invalid("network needs an input width, at least one hidden layer and an output"));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::invalid("output width must be 1"));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("layer widths must be positive"));
    }
    Ok(())
}

/// Hidden layers: He-uniform `U(±√(6/fan_in))`; output layer
/// `U(±1/√fan_in)`; biases zero.
pub fn init_mlp(dims: &[usize], activation: ActivationSpec, output: OutputMapping, seed: u64) -> Result<MlpClassifier> {
    check_dims(dims)?;
    activation.validate()?;
    validate_output(output)?;
    let mut rng = seeded(seed);
    let mut params = Vec::with_capacity(parameter_count(dims));
    let layers = dims.len() - 1;
    for (l, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = if l + 1 == layers { 1.0 / sqrt(fan_in as f64) } else { sqrt(6.0 / fan_in as f64) };
        for _ in 0..fan_in * fan_out {
            params.push((2.0 * unit(&mut rng) - 1.0) * bound);
        }
        params.extend(core::iter::repeat(0.0).take(fan_out));
    }
    Ok(MlpClassifier { dims: dims.to_vec(), params, activation, output })
}

fn validate_output(output: OutputMapping) -> Result<()> {
    if let OutputMapping::TanhLike { k, tau } = output {
        ActivationSpec::ApproxSign { k, tau }.validate()?;
    }
    Ok(())
}

/// Per-layer buffers reused across forward/backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl MlpClassifier {
    pub fn from_parameters(
        dims: Vec<usize>,
        params: Vec<f64>,
        activation: ActivationSpec,
        output: OutputMapping,
    ) -> Result<Self> {
        check_dims(&dims)?;
        activation.validate()?;
        validate_output(output)?;
        let expected = parameter_count(&dims);
        if params.len() != expected {
            return Err(Error::Shape { expected, got: params.len() });
        }
        Ok(MlpClassifier { dims, params, activation, output })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn activation(&self) -> ActivationSpec {
        self.activation
    }

    pub fn output(&self) -> OutputMapping {
        self.output
    }

    pub fn set_output(&mut self, output: OutputMapping) -> Result<()> {
        validate_output(output)?;
        self.output = output;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn workspace(&self) -> Workspace {
        let widths = &self.dims[1..];
        Workspace {
            pre: widths.iter().map(|&w| vec![0.0; w]).collect(),
            post: widths.iter().map(|&w| vec![0.0; w]).collect(),
            delta: widths.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    fn forward_into(&self, x: &[f64], ws: &mut Workspace) -> Result<f64> {
        if x.len() != self.dims[0] {
            return Err(Error::Shape { expected: self.dims[0], got: x.len() });
        }
        let layers = self.dims.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let (w, rest) = self.params[offset..].split_at(fan_in * fan_out);
            let b = &rest[..fan_out];
            offset += fan_in * fan_out + fan_out;
            let (done, todo) = ws.post.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &done[l - 1] };
            let pre = &mut ws.pre[l];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                pre[o] = b[o] + row.iter().zip(input).map(|(a, v)| a * v).sum::<f64>();
            }
            let post = &mut todo[0];
            if l + 1 < layers {
                for o in 0..fan_out {
                    post[o] = self.activation.apply(pre[o]);
                }
            } else {
                post[0] = pre[0];
            }
            if post.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l + 1 });
            }
        }
        Ok(ws.post[layers - 1][0])
    }

    /// Raw network output `z`.
    pub fn raw_output(&self, x: &[f64]) -> Result<f64> {
        self.forward_into(x, &mut self.workspace())
    }

    fn margin_of(&self, z: f64) -> f64 {
        match self.output {
            OutputMapping::TanhLike { k, tau } => approx_sign_unchecked(z, tau, k),
            _ => z,
        }
    }

    fn margin_derivative(&self, z: f64) -> f64 {
        match self.output {
            OutputMapping::TanhLike { k, tau } => approx_sign_derivative(z, tau, k),
            _ => 1.0,
        }
    }

    /// Classification margin: positive means normal.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        Ok(self.margin_of(self.raw_output(x)?))
    }

    /// Score in the output mapping's range.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let z = self.raw_output(x)?;
        Ok(match self.output {
            OutputMapping::SigmoidProbability => sigmoid(-z),
            OutputMapping::TanhLike { .. } => self.margin_of(z),
            OutputMapping::Raw => z,
        })
    }

    /// Anomaly score in `[0, 1]`; higher is more anomalous.
    pub fn anomaly_score(&self, x: &[f64]) -> Result<f64> {
        let z = self.raw_output(x)?;
        Ok(match self.output {
            OutputMapping::TanhLike { .. } => 0.5 * (1.0 - self.margin_of(z)),
            _ => sigmoid(-z),
        })
    }

    /// Estimate of the regression function `2η - 1`: `tanh(z/2)` for
    /// logit-type outputs, the approx-sign margin otherwise.
    pub fn regression_estimate(&self, x: &[f64]) -> Result<f64> {
        let z = self.raw_output(x)?;
        Ok(match self.output {
            OutputMapping::TanhLike { .. } => self.margin_of(z),
            _ => 2.0 * sigmoid(z) - 1.0,
        })
    }

    pub fn margins(&self, x: &Matrix) -> Result<Vec<f64>> {
        let mut ws = self.workspace();
        x.iter_rows().map(|r| Ok(self.margin_of(self.forward_into(r, &mut ws)?))).collect()
    }

    pub fn anomaly_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|r| self.anomaly_score(r)).collect()
    }

    /// Adds `weight · ∇_θ φ(y · g(x))` to `grad` and returns `weight · φ(y · g(x))`.
    pub fn accumulate_gradient(
        &self,
        x: &[f64],
        y: f64,
        weight: f64,
        loss: LossKind,
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> Result<f64> {
        let z = self.forward_into(x, ws)?;
        let g = self.margin_of(z);
        let u = y * g;
        let value = weight * loss.value(u);
        let dz = weight * loss.derivative(u) * y * self.margin_derivative(z);
        if dz == 0.0 {
            return Ok(value);
        }
        let layers = self.dims.len() - 1;
        ws.delta[layers - 1][0] = dz;
        // Walk layers backwards; `end` is one past the current layer's block.
        let mut end = self.params.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let start = end - fan_in * fan_out - fan_out;
            let (gw, gb) = grad[start..end].split_at_mut(fan_in * fan_out);
            let (lower, upper) = ws.delta.split_at_mut(l);
            let delta = &upper[0];
            let input: &[f64] = if l == 0 { x } else { &ws.post[l - 1] };
            for o in 0..fan_out {
                let d = delta[o];
                gb[o] += d;
                if d != 0.0 {
                    for (gwi, v) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                        *gwi += d * v;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[start..start + fan_in * fan_out];
                let prev = &mut lower[l - 1];
                let pre = &ws.pre[l - 1];
                // Row-major sweep; each prev[i] still sums over o in order.
                prev.iter_mut().for_each(|p| *p = 0.0);
                for o in 0..fan_out {
                    let d = delta[o];
                    for (p, wi) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *p += wi * d;
                    }
                }
                for i in 0..fan_in {
                    prev[i] *= self.activation.derivative(pre[i]);
                }
            }
            end = start;
        }
        Ok(value)
    }
}

/// One hidden layer of `2(k+1)` ReLU^k units computing approx-sign exactly:
/// unit pairs `relu(±x - l·tau)^k` with outer weights `±(-1)^l C(k,l)/(k! tau^k)`.
pub fn approx_sign_network(k: u32, tau: f64) -> Result<MlpClassifier> {
    ActivationSpec::ApproxSign { k, tau }.validate()?;
    let units = 2 * (k as usize + 1);
    let mut w = Vec::new();
    let mut b = Vec::new();
    let mut a = Vec::new();
    let scale = factorial(k) * powi(tau, k);
    for l in 0..=k {
        let c = binomial(k, l) / scale * if l % 2 == 0 { 1.0 } else { -1.0 };
        w.push(1.0);
        b.push(-f64::from(l) * tau);
        a.push(c);
        w.push(-1.0);
        b.push(-f64::from(l) * tau);
        a.push(-c);
    }
    let mut params = w;
    params.extend(b);
    params.extend(a);
    params.push(0.0);
    MlpClassifier::from_parameters(vec![1, units, 1], params, ActivationSpec::ReluK { k }, OutputMapping::Raw)
}
