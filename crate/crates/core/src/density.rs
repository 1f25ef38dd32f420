//! Probability densities on the unit cube `[0,1]^d` with respect to the
//! uniform measure.
//!
//! Normalization is not enforced at construction; call
//! [`DensityModel::check_normalization`] to integrate numerically.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{abs, sqrt};
use crate::metrics::quadrature::{integrate, Quadrature};
use crate::rng::{unit, RunRng};
use crate::{Error, Result};

/// Tolerance for `|integral - 1|` in [`DensityModel::check_normalization`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DensityModel {
    Uniform {
        dim: usize,
    },
    /// `max{1 - |x - center| / half_width, 0} / half_width` on `[0,1]`.
    Hat1d {
        center: f64,
        half_width: f64,
    },
    /// `scale * prod_i max{1 - |x_i - c_i| / half_width, 0} / half_width`.
    ProductHat {
        center: Vec<f64>,
        half_width: f64,
        scale: f64,
    },
    Tabulated(TabulatedDensity),
    Mixture {
        components: Vec<WeightedDensity>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDensity {
    pub weight: f64,
    pub density: DensityModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationCheck {
    pub integral: f64,
    /// Zero for grid rules.
    pub std_error: f64,
    pub passes: bool,
}

impl DensityModel {
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("density dimension must be at least 1"));
        }
        Ok(DensityModel::Uniform { dim })
    }

    pub fn hat_1d(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !center.is_finite() {
            return Err(Error::invalid("hat needs a finite center and positive half-width"));
        }
        Ok(DensityModel::Hat1d { center, half_width })
    }

    /// Product hat rescaled so that its mass on `[0,1]^d` is exactly one,
    /// accounting for any part of the support that falls outside the cube.
    pub fn product_hat(center: Vec<f64>, half_width: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("density dimension must be at least 1"));
        }
        if !(half_width > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("hat needs a finite center and positive half-width"));
        }
        let mass: f64 = center.iter().map(|&c| truncated_hat_mass(c, half_width)).product();
        if !(mass > 0.0) {
            return Err(Error::invalid("product hat has no mass inside the unit cube"));
        }
        Ok(DensityModel::ProductHat { center, half_width, scale: 1.0 / mass })
    }

    pub fn mixture(components: Vec<WeightedDensity>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::invalid("mixture needs at least one component"));
        };
        let dim = first.density.dim();
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| !(c.weight >= 0.0) || c.density.dim() != dim) || !(total > 0.0) {
            return Err(Error::invalid(
                "mixture weights must be non-negative with positive sum and equal dimensions",
            ));
        }
        Ok(DensityModel::Mixture { components })
    }

    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Uniform { dim } => *dim,
            DensityModel::Hat1d { .. } => 1,
            DensityModel::ProductHat { center, .. } => center.len(),
            DensityModel::Tabulated(t) => t.dim(),
            DensityModel::Mixture { components } => components[0].density.dim(),
        }
    }

    /// Density value at `x`. Callers guarantee `x.len() == self.dim()`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DensityModel::Uniform { .. } => {
                if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                    1.0
                } else {
                    0.0
                }
            }
            DensityModel::Hat1d { center, half_width } => hat(x[0], *center, *half_width),
            DensityModel::ProductHat { center, half_width, scale } => {
                scale * product_hat_kernel(x, center, *half_width)
            }
            DensityModel::Tabulated(t) => t.eval(x),
            DensityModel::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components.iter().map(|c| c.weight * c.density.eval(x)).sum::<f64>() / total
            }
        }
    }

    /// Upper bound on the density over the cube, used for rejection sampling.
    pub fn upper_bound(&self) -> f64 {
        match self {
            DensityModel::Uniform { .. } => 1.0,
            DensityModel::Hat1d { half_width, .. } => 1.0 / half_width,
            DensityModel::ProductHat { center, half_width, scale } => {
                scale * crate::math::powi(1.0 / half_width, center.len() as u32)
            }
            DensityModel::Tabulated(t) => t.max_value(),
            DensityModel::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components.iter().map(|c| c.weight * c.density.upper_bound()).sum::<f64>() / total
            }
        }
    }

    /// Draws one point from the density restricted to `[0,1]^d` into `out`.
    ///
    /// Hats use the exact triangular inverse CDF with rejection of draws that
    /// leave the cube; tabulated densities use uniform-proposal rejection.
    pub fn sample_into(&self, rng: &mut RunRng, out: &mut [f64]) {
        match self {
            DensityModel::Uniform { .. } => out.iter_mut().for_each(|v| *v = unit(rng)),
            DensityModel::Hat1d { center, half_width } => {
                out[0] = sample_truncated_hat(rng, *center, *half_width);
            }
            DensityModel::ProductHat { center, half_width, .. } => {
                for (v, &c) in out.iter_mut().zip(center) {
                    *v = sample_truncated_hat(rng, c, *half_width);
                }
            }
            DensityModel::Tabulated(t) => {
                let bound = t.max_value();
                loop {
                    out.iter_mut().for_each(|v| *v = unit(rng));
                    if unit(rng) * bound < t.eval(out) {
                        break;
                    }
                }
            }
            DensityModel::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut pick = unit(rng) * total;
                let mut chosen = &components[components.len() - 1].density;
                for c in components {
                    if pick < c.weight {
                        chosen = &c.density;
                        break;
                    }
                    pick -= c.weight;
                }
                chosen.sample_into(rng, out);
            }
        }
    }

    pub fn sample(&self, rng: &mut RunRng, count: usize) -> crate::Matrix {
        let d = self.dim();
        let mut m = crate::Matrix::zeros(count, d);
        for i in 0..count {
            self.sample_into(rng, m.row_mut(i));
        }
        m
    }

    /// Integrates the density over `[0,1]^d`. Grid rules must land within
    /// [`NORMALIZATION_TOLERANCE`] of one; Monte Carlo rules additionally
    /// get four standard errors of slack.
    pub fn check_normalization(&self, rule: &Quadrature) -> NormalizationCheck {
        let result = integrate(self.dim(), rule, |x| self.eval(x));
        let slack = NORMALIZATION_TOLERANCE + 4.0 * result.std_error;
        NormalizationCheck {
            integral: result.value,
            std_error: result.std_error,
            passes: abs(result.value - 1.0) <= slack,
        }
    }
}

#[inline]
fn hat(x: f64, center: f64, half_width: f64) -> f64 {
    let t = 1.0 - abs(x - center) / half_width;
    if t > 0.0 {
        t / half_width
    } else {
        0.0
    }
}

/// Unnormalized product of unit-mass hats: `prod_i max{1 - |x_i - c_i|/w, 0} / w`.
///
/// With `w = 1/2` and `c = 0` this is `prod_i max{2 - 4|x_i|, 0}`.
pub fn product_hat_kernel(x: &[f64], center: &[f64], half_width: f64) -> f64 {
    x.iter().zip(center).map(|(&xi, &ci)| hat(xi, ci, half_width)).product()
}

/// CDF of the unit-mass hat centered at `center`.
fn hat_cdf(y: f64, center: f64, half_width: f64) -> f64 {
    let t = (y - center) / half_width;
    if t <= -1.0 {
        0.0
    } else if t <= 0.0 {
        0.5 * (1.0 + t) * (1.0 + t)
    } else if t < 1.0 {
        1.0 - 0.5 * (1.0 - t) * (1.0 - t)
    } else {
        1.0
    }
}

fn truncated_hat_mass(center: f64, half_width: f64) -> f64 {
    hat_cdf(1.0, center, half_width) - hat_cdf(0.0, center, half_width)
}

fn sample_truncated_hat(rng: &mut RunRng, center: f64, half_width: f64) -> f64 {
    loop {
        let u = unit(rng);
        let t = if u < 0.5 { sqrt(2.0 * u) - 1.0 } else { 1.0 - sqrt(2.0 * (1.0 - u)) };
        let x = center + half_width * t;
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
}

/// Density given by values on a tensor grid of nodes, multilinearly
/// interpolated between nodes and held constant beyond the outermost nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    axes: Vec<Vec<f64>>,
    /// Row-major over `axes`, last axis fastest.
    values: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("tabulated density needs at least one axis"));
        }
        for axis in &axes {
            if axis.len() < 2 || axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid(
                    "each tabulated axis needs at least two strictly increasing nodes",
                ));
            }
        }
        let expected: usize = axes.iter().map(Vec::len).product();
        if values.len() != expected {
            return Err(Error::Shape { expected, got: values.len() });
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("tabulated density values must be finite and non-negative"));
        }
        Ok(TabulatedDensity { axes, values })
    }

    /// Builds the grid from scattered `(point, value)` records that must
    /// cover a full tensor grid exactly once.
    pub fn from_points(dim: usize, points: &[(Vec<f64>, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("density dimension must be at least 1"));
        }
        let mut axes: Vec<Vec<f64>> = alloc::vec![Vec::new(); dim];
        for (p, _) in points {
            if p.len() != dim {
                return Err(Error::Shape { expected: dim, got: p.len() });
            }
            for (axis, &v) in axes.iter_mut().zip(p) {
                axis.push(v);
            }
        }
        for axis in axes.iter_mut() {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
        }
        let expected: usize = axes.iter().map(Vec::len).product();
        if expected != points.len() {
            return Err(Error::invalid("tabulated points do not form a complete tensor grid"));
        }
        let mut values = alloc::vec![f64::NAN; expected];
        for (p, v) in points {
            let mut flat = 0usize;
            for (axis, &c) in axes.iter().zip(p) {
                let idx = axis.partition_point(|&a| a < c);
                flat = flat * axis.len() + idx;
            }
            if !values[flat].is_nan() {
                return Err(Error::invalid("duplicate grid node in tabulated density"));
            }
            values[flat] = *v;
        }
        TabulatedDensity::new(axes, values)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.axes.len();
        // Per axis: lower node index and interpolation weight of the upper node.
        let mut lower = [0usize; 8];
        let mut frac = [0.0f64; 8];
        let mut lower_v: Vec<usize>;
        let mut frac_v: Vec<f64>;
        let (lower, frac): (&mut [usize], &mut [f64]) = if d <= 8 {
            (&mut lower[..d], &mut frac[..d])
        } else {
            lower_v = alloc::vec![0; d];
            frac_v = alloc::vec![0.0; d];
            (&mut lower_v[..], &mut frac_v[..])
        };
        for (a, axis) in self.axes.iter().enumerate() {
            let c = x[a];
            let last = axis.len() - 1;
            if c <= axis[0] {
                lower[a] = 0;
                frac[a] = 0.0;
            } else if c >= axis[last] {
                lower[a] = last - 1;
                frac[a] = 1.0;
            } else {
                let hi = axis.partition_point(|&v| v <= c).min(last);
                let lo = hi - 1;
                lower[a] = lo;
                frac[a] = (c - axis[lo]) / (axis[hi] - axis[lo]);
            }
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for a in 0..d {
                let upper = (corner >> a) & 1 == 1;
                w *= if upper { frac[a] } else { 1.0 - frac[a] };
                flat = flat * self.axes[a].len() + lower[a] + usize::from(upper);
            }
            if w != 0.0 {
                total += w * self.values[flat];
            }
        }
        total
    }
}
