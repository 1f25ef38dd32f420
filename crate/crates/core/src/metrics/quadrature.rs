//! Integration over `[0,1]^d` against the uniform measure.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::sqrt;
use crate::rng::{seeded, unit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Quadrature {
    /// Tensor midpoint rule with `points_per_axis^d` nodes.
    Grid { points_per_axis: usize },
    /// Plain Monte Carlo with `samples` uniform draws.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Quadrature {
    /// 10^5 nodes in 1D, 1000^2 in 2D, 200^3 in 3D, 10^6 Monte Carlo draws above.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            0 | 1 => Quadrature::Grid { points_per_axis: 100_000 },
            2 => Quadrature::Grid { points_per_axis: 1000 },
            3 => Quadrature::Grid { points_per_axis: 200 },
            _ => Quadrature::MonteCarlo { samples: 1_000_000, seed: 0x5EED },
        }
    }

    pub fn node_count(&self, dim: usize) -> usize {
        match *self {
            Quadrature::Grid { points_per_axis } => points_per_axis.pow(dim as u32),
            Quadrature::MonteCarlo { samples, .. } => samples,
        }
    }

    /// Calls `visit` on every node; all nodes carry equal weight.
    pub fn for_each_node(&self, dim: usize, mut visit: impl FnMut(&[f64])) {
        let mut x = alloc::vec![0.0; dim];
        match *self {
            Quadrature::Grid { points_per_axis } => {
                let n = points_per_axis;
                let h = 1.0 / n as f64;
                let mut idx = alloc::vec![0usize; dim];
                for (xi, _) in x.iter_mut().zip(&idx) {
                    *xi = 0.5 * h;
                }
                let total = self.node_count(dim);
                for _ in 0..total {
                    visit(&x);
                    for a in (0..dim).rev() {
                        idx[a] += 1;
                        if idx[a] < n {
                            x[a] = (idx[a] as f64 + 0.5) * h;
                            break;
                        }
                        idx[a] = 0;
                        x[a] = 0.5 * h;
                    }
                }
            }
            Quadrature::MonteCarlo { samples, seed } => {
                let mut rng = seeded(seed);
                for _ in 0..samples {
                    for v in x.iter_mut() {
                        *v = unit(&mut rng);
                    }
                    visit(&x);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    /// Monte Carlo standard error; zero for grid rules.
    pub std_error: f64,
}

pub fn integrate(dim: usize, rule: &Quadrature, mut f: impl FnMut(&[f64]) -> f64) -> Integral {
    let mut out = integrate_many(dim, rule, 1, |x, v| v[0] = f(x));
    out.pop().expect("one integrand")
}

/// Integrates `k` integrands that share their per-node work.
pub fn integrate_many(
    dim: usize,
    rule: &Quadrature,
    k: usize,
    mut f: impl FnMut(&[f64], &mut [f64]),
) -> Vec<Integral> {
    let mut sum = alloc::vec![0.0; k];
    let mut sum_sq = alloc::vec![0.0; k];
    let mut vals = alloc::vec![0.0; k];
    rule.for_each_node(dim, |x| {
        f(x, &mut vals);
        for j in 0..k {
            sum[j] += vals[j];
            sum_sq[j] += vals[j] * vals[j];
        }
    });
    let n = rule.node_count(dim) as f64;
    (0..k)
        .map(|j| {
            let mean = sum[j] / n;
            let std_error = match rule {
                Quadrature::Grid { .. } => 0.0,
                Quadrature::MonteCarlo { .. } => {
                    let var = (sum_sq[j] / n - mean * mean).max(0.0);
                    sqrt(var / n)
                }
            };
            Integral { value: mean, std_error }
        })
        .collect()
}
