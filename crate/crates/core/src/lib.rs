//! Semi-supervised anomaly detection by binary classification against a
//! mixture of known anomalies and uniformly sampled synthetic anomalies.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical piece:
//!
//! - [`activation`], [`loss`], [`density`] and [`problem`]: closed-form
//!   objects (approx-sign, hinge/logistic losses, hat densities, the mixture
//!   anomaly density `h2 = s~ h- + (1 - s~)`, regression function, Bayes
//!   classifier, level sets).
//! - [`data`] and [`sampler`]: schema handling, min-max normalization with
//!   one-hot groups, stratified splits and synthetic anomaly generation.
//! - [`mlp`], [`train`] and [`plan`]: the feedforward classifier, the
//!   three-term weighted empirical risk, SGD training, and the
//!   depth/width/sparsity calculator.
//! - [`metrics`]: AUPR, quadrature-based risk, symmetric-difference error,
//!   noise-exponent probing and the bandwidth/approximation bound check.
//! - [`theory`]: scripted numerical experiments built on the above.
//!
//! File formats, the experiment runner and the command line live in the
//! `synthanom` crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is the idiom for rejecting NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod math;

pub mod activation;
pub mod data;
pub mod density;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod plan;
pub mod problem;
pub mod rng;
pub mod sampler;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
