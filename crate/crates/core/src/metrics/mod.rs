//! Evaluation metrics.

pub mod quadrature;
mod ranking;
mod risk;

pub use ranking::{auroc, average_ranks, aupr, per_subtype_aupr, pr_curve, prevalence, spearman, PrPoint, SubtypeScore};
pub use risk::{
    comparison_constant, default_probe_thresholds, misclassification_risk, noise_exponent_probe,
    symmetric_difference_error, sup_error, theorem1_bound_check, BoundCheck, NoiseProbe, RiskEstimate, SetError,
};
pub(crate) use risk::least_squares_slope;
