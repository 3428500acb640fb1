//! Conditional inference for estimates reported only after a significance
//! screen (the file-drawer setting).
//!
//! An observed t-statistic is treated as a draw from `N(theta, 1)` conditioned
//! on having passed a one-sided, two-sided, or randomized significance rule.
//! The selection-adjusted distribution function is inverted in `theta` to give
//! median-unbiased estimates and equal-tailed confidence intervals, and a
//! seeded Monte Carlo harness checks their conditional validity.

pub mod acceptance;
pub mod conditional;
pub mod error;
pub mod gaussian;
pub mod inference;
pub mod inversion;
pub mod montecarlo;
mod quadrature;

pub use conditional::{conditional_cdf, ConditionalCdfResult, RuleKind, SelectionRule};
pub use error::{Error, Result};






pub use inversion::{conventional_theta, solve_theta, QuantileSolution, SolveConfig};
pub use inference::{
    confidence_interval, conventional_interval, curve, median_unbiased, ConfidenceInterval,
    CurveRow, InferenceProblem, IntervalKind,
};
pub use montecarlo::{CoverageReport, KsReport, SimulationPlan};
