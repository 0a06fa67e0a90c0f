//! Maximum pairwise Bayes factor (mxPBF) tests for high-dimensional
//! covariance structure.
//!
//! The crate covers one-sample identity testing, diagonality testing,
//! single-pair independence testing, extreme-value calibration of the
//! diagonality statistic, and covariance support recovery with a
//! cross-validated threshold. A simulation and evaluation harness
//! (covariance models, seeded multivariate normal sampling, ROC/AUC,
//! Kolmogorov distance) sits alongside.
//!
//! Every pairwise statistic is derived from a single Gram matrix
//! ([`pairstats::GramCache`]), so a full sweep over `p(p-1)` pairs costs one
//! `O(n p^2)` pass plus `O(1)` work per pair.
//!
//! Column indices are zero-based throughout the Rust API.

// Guards are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayesfactor;
pub mod dataio;
pub mod error;
pub mod evalmetrics;
pub mod hyptest;
pub mod pairstats;
pub mod simulate;
pub mod support;

pub use bayesfactor::{default_hyperparams, B0Policy, GammaMode, HyperParams, LogBF, TestKind};
pub use dataio::{CovarianceSpec, DataMatrix, TableFormat};
pub use error::{Error, Result};
pub use hyptest::{Decision, DecisionRule, TestOutcome};
pub use pairstats::GramCache;
pub use support::{CVReport, Confusion, CvConfig, EmptyLoss, FitBetaOn, SupportEstimate};

/// Deviance-scale value assigned to numerically collinear pairs.
///
/// Finite so that max-aggregation and sorting stay total orders; no finite
/// threshold below it can exclude a flagged pair.
pub const DEVIANCE_CAP: f64 = 1e300;
