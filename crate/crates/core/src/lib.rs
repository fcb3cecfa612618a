//! Model-agnostic feature significance via single feature introduction.
//!
//! A fitted model is evaluated on inference rows where every feature except
//! the intercept is masked, and again with one feature (or pair) put back.
//! The per-row loss differences are sign-tested, which gives exact
//! finite-sample p-values and order-statistic confidence intervals without
//! refitting the model.
//!
//! Modules:
//! - [`data`]: design matrices, one-hot encoding, masking, splits.
//! - [`loss`]: losses used for training and for the differences.
//! - [`model`]: the model contract and a small feedforward network.
//! - [`sign_test`]: binomial tails, intervals, FDR control.
//! - [`engine`]: first- and second-order tests, screening, β calibration.
//! - [`metrics`]: AUC and balanced accuracy.
//! - [`loco`]: leave-one-covariate-out comparator.
//! - [`sim`]: simulated data and repeated-trial studies.

pub mod data;
pub mod engine;
pub mod error;
pub mod loco;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod par;
pub mod seed;
pub mod sign_test;
pub mod sim;

pub use error::{Error, Result};
