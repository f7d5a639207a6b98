//! Core of a benchmark that measures whether neural CATE estimators attribute
//! their predictions to the covariates that truly drive treatment-effect
//! heterogeneity.
//!
//! - [`nn`]: dense networks, Adam, early stopping, MMD balancing penalty.
//! - [`dgp`]: semi-synthetic data with known prognostic/predictive covariates.
//! - [`learners`]: S, T, TARNet/CFRNet, DR and X learners.
//! - [`attribution`]: saliency, integrated gradients, ablation, permutation,
//!   Shapley values.
//! - [`metrics`]: attribution precision on predictive/prognostic sets, PEHE.

pub mod attribution;
pub mod dgp;
pub mod error;
pub mod learners;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
