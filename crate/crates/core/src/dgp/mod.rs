//! Semi-synthetic data generation.
//!
//! Covariates come from a CSV file or a Gaussian generator. Three disjoint
//! index sets of equal size select the prognostic covariates (entering both
//! potential outcomes through `μ_prog`) and the predictive covariates of each
//! arm (entering `f_pred,0` or `f_pred,1`):
//!
//! ```text
//! y0 = μ_prog(x) + ω_pred · f_pred,0(x)
//! y1 = μ_prog(x) + ω_pred · f_pred,1(x)
//! W ~ Bernoulli(π(x)),  Y = W y1 + (1 − W) y0 + ε,  ε ~ N(0, σ²)
//! ```
//!
//! Assignment depends on `x` only through `π`, and every `π` lies strictly
//! inside (0, 1), so consistency, ignorability and positivity hold by
//! construction.

mod covariates;
mod dataset;
mod export;
mod model;
mod propensity;

pub use covariates::{default_names, load_covariates_csv, normalize_columns, synth_covariates, CovariateMatrix, Normalization};
pub use dataset::{
    generate, generate_dataset, train_test_split, DgpConfig, GroundTruth, Observed, SemiSyntheticDataset,
};
pub use export::{
    read_observed_csv, read_sidecar, read_truth_csv, write_dataset_csv, write_sidecar, write_truth_csv, LoadedObserved,
    Sidecar, TruthRow,
};
pub use model::{
    default_set_size, eval_components, eval_components_batch, sample_feature_sets, sample_outcome_model,
    sample_weights, Components, FeatureIndexSets, Nonlinearity, OutcomeModel, TrueCate,
};
pub use propensity::{propensity_scores, PropensityKind, PropensitySpec, ZScoreStats};
