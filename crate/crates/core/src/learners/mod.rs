//! Neural CATE estimators.
//!
//! Every fitted scalar function has two hidden layers of 100 ReLU units. For
//! TARNet and CFRNet the first hidden layer is the shared representation and
//! the second belongs to each outcome head.

mod estimator;
mod fit;
mod io;
mod tarnet;

pub use estimator::{CateEstimator, Networks, Strategy};
pub use fit::{
    dr_pseudo_outcome, fit_dr_from_predictions, fit_dr_learner, fit_dr_with, fit_nuisances, fit_s_learner,
    fit_t_learner, fit_x_learner, fit_x_with, regression_net, t_from_nuisances, NuisanceSet, DEFAULT_CLIP, HIDDEN,
};
pub use io::{load_estimator, save_estimator, Manifest, NetworkEntry};
pub use tarnet::{fit_tarnet, representation_net, FactualObjective, MmdPenalty};
