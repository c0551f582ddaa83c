//! Bayesian variable selection through penalized credible regions.
//!
//! Posterior draws under normal, Laplace and Dirichlet-Laplace shrinkage
//! priors are summarized by their mean and covariance; the credible-region
//! problem is then solved along its whole penalty path to obtain an ordering
//! of the predictors. Prior hyperparameters can be chosen to match a target
//! distribution on the coefficient of determination.

pub mod data;
pub mod distributions;
pub mod error;
pub mod experiment;
pub mod path;
pub mod prior;
pub mod rng;
pub mod samplers;
pub mod sim;
pub mod tuning;

pub use data::{Dataset, EigenSpectrum, Standardization};
pub use error::{Error, Result};
pub use path::{SelectionPath, SelectionProblem};
pub use prior::{DlHyperGrid, InverseGammaPrior, PriorFamily, PriorSpec};
pub use rng::RngState;
pub use samplers::{DrawMatrix, McmcConfig, PosteriorSummary};
pub use tuning::{R2Target, TuneFamily, TuneResult};
pub use sim::{EvalCurves, SimDesign, TruthPattern};
pub use experiment::Method;
