//! Training multi-class classifiers from instances of a single class (or a
//! subset of classes) annotated with class-posterior confidence vectors.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small dense MLP with softmax cross-entropy, weighted-loss
//!   backpropagation and Adam.
//! - [`risk`]: per-example loss weights for every estimator (SC-Conf,
//!   Sub-Conf, the noise-robust variants, the weighted baseline) and the
//!   shared weighted empirical risk.
//! - [`ratio`]: kernel density-ratio fitting by least-squares Bregman
//!   matching, used for the noise-robust estimators.
//! - [`synthetic`]: a Gaussian-mixture ground truth with exact posteriors,
//!   exact density ratios and Bayes accuracy.
//! - [`trainer`]: the ERM loop with weak-risk validation.
//! - [`experiment`]: CSV/JSON formats, multi-seed grids and result tables
//!   behind the `scconf` binary.

pub mod error;
pub mod experiment;
pub mod io;
pub mod nn;
pub mod ratio;
pub mod risk;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use nn::{AdamConfig, AdamState, Gradients, Mlp};
pub use ratio::{BregmanConfig, RatioModel};
pub use risk::{ClassSet, ConfidenceVector, EstimatorKind, Weights};
pub use synthetic::{Conditioning, ConfidenceDataset, GaussianMixtureSpec, Noise};
pub use trainer::{TrainConfig, TrainReport};
