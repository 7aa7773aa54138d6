//! Gaussian-process positioning of wireless users from uplink RSS vectors
//! in a distributed massive-MIMO deployment.
//!
//! The crate covers the full pipeline:
//!
//! * [`scenario`] — RRH/user geometry and synthetic per-user RSS (noise-free
//!   for training, shadowed and sensitivity-thresholded for testing);
//! * [`kernel`] / [`likelihood`] / [`train`] — the composite covariance
//!   function, marginal-likelihood training with closed-form gradients, and
//!   conjugate-gradient ascent over several restarts;
//! * [`predict`] — the conventional predictor (CGP) that treats test RSS as
//!   exact, and the noisy-input Monte-Carlo moment-matching predictor (NaGP);
//! * [`metrics`] — RMSE, log-predictive density, 2-sigma coverage, and the
//!   Bayesian Cramer-Rao lower bound on RMSE;
//! * [`gaussian`] — validated multivariate Gaussians and the
//!   product-of-Gaussians identity used for moment manipulations.
//!
//! Everything downstream of a [`config::ScenarioConfig`] and a master seed
//! is deterministic: random streams are derived per purpose and index, so
//! parallel execution cannot change any number.

pub mod config;
pub mod error;
pub mod gaussian;
pub mod kernel;
pub mod likelihood;
pub mod metrics;
pub mod predict;
pub mod rng;
pub mod scenario;
pub mod train;

pub use config::{PathlossMode, PathlossSegment, ScenarioConfig, TrainLayout};
pub use error::{Error, Result};
pub use kernel::Hyperparameters;
pub use metrics::MetricsReport;
pub use predict::{Method, PredictiveDistribution, TestNoiseModel};
pub use scenario::{Location2D, RssMatrix};
pub use train::{AxisTag, TrainedModel};
