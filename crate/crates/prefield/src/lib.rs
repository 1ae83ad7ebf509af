//! Spatial fields under preferential sampling by moving trackers.
//!
//! This crate simulates Gaussian random fields that are sampled along the
//! paths of trackers whose movement may depend on the field itself, fits
//! both the standard geostatistical model (conditioning on the observed
//! locations) and the joint movement-aware model via a Laplace-approximated
//! marginal likelihood, and scores the resulting spatial predictions.
//!
//! The main pieces:
//!
//! - [`field`]: lattice meshes, finite-element matrices, sparse Matérn
//!   precision construction, sampling, and a dense-covariance oracle.
//! - [`movement`]: the behavioural-state correlated random walk whose drift
//!   blends momentum with descent along the field gradient, plus full track
//!   simulation.
//! - [`inference`]: the joint negative log-likelihood over latent field and
//!   behavioural states, an inner sparse Newton solver, the Laplace marginal,
//!   and quasi-Newton maximum likelihood for both models.
//! - [`predict`] and [`score`]: lattice predictions under both models and
//!   the error/ignorance scores used to compare them.
//! - [`harness`]: configuration, track CSV ingestion with map projection,
//!   replication sweeps, and deterministic artifact output.
//!
//! See the `examples/` directory for runnable entry points covering each
//! capability, or the `prefield` binary for the CLI.

pub mod error;
pub mod field;
pub mod harness;
pub mod inference;
pub mod linalg;
pub mod movement;
pub mod predict;
pub mod score;
pub mod special;

pub use error::{Error, Result};
