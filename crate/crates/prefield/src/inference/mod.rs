//! Likelihood evaluation and maximum-likelihood fitting.
//!
//! The joint negative log-likelihood over the latent field `s` (at mesh
//! vertices) and behavioural states `beta` factors into four blocks:
//! responses given locations and field, location transitions given field
//! and behaviour, the behavioural random walk, and the field prior. The
//! marginal likelihood of the parameters integrates the latent vector out
//! by a Laplace approximation at the joint mode, found by a damped Newton
//! method that exploits the banded-plus-border sparsity of the Hessian.
//!
//! The standard (location-conditional) model ignores the transition block
//! and has an exact dense Gaussian marginal; both are maximized by the same
//! quasi-Newton driver with central finite-difference gradients.

pub mod fit;
pub mod laplace;
pub mod model;
pub mod newton;
pub mod optimize;
pub mod reparam;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldParams;
use crate::movement::MovementParams;

pub use fit::{fit_preferential, fit_standard, FitOptions, FitReport, StandardFitReport};
pub use laplace::{laplace_nll, LaplaceOptions, LaplaceResult};
pub use model::JointModel;
pub use newton::{inner_newton, InnerResult};
pub use reparam::{FixedMask, ParamSpace, Transform};

/// Full parameter vector: field block and movement block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaFull {
    pub field: FieldParams,
    pub movement: MovementParams,
}

impl ThetaFull {
    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.movement.validate()
    }
}

/// Latent vector of the joint problem: field values at mesh vertices plus
/// behavioural states for every observation of every track (concatenated
/// in track order).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub s: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LatentState {
    pub fn dim(&self) -> usize {
        self.s.len() + self.beta.len()
    }

    pub fn check_dims(&self, m: usize, n_beta: usize) -> Result<()> {
        if self.s.len() != m || self.beta.len() != n_beta {
            return Err(Error::Dimension(format!(
                "latent state has ({}, {}) entries, problem needs ({m}, {n_beta})",
                self.s.len(),
                self.beta.len()
            )));
        }
        Ok(())
    }

    pub fn as_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.s);
        v.extend_from_slice(&self.beta);
        v
    }

    pub fn from_flat(flat: &[f64], m: usize) -> LatentState {
        LatentState { s: flat[..m].to_vec(), beta: flat[m..].to_vec() }
    }
}
