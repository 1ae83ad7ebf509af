//! Field prediction on target lattices under both models.
//!
//! The movement-aware model predicts with the latent mode at the fitted
//! parameters, with variances read from the inverse joint Hessian and
//! propagated through the interpolation weights (using the full 3-vertex
//! joint covariance of each target's triangle, not just the marginals).
//! The standard model predicts by simple kriging at its fitted parameters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{build_precision, matern_cov, matern_covariance_matrix, FieldParams};
use crate::inference::{JointModel, LaplaceResult, ThetaFull};
use crate::linalg::dense::cholesky_with_jitter;
use crate::movement::Track;

/// Predictions at a set of locations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionGrid {
    pub locations: Vec<(f64, f64)>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub model_tag: String,
    /// Targets outside the mesh hull are flagged invalid (their mean and
    /// variance are NaN) and must be excluded from scoring.
    pub valid: Vec<bool>,
}

impl PredictionGrid {
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Regular lattice of prediction targets over a rectangle (row-major).
pub fn target_lattice(rect: crate::field::Rect, rows: usize, cols: usize) -> Vec<(f64, f64)> {
    let hx = rect.width() / (cols - 1) as f64;
    let hy = rect.height() / (rows - 1) as f64;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push((rect.x_min + c as f64 * hx, rect.y_min + r as f64 * hy));
        }
    }
    out
}

/// Mode-based prediction for the movement-aware model.
///
/// `laplace` must be the inner state at the fitted parameters. The
/// prediction mean is `mu + s_hat` interpolated at each target; the
/// variance is `w' Cov_T w` where `Cov_T` is the 3x3 block of the inverse
/// joint Hessian on the target's triangle.
pub fn predict_preferential(
    model: &JointModel,
    theta: &ThetaFull,
    laplace: &LaplaceResult,
    targets: &[(f64, f64)],
) -> Result<PredictionGrid> {
    let mesh = model.mesh();
    let bundle = build_precision(mesh, model.fem(), &theta.field)?;
    let mut hess = model.hessian_workspace();
    model.joint_nll_grad_hess(&laplace.mode, theta, &bundle, &mut hess)?;
    let factor = hess.cholesky()?;
    let dim = model.dim();

    // interpolation weights per target, collecting the vertices that need
    // covariance columns
    let mut weights: Vec<Option<([usize; 3], [f64; 3])>> = Vec::with_capacity(targets.len());
    let mut needed: Vec<usize> = Vec::new();
    for &(x, y) in targets {
        match mesh.interp_weights(x, y) {
            Ok((idx, w)) => {
                needed.extend_from_slice(&idx);
                weights.push(Some((idx, w)));
            }
            Err(_) => weights.push(None),
        }
    }
    needed.sort_unstable();
    needed.dedup();

    let mut columns: HashMap<usize, Vec<f64>> = HashMap::with_capacity(needed.len());
    for &v in &needed {
        let mut e = vec![0.0; dim];
        e[v] = 1.0;
        factor.solve_in_place(&mut e);
        columns.insert(v, e);
    }

    let mu = theta.field.mu;
    let mut mean = Vec::with_capacity(targets.len());
    let mut variance = Vec::with_capacity(targets.len());
    let mut valid = Vec::with_capacity(targets.len());
    for wopt in &weights {
        match wopt {
            Some((idx, w)) => {
                let m: f64 =
                    mu + (0..3).map(|k| w[k] * laplace.mode.s[idx[k]]).sum::<f64>();
                let mut var = 0.0;
                for a in 0..3 {
                    let col = &columns[&idx[a]];
                    for b in 0..3 {
                        var += w[a] * w[b] * col[idx[b]];
                    }
                }
                mean.push(m);
                variance.push(var.max(0.0));
                valid.push(true);
            }
            None => {
                mean.push(f64::NAN);
                variance.push(f64::NAN);
                valid.push(false);
            }
        }
    }
    Ok(PredictionGrid {
        locations: targets.to_vec(),
        mean,
        variance,
        model_tag: "preferential".into(),
        valid,
    })
}

/// Simple kriging from raw observation arrays: mean
/// `mu + c*' (C + tau2 I)^{-1} (y - mu 1)` and variance
/// `sigma2 - c*' (C + tau2 I)^{-1} c*`.
pub fn krige_points(
    params: &FieldParams,
    locations: &[(f64, f64)],
    responses: &[f64],
    targets: &[(f64, f64)],
) -> Result<PredictionGrid> {
    params.validate()?;
    let n = locations.len();
    if n == 0 || responses.len() != n {
        return Err(Error::Dimension(format!(
            "kriging got {n} locations and {} responses",
            responses.len()
        )));
    }
    let mut c = matern_covariance_matrix(locations, params)?;
    for i in 0..n {
        c[(i, i)] += params.tau2;
    }
    let chol = cholesky_with_jitter(c, 1e-8 * params.sigma2, "kriging system")?;
    let resid = nalgebra::DVector::from_iterator(n, responses.iter().map(|y| y - params.mu));
    let alpha = chol.solve(&resid);

    let mut mean = Vec::with_capacity(targets.len());
    let mut variance = Vec::with_capacity(targets.len());
    for &(tx, ty) in targets {
        let cross = nalgebra::DVector::from_iterator(
            n,
            locations.iter().map(|&(x, y)| {
                let r = ((x - tx).powi(2) + (y - ty).powi(2)).sqrt();
                matern_cov(r, params).unwrap_or(0.0)
            }),
        );
        mean.push(params.mu + cross.dot(&alpha));
        variance.push((params.sigma2 - cross.dot(&chol.solve(&cross))).max(0.0));
    }
    Ok(PredictionGrid {
        locations: targets.to_vec(),
        mean,
        variance,
        model_tag: "standard".into(),
        valid: vec![true; targets.len()],
    })
}

/// Kriging over every observation of a track set.
pub fn krige(
    params: &FieldParams,
    tracks: &[Track],
    targets: &[(f64, f64)],
) -> Result<PredictionGrid> {
    let locations: Vec<(f64, f64)> =
        tracks.iter().flat_map(|t| t.locations.iter().copied()).collect();
    let responses: Vec<f64> =
        tracks.iter().flat_map(|t| t.responses.iter().copied()).collect();
    krige_points(params, &locations, &responses, &targets.to_vec())
}
