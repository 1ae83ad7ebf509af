//! Maximum-likelihood fitting for both models.
//!
//! `fit_preferential` maximizes the Laplace-approximated joint marginal
//! over the free parameters; `fit_standard` maximizes the exact Gaussian
//! marginal of the responses given the locations (the model that conditions
//! on where the samples were taken).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{matern_covariance_matrix, FieldParams};
use crate::inference::laplace::{laplace_nll, LaplaceOptions, LaplaceResult};
use crate::inference::model::JointModel;
use crate::inference::optimize::{fd_hessian, minimize_bfgs, EvalKind, OptimOptions};
use crate::inference::reparam::{FixedMask, ParamSpace};
use crate::inference::ThetaFull;
use crate::linalg::dense::chol_log_det;
use crate::movement::Track;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub laplace: LaplaceOptions,
    pub outer: OptimOptions,
    /// Compute the finite-difference observed information at the optimum.
    pub compute_covariance: bool,
    /// Step for the observed-information Hessian. Second differences of a
    /// Laplace objective carry inner-solver noise, so this is much larger
    /// than the gradient step.
    pub hessian_fd_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            laplace: LaplaceOptions::default(),
            outer: OptimOptions::default(),
            compute_covariance: true,
            hessian_fd_step: 0.05,
        }
    }
}

/// Estimation summary for one model fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub theta: ThetaFull,
    pub nll: f64,
    pub free_names: Vec<String>,
    /// Estimates of the free parameters on their natural scale.
    pub estimates: Vec<f64>,
    /// Delta-method standard errors on the natural scale.
    pub std_errors: Option<Vec<f64>>,
    /// Correlation matrix of the free-parameter estimates.
    pub correlation: Option<Vec<Vec<f64>>>,
    pub fixed: FixedMask,
    pub converged: bool,
    pub outer_iterations: usize,
    pub outer_evals: usize,
    pub inner_iterations_final: usize,
    pub inner_converged_final: bool,
    pub wall_time_ms: Option<u64>,
}

/// Standard-model fit summary (field parameters only).
pub type StandardFitReport = FitReport;

fn covariance_blocks(
    info: &DMatrix<f64>,
    jac: &[f64],
) -> (Option<Vec<f64>>, Option<Vec<Vec<f64>>>) {
    let n = info.nrows();
    let inv = info.clone().cholesky().map(|c| c.inverse()).or_else(|| {
        // numeric information matrices can be slightly indefinite; floor
        // the spectrum before inverting
        let sym = (info + info.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        if max_ev <= 0.0 {
            return None;
        }
        let floor = 1e-10 * max_ev;
        let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.max(floor)));
        Some(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())
    });
    match inv {
        Some(cov) => {
            let se: Vec<f64> =
                (0..n).map(|i| cov[(i, i)].max(0.0).sqrt() * jac[i].abs()).collect();
            let corr = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let d = (cov[(i, i)] * cov[(j, j)]).sqrt();
                            if d > 0.0 {
                                cov[(i, j)] / d
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            (Some(se), Some(corr))
        }
        None => (None, None),
    }
}

/// Maximizes the Laplace marginal likelihood of the joint model.
///
/// Returns the fit summary together with the Laplace state at the optimum
/// (whose mode is the preferential field predictor).
pub fn fit_preferential(
    model: &JointModel,
    init: &ThetaFull,
    mask: &FixedMask,
    opts: &FitOptions,
) -> Result<(FitReport, LaplaceResult)> {
    let start = Instant::now();
    init.validate()?;
    let space = ParamSpace::new(mask);
    let x0 = space.pack(init)?;

    // warm start: the inner mode of the most recent evaluation. Evaluation
    // order is strictly sequential, so this is deterministic, and the inner
    // optimum is start-independent within tolerance.
    let mut warm: Option<crate::inference::LatentState> = None;
    let mut last_nll = f64::NAN;
    let mut last_x: Vec<f64> = Vec::new();
    let mut objective = |x: &[f64], kind: EvalKind| -> Result<f64> {
        if kind == EvalKind::Accepted && last_x.as_slice() == x && last_nll.is_finite() {
            return Ok(last_nll);
        }
        let theta = space.unpack(init, x)?;
        let res = laplace_nll(model, &theta, warm.as_ref(), &opts.laplace)?;
        if res.converged {
            warm = Some(res.mode);
        }
        last_nll = res.nll;
        last_x = x.to_vec();
        Ok(res.nll)
    };

    let optim = minimize_bfgs(&mut objective, &x0, &opts.outer)?;
    let theta_hat = space.unpack(init, &optim.x)?;

    // covariance of the estimates from the observed information
    let (std_errors, correlation) = if opts.compute_covariance && space.n_free() > 0 {
        let info = fd_hessian(&mut objective, &optim.x, opts.hessian_fd_step)?;
        covariance_blocks(&info, &space.jacobians(&theta_hat))
    } else {
        (None, None)
    };

    // final Laplace state at the optimum (also refreshes the mode)
    let final_laplace = laplace_nll(model, &theta_hat, warm.as_ref(), &opts.laplace)?;

    let report = FitReport {
        model: "preferential".into(),
        theta: theta_hat,
        nll: final_laplace.nll,
        free_names: space.free_names(),
        estimates: space.free_natural(&theta_hat),
        std_errors,
        correlation,
        fixed: *mask,
        converged: optim.converged && final_laplace.converged,
        outer_iterations: optim.iterations,
        outer_evals: optim.n_evals,
        inner_iterations_final: final_laplace.inner_iters,
        inner_converged_final: final_laplace.converged,
        wall_time_ms: Some(start.elapsed().as_millis() as u64),
    };
    Ok((report, final_laplace))
}

/// Exact marginal negative log-likelihood of the standard model:
/// `Y ~ N(mu 1, C + tau2 I)` over all observations of all tracks, with `C`
/// the Matérn covariance at the observed locations.
pub fn standard_nll(tracks: &[Track], params: &FieldParams) -> Result<f64> {
    params.validate()?;
    let locations: Vec<(f64, f64)> =
        tracks.iter().flat_map(|t| t.locations.iter().copied()).collect();
    let responses: Vec<f64> =
        tracks.iter().flat_map(|t| t.responses.iter().copied()).collect();
    let n = locations.len();
    if n == 0 {
        return Err(Error::data("no observations"));
    }
    let mut c = matern_covariance_matrix(&locations, params)?;
    for i in 0..n {
        c[(i, i)] += params.tau2;
    }
    let chol = c
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("marginal covariance".into()))?;
    let resid = DVector::from_iterator(n, responses.iter().map(|y| y - params.mu));
    let alpha = chol.solve(&resid);
    Ok(0.5 * resid.dot(&alpha)
        + 0.5 * chol_log_det(&chol)
        + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Maximizes the standard (location-conditional) likelihood over the free
/// field parameters.
pub fn fit_standard(
    tracks: &[Track],
    init: &FieldParams,
    mask: &FixedMask,
    opts: &FitOptions,
) -> Result<StandardFitReport> {
    let start = Instant::now();
    init.validate()?;
    for t in tracks {
        t.validate()?;
    }
    // reuse the full parameter space with every movement entry frozen
    let mut mask = *mask;
    mask.alpha = true;
    mask.c = true;
    mask.sigma_beta = true;
    mask.sigma_x = true;
    mask.sigma_y = true;
    mask.beta0 = true;
    let space = ParamSpace::new(&mask);
    let base = ThetaFull { field: *init, movement: crate::movement::MovementParams::default() };
    let x0 = space.pack(&base)?;

    let mut objective = |x: &[f64], _: EvalKind| -> Result<f64> {
        let theta = space.unpack(&base, x)?;
        standard_nll(tracks, &theta.field)
    };
    let optim = minimize_bfgs(&mut objective, &x0, &opts.outer)?;
    let theta_hat = space.unpack(&base, &optim.x)?;

    let (std_errors, correlation) = if opts.compute_covariance && space.n_free() > 0 {
        let info = fd_hessian(&mut objective, &optim.x, opts.hessian_fd_step)?;
        covariance_blocks(&info, &space.jacobians(&theta_hat))
    } else {
        (None, None)
    };

    Ok(FitReport {
        model: "standard".into(),
        theta: theta_hat,
        nll: optim.f,
        free_names: space.free_names(),
        estimates: space.free_natural(&theta_hat),
        std_errors,
        correlation,
        fixed: mask,
        converged: optim.converged,
        outer_iterations: optim.iterations,
        outer_evals: optim.n_evals,
        inner_iterations_final: 0,
        inner_converged_final: true,
        wall_time_ms: Some(start.elapsed().as_millis() as u64),
    })
}

/// Moment-based starting values for the movement block, from the track
/// increments themselves.
pub fn movement_init_from_tracks(tracks: &[Track]) -> crate::movement::MovementParams {
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut count = 0.0;
    for t in tracks {
        for k in 1..t.len() {
            let dt = t.times[k] - t.times[k - 1];
            let dx = t.locations[k].0 - t.locations[k - 1].0;
            let dy = t.locations[k].1 - t.locations[k - 1].1;
            sx += dx * dx / dt;
            sy += dy * dy / dt;
            count += 1.0;
        }
    }
    let sx = (sx / count).sqrt().max(1e-3);
    let sy = (sy / count).sqrt().max(1e-3);
    crate::movement::MovementParams {
        alpha: 0.0,
        c: 0.0,
        sigma_beta: 0.1,
        sigma: [sx, sy],
        beta0: 0.0,
    }
}
