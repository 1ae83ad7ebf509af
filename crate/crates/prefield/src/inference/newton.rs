//! Damped Newton minimization of the joint negative log-likelihood over
//! the latent vector, at fixed parameters.

use crate::error::{Error, Result};
use crate::field::PrecisionBundle;
use crate::inference::model::JointModel;
use crate::inference::{LatentState, ThetaFull};
use crate::linalg::blockfactor::{BlockCholesky, BlockSymMatrix};

/// Outcome of the inner optimization.
pub struct InnerResult {
    pub mode: LatentState,
    pub nll: f64,
    /// Cholesky factor of the (undamped) Hessian at the mode.
    pub factor: BlockCholesky,
    pub hessian_logdet: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

fn scaled_grad_norm(grad: &[f64], nll: f64) -> f64 {
    let inf = grad.iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
    inf / (1.0 + nll.abs())
}

/// Finds the mode of the joint negative log-likelihood over `(s, beta)` by
/// damped Newton steps with Levenberg escalation on indefinite Hessians.
///
/// Exceeding `max_iter` yields a flagged (non-converged) result rather than
/// an error; an indefinite Hessian that survives every damping level is an
/// error.
pub fn inner_newton(
    model: &JointModel,
    theta: &ThetaFull,
    bundle: &PrecisionBundle,
    init: &LatentState,
    tol: f64,
    max_iter: usize,
) -> Result<InnerResult> {
    let mut u = init.clone();
    let mut hess = model.hessian_workspace();
    let (mut nll, mut grad) = match model.joint_nll_grad(&u, theta, bundle) {
        Ok(v) if v.0.is_finite() => v,
        Ok(v) => {
            return Err(Error::NonFinite(format!("inner objective at start: {}", v.0)))
        }
        Err(e) => return Err(e),
    };

    let mut damping = 0.0_f64;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        if scaled_grad_norm(&grad, nll) <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (value, g) = model.joint_nll_grad_hess(&u, theta, bundle, &mut hess)?;
        debug_assert_eq!(value, nll);
        grad = g;

        // factor with escalating damping until positive definite
        let factor = loop {
            let trial = if damping > 0.0 { hess.damped(damping).cholesky() } else { hess.cholesky() };
            match trial {
                Ok(f) => break f,
                Err(_) => {
                    damping = if damping == 0.0 { 1e-6 } else { damping * 10.0 };
                    if damping > 1e12 {
                        return Err(Error::Numerical(
                            "inner Hessian indefinite beyond damping range".into(),
                        ));
                    }
                }
            }
        };

        let mut step = grad.clone();
        factor.solve_in_place(&mut step);

        // backtracking on the objective
        let flat = u.as_flat();
        let mut t = 1.0_f64;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> =
                flat.iter().zip(&step).map(|(x, p)| x - t * p).collect();
            let trial_state = LatentState::from_flat(&trial, model.n_field());
            match model.joint_nll_grad(&trial_state, theta, bundle) {
                Ok((f_new, g_new)) if f_new.is_finite() && f_new <= nll => {
                    u = trial_state;
                    nll = f_new;
                    grad = g_new;
                    accepted = true;
                    break;
                }
                _ => t *= 0.5,
            }
        }
        if accepted {
            // relax damping after progress
            damping = if damping > 0.0 { (damping / 10.0).max(0.0) } else { 0.0 };
            if damping < 1e-9 {
                damping = 0.0;
            }
        } else {
            // no descent along this direction; escalate and retry
            damping = if damping == 0.0 { 1e-4 } else { damping * 100.0 };
            if damping > 1e12 {
                return Err(Error::Numerical(
                    "inner Newton cannot make progress (damping exhausted)".into(),
                ));
            }
        }
    }
    if scaled_grad_norm(&grad, nll) <= tol {
        converged = true;
    }

    // exact Hessian at the returned point for the Laplace determinant
    let (_, _) = model.joint_nll_grad_hess(&u, theta, bundle, &mut hess)?;
    let factor = match hess.cholesky() {
        Ok(f) => f,
        // a barely-indefinite Hessian at a flagged non-optimum still needs
        // a usable determinant; nudge minimally
        Err(_) => hess.damped(1e-8).cholesky().map_err(|_| {
            Error::NotPositiveDefinite("joint Hessian at the returned mode".into())
        })?,
    };
    let hessian_logdet = factor.log_det();
    let grad_norm = scaled_grad_norm(&grad, nll);
    Ok(InnerResult { mode: u, nll, factor, hessian_logdet, iterations, converged, grad_norm })
}

/// Assembles and factors the exact Hessian at an arbitrary latent point.
pub fn hessian_at(
    model: &JointModel,
    theta: &ThetaFull,
    bundle: &PrecisionBundle,
    latent: &LatentState,
) -> Result<(BlockSymMatrix, BlockCholesky)> {
    let mut hess = model.hessian_workspace();
    model.joint_nll_grad_hess(latent, theta, bundle, &mut hess)?;
    let factor = hess.cholesky()?;
    Ok((hess, factor))
}
