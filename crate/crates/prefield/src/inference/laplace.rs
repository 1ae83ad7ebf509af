//! Laplace approximation to the marginal negative log-likelihood.
//!
//! With `f(u; theta)` the joint negative log-likelihood over the latent
//! vector `u = (s, beta)` and `H` its Hessian at the minimizing `u_hat`,
//!
//! ```text
//!     -log integral exp(-f(u)) du
//!         ~  f(u_hat) + 1/2 log det H - d/2 log(2 pi)
//! ```
//!
//! exact whenever the integrand is Gaussian in `u` (in particular for the
//! field block, which is always Gaussian given the parameters).

use crate::error::Result;
use crate::field::build_precision;
use crate::inference::model::JointModel;
use crate::inference::newton::inner_newton;
use crate::inference::{LatentState, ThetaFull};

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, Copy)]
pub struct LaplaceOptions {
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for LaplaceOptions {
    fn default() -> Self {
        LaplaceOptions { inner_tol: 1e-8, inner_max_iter: 100 }
    }
}

/// Marginal likelihood value with the inner state it was computed from.
#[derive(Debug, Clone)]
pub struct LaplaceResult {
    /// Laplace-approximated marginal negative log-likelihood.
    pub nll: f64,
    /// Joint nll at the mode.
    pub joint_nll_at_mode: f64,
    pub mode: LatentState,
    pub hessian_logdet: f64,
    pub inner_iters: usize,
    pub converged: bool,
}

/// Evaluates the Laplace-approximated marginal nll at `theta`, rebuilding
/// the precision for the current field parameters and reusing `warm` as the
/// inner starting point when given.
pub fn laplace_nll(
    model: &JointModel,
    theta: &ThetaFull,
    warm: Option<&LatentState>,
    opts: &LaplaceOptions,
) -> Result<LaplaceResult> {
    let bundle = build_precision(model.mesh(), model.fem(), &theta.field)?;
    let init = match warm {
        Some(w) => w.clone(),
        None => model.initial_latent(theta),
    };
    let inner =
        inner_newton(model, theta, &bundle, &init, opts.inner_tol, opts.inner_max_iter)?;
    let d = model.dim() as f64;
    let nll = inner.nll + 0.5 * inner.hessian_logdet - 0.5 * d * LN_2PI;
    Ok(LaplaceResult {
        nll,
        joint_nll_at_mode: inner.nll,
        mode: inner.mode,
        hessian_logdet: inner.hessian_logdet,
        inner_iters: inner.iterations,
        converged: inner.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{assemble_fem, build_precision, FieldParams, Mesh, Rect};
    use crate::movement::{behaviour_weight, MovementParams, Track};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn tiny_problem(alpha: f64, shift: f64) -> (JointModel, ThetaFull) {
        let mesh =
            Arc::new(Mesh::lattice(Rect::square(-3.0, 3.0).unwrap(), 2, 2).unwrap());
        let fem = Arc::new(assemble_fem(&mesh).unwrap());
        let track = Track {
            times: vec![shift, 0.6 + shift, 1.1 + shift],
            locations: vec![(-1.0, -0.8), (-0.2, 0.1), (0.9, 0.7)],
            responses: vec![2.2, 1.7, 2.6],
            betas: None,
        };
        let theta = ThetaFull {
            field: FieldParams { mu: 2.0, tau2: 0.4, kappa: 2, phi: 2.0, sigma2: 1.0 },
            movement: MovementParams {
                alpha,
                c: 0.0,
                sigma_beta: 0.15,
                sigma: [0.9, 1.2],
                beta0: -0.6,
            },
        };
        let model = JointModel::new(
            Arc::clone(&mesh),
            Arc::clone(&fem),
            &[track],
            0.5,
            0.3,
        )
        .unwrap();
        (model, theta)
    }

    #[test]
    fn invariant_under_time_relabeling() {
        let (model_a, theta) = tiny_problem(5.0, 0.0);
        let (model_b, _) = tiny_problem(5.0, 7.5);
        let a = laplace_nll(&model_a, &theta, None, &LaplaceOptions::default()).unwrap();
        let b = laplace_nll(&model_b, &theta, None, &LaplaceOptions::default()).unwrap();
        approx::assert_relative_eq!(a.nll, b.nll, max_relative = 1e-10);
    }

    /// Independent reimplementation of the joint density blocks, used as a
    /// quadrature oracle. Works directly from the formulas, sharing no code
    /// with the model evaluation.
    struct BlockOracle {
        // observation data
        y: Vec<f64>,
        times: Vec<f64>,
        locations: Vec<(f64, f64)>,
        // dense field prior
        q_dense: DMatrix<f64>,
        q_logdet: f64,
        // interpolation weight matrix rows (n_obs x m)
        w_rows: Vec<Vec<f64>>,
        theta: ThetaFull,
        beta0_sd: f64,
    }

    impl BlockOracle {
        fn new(model: &JointModel, theta: &ThetaFull, track: &Track) -> Self {
            let bundle = build_precision(model.mesh(), model.fem(), &theta.field).unwrap();
            let m = model.n_field();
            let mut q_dense = DMatrix::zeros(m, m);
            for j in 0..m {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                let mut col = vec![0.0; m];
                bundle.q().mul_vec_add(&e, &mut col);
                for i in 0..m {
                    q_dense[(i, j)] = col[i];
                }
            }
            let q_logdet = bundle.log_det();
            let w_rows = track
                .locations
                .iter()
                .map(|&(x, y)| {
                    let (idx, w) = model.mesh().interp_weights(x, y).unwrap();
                    let mut row = vec![0.0; m];
                    for i in 0..3 {
                        row[idx[i]] += w[i];
                    }
                    row
                })
                .collect();
            BlockOracle {
                y: track.responses.clone(),
                times: track.times.clone(),
                locations: track.locations.clone(),
                q_dense,
                q_logdet,
                w_rows,
                theta: *theta,
                beta0_sd: model.beta0_sd(),
            }
        }

        fn field_obs_nll(&self, s: &[f64]) -> f64 {
            let m = s.len();
            let sv = nalgebra::DVector::from_column_slice(s);
            let mut nll = 0.5 * (sv.transpose() * &self.q_dense * &sv)[(0, 0)]
                - 0.5 * self.q_logdet
                + 0.5 * m as f64 * super::LN_2PI;
            let fp = &self.theta.field;
            for (k, row) in self.w_rows.iter().enumerate() {
                let s_at: f64 = row.iter().zip(s).map(|(w, v)| w * v).sum();
                let e = self.y[k] - fp.mu - s_at;
                nll += 0.5 * e * e / fp.tau2 + 0.5 * ((fp.tau2).ln() + super::LN_2PI);
            }
            nll
        }

        /// Behavioural chain plus transitions; only valid for alpha = 0
        /// where the transitions do not read the field.
        fn beta_move_nll(&self, betas: &[f64]) -> f64 {
            let mp = &self.theta.movement;
            assert_eq!(mp.alpha, 0.0);
            let n = betas.len();
            let mut nll = 0.0;
            let d0 = betas[0] - mp.beta0;
            nll += 0.5 * d0 * d0 / (self.beta0_sd * self.beta0_sd)
                + 0.5 * ((self.beta0_sd * self.beta0_sd).ln() + super::LN_2PI);
            for k in 0..n - 1 {
                let dt = self.times[k + 1] - self.times[k];
                let var = mp.sigma_beta * mp.sigma_beta * dt;
                let d = betas[k + 1] - betas[k];
                nll += 0.5 * d * d / var + 0.5 * (var.ln() + super::LN_2PI);
            }
            for k in 1..n - 1 {
                let dt = self.times[k + 1] - self.times[k];
                let dtp = self.times[k] - self.times[k - 1];
                let v = (
                    (self.locations[k].0 - self.locations[k - 1].0) / dtp,
                    (self.locations[k].1 - self.locations[k - 1].1) / dtp,
                );
                let f = behaviour_weight(betas[k]);
                let mean = (
                    self.locations[k].0 + (1.0 - f) * v.0 * dt,
                    self.locations[k].1 + (1.0 - f) * v.1 * dt,
                );
                let cx = mp.sigma[0] * mp.sigma[0] * dt;
                let cy = mp.sigma[1] * mp.sigma[1] * dt;
                let rx = self.locations[k + 1].0 - mean.0;
                let ry = self.locations[k + 1].1 - mean.1;
                nll += 0.5 * rx * rx / cx
                    + 0.5 * ry * ry / cy
                    + 0.5 * (cx.ln() + cy.ln())
                    + super::LN_2PI;
            }
            nll
        }
    }

    #[test]
    fn joint_nll_equals_independent_block_composition() {
        let (model, theta) = tiny_problem(0.0, 0.0);
        let track = Track {
            times: vec![0.0, 0.6, 1.1],
            locations: vec![(-1.0, -0.8), (-0.2, 0.1), (0.9, 0.7)],
            responses: vec![2.2, 1.7, 2.6],
            betas: None,
        };
        let oracle = BlockOracle::new(&model, &theta, &track);
        let bundle = build_precision(model.mesh(), model.fem(), &theta.field).unwrap();
        let latent = LatentState {
            s: vec![0.3, -0.2, 0.5, 0.1],
            beta: vec![-0.7, -0.4, -0.9],
        };
        let via_model = model.joint_nll(&latent, &theta, &bundle).unwrap();
        let via_blocks = oracle.field_obs_nll(&latent.s) + oracle.beta_move_nll(&latent.beta);
        approx::assert_relative_eq!(via_model, via_blocks, max_relative = 1e-11);
    }

    #[test]
    fn matches_brute_force_quadrature_when_separable() {
        // alpha = 0 splits the integral into a 4-dim field part times a
        // 3-dim behavioural part; both are integrated on tensor grids
        let (model, theta) = tiny_problem(0.0, 0.0);
        let track = Track {
            times: vec![0.0, 0.6, 1.1],
            locations: vec![(-1.0, -0.8), (-0.2, 0.1), (0.9, 0.7)],
            responses: vec![2.2, 1.7, 2.6],
            betas: None,
        };
        let oracle = BlockOracle::new(&model, &theta, &track);
        let laplace = laplace_nll(&model, &theta, None, &LaplaceOptions::default()).unwrap();
        assert!(laplace.converged);

        // field part: center the grid on the Gaussian posterior mean
        let m = model.n_field();
        let fp = &theta.field;
        let mut a = oracle.q_dense.clone();
        let mut rhs = nalgebra::DVector::zeros(m);
        for (k, row) in oracle.w_rows.iter().enumerate() {
            for i in 0..m {
                rhs[i] += row[i] * (oracle.y[k] - fp.mu) / fp.tau2;
                for j in 0..m {
                    a[(i, j)] += row[i] * row[j] / fp.tau2;
                }
            }
        }
        let chol = a.clone().cholesky().unwrap();
        let center = chol.solve(&rhs);
        let sds: Vec<f64> = {
            let inv = a.try_inverse().unwrap();
            (0..m).map(|i| inv[(i, i)].sqrt()).collect()
        };
        let npts = 24;
        let halfwidth = 7.0;
        let log_sum_exp = |values: &mut Vec<f64>| -> f64 {
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
        };
        let mut logs = Vec::new();
        let mut grid = vec![0usize; m];
        let vol: f64 = sds.iter().map(|s| 2.0 * halfwidth * s / (npts - 1) as f64).product();
        loop {
            let s: Vec<f64> = (0..m)
                .map(|i| {
                    center[i]
                        + (-halfwidth + 2.0 * halfwidth * grid[i] as f64 / (npts - 1) as f64)
                            * sds[i]
                })
                .collect();
            logs.push(-oracle.field_obs_nll(&s));
            // odometer increment
            let mut d = 0;
            loop {
                grid[d] += 1;
                if grid[d] < npts {
                    break;
                }
                grid[d] = 0;
                d += 1;
                if d == m {
                    break;
                }
            }
            if d == m {
                break;
            }
        }
        let log_field = log_sum_exp(&mut logs) + vol.ln();

        // behavioural part: fine grid (the posterior is tight around the
        // prior mean when the chain is stiff)
        let nb = 3;
        let bpts = 128;
        let bhalf = 3.5;
        let bsd = 1.0_f64;
        let bvol: f64 = (0..nb).map(|_| 2.0 * bhalf * bsd / (bpts - 1) as f64).product();
        let mut blogs = Vec::new();
        let mut bgrid = vec![0usize; nb];
        loop {
            let b: Vec<f64> = (0..nb)
                .map(|i| {
                    theta.movement.beta0
                        + (-bhalf + 2.0 * bhalf * bgrid[i] as f64 / (bpts - 1) as f64) * bsd
                })
                .collect();
            blogs.push(-oracle.beta_move_nll(&b));
            let mut d = 0;
            loop {
                bgrid[d] += 1;
                if bgrid[d] < bpts {
                    break;
                }
                bgrid[d] = 0;
                d += 1;
                if d == nb {
                    break;
                }
            }
            if d == nb {
                break;
            }
        }
        let log_beta = log_sum_exp(&mut blogs) + bvol.ln();

        let quadrature_nll = -(log_field + log_beta);
        assert!(
            (laplace.nll - quadrature_nll).abs() < 1e-3,
            "laplace {} vs quadrature {}",
            laplace.nll,
            quadrature_nll
        );
    }
}
