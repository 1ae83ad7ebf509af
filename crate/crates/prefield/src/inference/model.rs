//! Joint negative log-likelihood over latent field and behavioural states,
//! with analytic gradient and sparse Hessian.
//!
//! For a transition from observation `k` to `k+1` of one track (0-based,
//! `k >= 1` so a velocity exists), writing `f = f(beta_k)`, `dt` for the
//! gap, and `S* = mu + c + w's` for the offset field at the current
//! location (`w` the interpolation weights, `G = (gx, gy)` the gradient
//! stencil rows):
//!
//! ```text
//!     forage  = -alpha S* (G s)
//!     drift   = f forage + (1 - f) v
//!     r       = X_{k+1} - X_k - drift * dt           (2-vector)
//!     nll    += r_x^2 / (2 cx) + r_y^2 / (2 cy) + log-normalizers
//! ```
//!
//! with `cx = sigma_x^2 dt`, `cy = sigma_y^2 dt`. The residual is quadratic
//! in `s` and smooth in `beta_k`, so all derivatives below are exact:
//!
//! ```text
//!     dr_x/ds        = dt f alpha ((Gs)_x w + S* gx)
//!     d2r_x/ds ds'   = dt f alpha (gx w' + w gx')
//!     dr_x/dbeta     = -dt f' (forage_x - v_x)
//!     d2r_x/ds dbeta = dt f' alpha ((Gs)_x w + S* gx)
//!     d2r_x/dbeta2   = -dt f'' (forage_x - v_x)
//! ```
//!
//! and symmetrically in `y`. The Hessian of each half-squared residual is
//! `(dr/du)(dr/du)'/c + (r/c) d2r/du du'`, accumulated into a banded field
//! block, a sparse field-behaviour border, and a small behaviour block.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{FemMatrices, Mesh, PrecisionBundle};
use crate::inference::{LatentState, ThetaFull};
use crate::linalg::blockfactor::BlockSymMatrix;
use crate::movement::{
    behaviour_weight, behaviour_weight_deriv, behaviour_weight_deriv2, Track,
};

const LN_2PI: f64 = 1.8378770664093453;

/// Sparse local operators of one observation.
#[derive(Debug, Clone)]
struct ObsOp {
    vertices: [usize; 3],
    weights: [f64; 3],
    y: f64,
}

/// Sparse local operators of one location transition.
#[derive(Debug, Clone)]
struct TransOp {
    /// index of the behavioural state driving this transition (track-local)
    beta_local: usize,
    dt: f64,
    /// velocity over the previous gap
    v: [f64; 2],
    /// location increment being explained
    dxy: [f64; 2],
    /// union of vertices touched, ascending
    support: Vec<usize>,
    /// interpolation weights over `support`
    w: Vec<f64>,
    /// gradient stencil rows over `support`
    gx: Vec<f64>,
    gy: Vec<f64>,
}

#[derive(Debug, Clone)]
struct TrackOps {
    obs: Vec<ObsOp>,
    trans: Vec<TransOp>,
    /// gaps between consecutive observations
    gaps: Vec<f64>,
    beta_offset: usize,
    n: usize,
}

/// Precomputed likelihood structure for a (mesh, track set) pair.
///
/// Everything parameter-dependent enters at evaluation time, so one model
/// serves every likelihood evaluation of a fit.
#[derive(Debug, Clone)]
pub struct JointModel {
    mesh: Arc<Mesh>,
    fem: Arc<FemMatrices>,
    tracks: Vec<TrackOps>,
    n_beta: usize,
    grad_step: f64,
    /// prior standard deviation of each track's first behavioural state
    beta0_sd: f64,
    bandwidth: usize,
}

impl JointModel {
    /// Precomputes interpolation and gradient operators for every
    /// observation and transition.
    ///
    /// `grad_step` is the central-difference step for field gradients;
    /// every track location must keep its four stencil arms inside the
    /// mesh hull.
    pub fn new(
        mesh: Arc<Mesh>,
        fem: Arc<FemMatrices>,
        tracks: &[Track],
        grad_step: f64,
        beta0_sd: f64,
    ) -> Result<JointModel> {
        if tracks.is_empty() {
            return Err(Error::data("no tracks given"));
        }
        if !(beta0_sd > 0.0) {
            return Err(Error::InvalidParameter(format!("beta0_sd = {beta0_sd}")));
        }
        let mut ops = Vec::with_capacity(tracks.len());
        let mut beta_offset = 0;
        let mut bandwidth = fem.m3.bandwidth();
        for track in tracks {
            track.validate()?;
            let n = track.len();
            let mut obs = Vec::with_capacity(n);
            for k in 0..n {
                let (x, y) = track.locations[k];
                let (vertices, weights) = mesh.interp_weights(x, y)?;
                let span = vertices.iter().max().unwrap() - vertices.iter().min().unwrap();
                bandwidth = bandwidth.max(span);
                obs.push(ObsOp { vertices, weights, y: track.responses[k] });
            }
            let gaps: Vec<f64> = track.times.windows(2).map(|w| w[1] - w[0]).collect();
            let mut trans = Vec::with_capacity(n.saturating_sub(2));
            for k in 1..n - 1 {
                let (x, y) = track.locations[k];
                let stencil = mesh.gradient_stencil(x, y, grad_step)?;
                let (vertices, weights) = mesh.interp_weights(x, y)?;
                let mut support = stencil.support();
                for &v in &vertices {
                    if !support.contains(&v) {
                        support.push(v);
                    }
                }
                support.sort_unstable();
                let local = |v: usize| support.iter().position(|&s| s == v).unwrap();
                let mut w = vec![0.0; support.len()];
                for i in 0..3 {
                    w[local(vertices[i])] += weights[i];
                }
                let mut gx = vec![0.0; support.len()];
                for &(v, wt) in &stencil.gx {
                    gx[local(v)] += wt;
                }
                let mut gy = vec![0.0; support.len()];
                for &(v, wt) in &stencil.gy {
                    gy[local(v)] += wt;
                }
                bandwidth = bandwidth.max(support[support.len() - 1] - support[0]);
                let dt_prev = track.times[k] - track.times[k - 1];
                let (xp, yp) = track.locations[k - 1];
                let (xn, yn) = track.locations[k + 1];
                trans.push(TransOp {
                    beta_local: k,
                    dt: gaps[k],
                    v: [(x - xp) / dt_prev, (y - yp) / dt_prev],
                    dxy: [xn - x, yn - y],
                    support,
                    w,
                    gx,
                    gy,
                });
            }
            ops.push(TrackOps { obs, trans, gaps, beta_offset, n });
            beta_offset += n;
        }
        Ok(JointModel {
            mesh,
            fem,
            tracks: ops,
            n_beta: beta_offset,
            grad_step,
            beta0_sd,
            bandwidth,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn fem(&self) -> &Arc<FemMatrices> {
        &self.fem
    }

    pub fn n_field(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn dim(&self) -> usize {
        self.n_field() + self.n_beta
    }

    pub fn grad_step(&self) -> f64 {
        self.grad_step
    }

    pub fn beta0_sd(&self) -> f64 {
        self.beta0_sd
    }

    /// Neutral inner starting point: zero field, behavioural states at
    /// their prior mean.
    pub fn initial_latent(&self, theta: &ThetaFull) -> LatentState {
        LatentState {
            s: vec![0.0; self.n_field()],
            beta: vec![theta.movement.beta0; self.n_beta],
        }
    }

    fn check_bundle(&self, theta: &ThetaFull, bundle: &PrecisionBundle) -> Result<()> {
        if bundle.dim() != self.n_field() {
            return Err(Error::Dimension(format!(
                "precision over {} vertices, model mesh has {}",
                bundle.dim(),
                self.n_field()
            )));
        }
        if bundle.phi() != theta.field.phi || bundle.sigma2() != theta.field.sigma2 {
            return Err(Error::Dimension(
                "precision bundle was built from different field parameters".into(),
            ));
        }
        Ok(())
    }

    /// Joint negative log-likelihood at a latent state.
    pub fn joint_nll(
        &self,
        latent: &LatentState,
        theta: &ThetaFull,
        bundle: &PrecisionBundle,
    ) -> Result<f64> {
        self.evaluate(latent, theta, bundle, None, None)
    }

    /// Value and gradient (gradient laid out as field then behaviours).
    pub fn joint_nll_grad(
        &self,
        latent: &LatentState,
        theta: &ThetaFull,
        bundle: &PrecisionBundle,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.dim()];
        let value = self.evaluate(latent, theta, bundle, Some(&mut grad), None)?;
        Ok((value, grad))
    }

    /// Value, gradient, and the exact Hessian assembled into `hess`.
    pub fn joint_nll_grad_hess(
        &self,
        latent: &LatentState,
        theta: &ThetaFull,
        bundle: &PrecisionBundle,
        hess: &mut BlockSymMatrix,
    ) -> Result<(f64, Vec<f64>)> {
        hess.clear();
        let mut grad = vec![0.0; self.dim()];
        let value = self.evaluate(latent, theta, bundle, Some(&mut grad), Some(hess))?;
        hess.band.add_scaled(bundle.q(), 1.0);
        Ok((value, grad))
    }

    /// Hessian workspace matching this model's sparsity.
    pub fn hessian_workspace(&self) -> BlockSymMatrix {
        BlockSymMatrix::zeros(self.n_field(), self.bandwidth, self.n_beta)
    }

    fn evaluate(
        &self,
        latent: &LatentState,
        theta: &ThetaFull,
        bundle: &PrecisionBundle,
        mut grad: Option<&mut Vec<f64>>,
        mut hess: Option<&mut BlockSymMatrix>,
    ) -> Result<f64> {
        theta.validate()?;
        latent.check_dims(self.n_field(), self.n_beta)?;
        self.check_bundle(theta, bundle)?;
        let fp = &theta.field;
        let mp = &theta.movement;
        fp.require_kappa2()?;
        if !(fp.tau2 > 0.0) {
            return Err(Error::InvalidParameter(
                "joint likelihood needs tau2 > 0 (response density)".into(),
            ));
        }
        if !(mp.sigma_beta > 0.0) || !(mp.sigma[0] > 0.0) || !(mp.sigma[1] > 0.0) {
            return Err(Error::InvalidParameter(
                "joint likelihood needs positive diffusion scales".into(),
            ));
        }
        let s = &latent.s;
        let m = self.n_field();

        // ---- field prior ------------------------------------------------
        let mut nll = 0.5 * bundle.quadratic_form(s) - 0.5 * bundle.log_det()
            + 0.5 * m as f64 * LN_2PI;
        if let Some(g) = grad.as_deref_mut() {
            bundle.mul_vec_add(s, &mut g[..m]);
        }
        // (the Q term of the Hessian is added by the caller)
        if !nll.is_finite() {
            return Err(Error::NonFinite("field prior block".into()));
        }

        // ---- per-track blocks -------------------------------------------
        for track in &self.tracks {
            let betas = &latent.beta[track.beta_offset..track.beta_offset + track.n];

            // observations
            let inv_tau2 = 1.0 / fp.tau2;
            for op in &track.obs {
                let s_at: f64 = (0..3).map(|i| op.weights[i] * s[op.vertices[i]]).sum();
                let e = op.y - fp.mu - s_at;
                nll += 0.5 * e * e * inv_tau2 + 0.5 * (fp.tau2.ln() + LN_2PI);
                if let Some(g) = grad.as_deref_mut() {
                    for i in 0..3 {
                        g[op.vertices[i]] -= e * inv_tau2 * op.weights[i];
                    }
                }
                if let Some(h) = hess.as_deref_mut() {
                    for i in 0..3 {
                        for j in 0..3 {
                            if op.vertices[i] >= op.vertices[j] {
                                h.band.add(
                                    op.vertices[i],
                                    op.vertices[j],
                                    inv_tau2 * op.weights[i] * op.weights[j],
                                );
                            }
                        }
                    }
                }
            }
            if !nll.is_finite() {
                return Err(Error::NonFinite("observation block".into()));
            }

            // behavioural random walk (with proper start density)
            let b0_var = self.beta0_sd * self.beta0_sd;
            let d0 = betas[0] - mp.beta0;
            nll += 0.5 * d0 * d0 / b0_var + 0.5 * (b0_var.ln() + LN_2PI);
            if let Some(g) = grad.as_deref_mut() {
                g[m + track.beta_offset] += d0 / b0_var;
            }
            if let Some(h) = hess.as_deref_mut() {
                h.tail[(track.beta_offset, track.beta_offset)] += 1.0 / b0_var;
            }
            let sb2 = mp.sigma_beta * mp.sigma_beta;
            for k in 0..track.n - 1 {
                let var = sb2 * track.gaps[k];
                let d = betas[k + 1] - betas[k];
                nll += 0.5 * d * d / var + 0.5 * (var.ln() + LN_2PI);
                if let Some(g) = grad.as_deref_mut() {
                    g[m + track.beta_offset + k] -= d / var;
                    g[m + track.beta_offset + k + 1] += d / var;
                }
                if let Some(h) = hess.as_deref_mut() {
                    let a = track.beta_offset + k;
                    h.tail[(a, a)] += 1.0 / var;
                    h.tail[(a + 1, a + 1)] += 1.0 / var;
                    h.tail[(a, a + 1)] -= 1.0 / var;
                    h.tail[(a + 1, a)] -= 1.0 / var;
                }
            }
            if !nll.is_finite() {
                return Err(Error::NonFinite("behavioural block".into()));
            }

            // location transitions
            let a0 = fp.mu + mp.c;
            let cx_scale = mp.sigma[0] * mp.sigma[0];
            let cy_scale = mp.sigma[1] * mp.sigma[1];
            for op in &track.trans {
                let beta = betas[op.beta_local];
                let f = behaviour_weight(beta);
                let fd = behaviour_weight_deriv(beta);
                let fdd = behaviour_weight_deriv2(beta);
                let nloc = op.support.len();

                let mut s_val = a0;
                let mut g_x = 0.0;
                let mut g_y = 0.0;
                for i in 0..nloc {
                    let sv = s[op.support[i]];
                    s_val += op.w[i] * sv;
                    g_x += op.gx[i] * sv;
                    g_y += op.gy[i] * sv;
                }
                let forage = [-mp.alpha * s_val * g_x, -mp.alpha * s_val * g_y];
                let drift = [
                    f * forage[0] + (1.0 - f) * op.v[0],
                    f * forage[1] + (1.0 - f) * op.v[1],
                ];
                let r = [op.dxy[0] - drift[0] * op.dt, op.dxy[1] - drift[1] * op.dt];
                let cx = cx_scale * op.dt;
                let cy = cy_scale * op.dt;
                nll += 0.5 * r[0] * r[0] / cx
                    + 0.5 * r[1] * r[1] / cy
                    + 0.5 * (cx.ln() + cy.ln())
                    + LN_2PI;

                if grad.is_none() && hess.is_none() {
                    continue;
                }

                let dtaf = op.dt * mp.alpha * f;
                let beta_g = track.beta_offset + op.beta_local;
                // dr/dbeta
                let drb = [
                    -op.dt * fd * (forage[0] - op.v[0]),
                    -op.dt * fd * (forage[1] - op.v[1]),
                ];

                if let Some(g) = grad.as_deref_mut() {
                    for i in 0..nloc {
                        let pxi = dtaf * (g_x * op.w[i] + s_val * op.gx[i]);
                        let pyi = dtaf * (g_y * op.w[i] + s_val * op.gy[i]);
                        g[op.support[i]] += r[0] / cx * pxi + r[1] / cy * pyi;
                    }
                    g[m + beta_g] += r[0] / cx * drb[0] + r[1] / cy * drb[1];
                }

                if let Some(h) = hess.as_deref_mut() {
                    let dtafd = op.dt * mp.alpha * fd;
                    for i in 0..nloc {
                        let pxi = dtaf * (g_x * op.w[i] + s_val * op.gx[i]);
                        let pyi = dtaf * (g_y * op.w[i] + s_val * op.gy[i]);
                        for j in 0..=i {
                            let pxj = dtaf * (g_x * op.w[j] + s_val * op.gx[j]);
                            let pyj = dtaf * (g_y * op.w[j] + s_val * op.gy[j]);
                            // curvature of r through the quadratic field factor
                            let d2x = dtaf * (op.gx[i] * op.w[j] + op.w[i] * op.gx[j]);
                            let d2y = dtaf * (op.gy[i] * op.w[j] + op.w[i] * op.gy[j]);
                            let val = (pxi * pxj + r[0] * d2x) / cx
                                + (pyi * pyj + r[1] * d2y) / cy;
                            h.band.add(op.support[i], op.support[j], val);
                        }
                        // field-behaviour coupling
                        let dsb_x = dtafd * (g_x * op.w[i] + s_val * op.gx[i]);
                        let dsb_y = dtafd * (g_y * op.w[i] + s_val * op.gy[i]);
                        let val = (pxi * drb[0] + r[0] * dsb_x) / cx
                            + (pyi * drb[1] + r[1] * dsb_y) / cy;
                        h.add_cross(op.support[i], beta_g, val);
                    }
                    let d2b = [
                        -op.dt * fdd * (forage[0] - op.v[0]),
                        -op.dt * fdd * (forage[1] - op.v[1]),
                    ];
                    h.tail[(beta_g, beta_g)] += (drb[0] * drb[0] + r[0] * d2b[0]) / cx
                        + (drb[1] * drb[1] + r[1] * d2b[1]) / cy;
                }
            }
            if !nll.is_finite() {
                return Err(Error::NonFinite("movement block".into()));
            }
        }
        Ok(nll)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::field::{assemble_fem, build_precision, FieldParams, Rect};
    use crate::movement::MovementParams;
    use approx::assert_relative_eq;
    use rand::Rng as _;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn toy_setup(
        alpha: f64,
    ) -> (JointModel, ThetaFull, PrecisionBundle) {
        let mesh = Arc::new(
            Mesh::lattice(Rect::square(-6.0, 6.0).unwrap(), 5, 5).unwrap(),
        );
        let fem = Arc::new(assemble_fem(&mesh).unwrap());
        let track = Track {
            times: vec![0.0, 0.4, 0.9, 1.6, 2.0, 2.7],
            locations: vec![
                (-2.0, -1.0),
                (-1.2, -0.6),
                (-0.1, 0.2),
                (0.8, 0.9),
                (1.1, 1.8),
                (2.0, 2.4),
            ],
            responses: vec![5.2, 4.8, 5.5, 4.9, 5.1, 5.3],
            betas: None,
        };
        let theta = ThetaFull {
            field: FieldParams { mu: 5.0, tau2: 0.2, kappa: 2, phi: 4.0, sigma2: 1.5 },
            movement: MovementParams {
                alpha,
                c: 0.0,
                sigma_beta: 0.3,
                sigma: [1.1, 0.9],
                beta0: -1.0,
            },
        };
        let model = JointModel::new(
            Arc::clone(&mesh),
            Arc::clone(&fem),
            &[track],
            1.5,
            1.0,
        )
        .unwrap();
        let bundle = build_precision(&mesh, &fem, &theta.field).unwrap();
        (model, theta, bundle)
    }

    fn random_latent(model: &JointModel, theta: &ThetaFull, seed: u64) -> LatentState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatentState {
            s: (0..model.n_field()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            beta: (0..model.n_beta())
                .map(|_| theta.movement.beta0 + rng.gen_range(-1.0..1.0))
                .collect(),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for &alpha in &[0.0, 7.0] {
            let (model, theta, bundle) = toy_setup(alpha);
            for seed in 0..20 {
                let latent = random_latent(&model, &theta, seed);
                let (_, grad) = model.joint_nll_grad(&latent, &theta, &bundle).unwrap();
                let flat = latent.as_flat();
                for i in (0..model.dim()).step_by(3) {
                    let h = 1e-5 * (1.0 + flat[i].abs());
                    let mut up = flat.clone();
                    up[i] += h;
                    let mut dn = flat.clone();
                    dn[i] -= h;
                    let fu = model
                        .joint_nll(&LatentState::from_flat(&up, model.n_field()), &theta, &bundle)
                        .unwrap();
                    let fd = model
                        .joint_nll(&LatentState::from_flat(&dn, model.n_field()), &theta, &bundle)
                        .unwrap();
                    let fd_grad = (fu - fd) / (2.0 * h);
                    let scale = 1.0 + grad[i].abs().max(fd_grad.abs());
                    assert!(
                        (grad[i] - fd_grad).abs() / scale < 1e-5,
                        "alpha {alpha} seed {seed} component {i}: analytic {} vs fd {}",
                        grad[i],
                        fd_grad
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_matches_finite_difference_of_gradient() {
        let (model, theta, bundle) = toy_setup(5.0);
        let latent = random_latent(&model, &theta, 3);
        let mut hess = model.hessian_workspace();
        model.joint_nll_grad_hess(&latent, &theta, &bundle, &mut hess).unwrap();
        let flat = latent.as_flat();
        let dim = model.dim();
        // compare H x against directional finite differences of the gradient
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let up: Vec<f64> = flat.iter().zip(&dir).map(|(x, d)| x + h * d).collect();
            let dn: Vec<f64> = flat.iter().zip(&dir).map(|(x, d)| x - h * d).collect();
            let (_, gu) = model
                .joint_nll_grad(&LatentState::from_flat(&up, model.n_field()), &theta, &bundle)
                .unwrap();
            let (_, gd) = model
                .joint_nll_grad(&LatentState::from_flat(&dn, model.n_field()), &theta, &bundle)
                .unwrap();
            let mut hx = vec![0.0; dim];
            hess.mul_vec_add(&dir, &mut hx);
            for i in 0..dim {
                let fd = (gu[i] - gd[i]) / (2.0 * h);
                let scale = 1.0 + hx[i].abs().max(fd.abs());
                assert!(
                    (hx[i] - fd).abs() / scale < 1e-4,
                    "component {i}: H*d {} vs fd {}",
                    hx[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn alpha_zero_decouples_field_from_transitions() {
        let (model, theta, bundle) = toy_setup(0.0);
        let mut a = random_latent(&model, &theta, 4);
        let b_latent = random_latent(&model, &theta, 5);
        // same betas, different field
        let nll_a = model.joint_nll(&a, &theta, &bundle).unwrap();
        let s_backup = a.s.clone();
        a.s = b_latent.s.clone();
        let nll_b = model.joint_nll(&a, &theta, &bundle).unwrap();
        a.s = s_backup;

        // difference must equal the difference of prior + observation
        // blocks alone (no transition contribution)
        let prior_obs = |latent: &LatentState| -> f64 {
            let mut acc = 0.5 * bundle.quadratic_form(&latent.s);
            for track in &model.tracks {
                for op in &track.obs {
                    let s_at: f64 =
                        (0..3).map(|i| op.weights[i] * latent.s[op.vertices[i]]).sum();
                    let e = op.y - theta.field.mu - s_at;
                    acc += 0.5 * e * e / theta.field.tau2;
                }
            }
            acc
        };
        let mut with_b = a.clone();
        with_b.s = b_latent.s.clone();
        assert_relative_eq!(
            nll_b - nll_a,
            prior_obs(&with_b) - prior_obs(&a),
            max_relative = 1e-10
        );
    }

    #[test]
    fn large_nugget_flattens_observation_block() {
        let (model, mut theta, _) = toy_setup(2.0);
        theta.field.tau2 = 1e9;
        let mesh = Arc::clone(model.mesh());
        let fem = Arc::clone(model.fem());
        let bundle = build_precision(&mesh, &fem, &theta.field).unwrap();
        let latent = model.initial_latent(&theta);
        let nll = model.joint_nll(&latent, &theta, &bundle).unwrap();
        // observation block reduces to n/2 log(2 pi tau2); check by removing it
        let n_obs = 6.0;
        let obs_const = 0.5 * n_obs * ((theta.field.tau2).ln() + LN_2PI);
        let mut theta2 = theta;
        theta2.field.tau2 = 1e12;
        let bundle2 = build_precision(&mesh, &fem, &theta2.field).unwrap();
        let nll2 = model.joint_nll(&latent, &theta2, &bundle2).unwrap();
        let obs_const2 = 0.5 * n_obs * ((theta2.field.tau2).ln() + LN_2PI);
        assert_relative_eq!(nll - obs_const, nll2 - obs_const2, max_relative = 1e-8);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (model, theta, bundle) = toy_setup(1.0);
        let bad = LatentState { s: vec![0.0; 3], beta: vec![0.0; model.n_beta()] };
        assert!(model.joint_nll(&bad, &theta, &bundle).is_err());
        // bundle from different parameters
        let mut other = theta;
        other.field.phi *= 2.0;
        let latent = model.initial_latent(&theta);
        assert!(model.joint_nll(&latent, &other, &bundle).is_err());
    }
}
