//! Tracker movement: a correlated random walk whose drift blends momentum
//! with descent along the gradient of the sampled field.
//!
//! The location update over a time gap `dt` is
//!
//! ```text
//!     X' = X + mu(X, S) dt + Sigma A sqrt(dt),        A ~ N(0, I2)
//!     mu = f(beta) * phi_forage + (1 - f(beta)) * v
//! ```
//!
//! where `v` is the velocity over the previous gap, `f` is the logistic
//! behavioural weight, and the foraging drift descends the field gradient
//! with speed proportional to the (offset) field value:
//! `phi_forage = -alpha (S(X) + c) grad S(X)`. The behavioural state is a
//! random walk `beta' = beta + sigma_beta B sqrt(dt)`.

pub mod simulate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldRealization, Rect};

pub use simulate::{simulate_track, SimProtocol};

/// Parameters of the movement model.
///
/// `sigma` is the diagonal of the 2x2 diffusion matrix multiplying the
/// standard normal innovations (standard-deviation scale). Degenerate
/// (zero) noise levels are accepted here so noise-free simulations work;
/// estimation enforces strict positivity through its reparameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementParams {
    /// Preferential strength; positive values drift down-gradient.
    pub alpha: f64,
    /// Field offset for the foraging term, `S* = S + c`.
    pub c: f64,
    /// Behavioural-state diffusion (per square-root time unit).
    pub sigma_beta: f64,
    /// Diagonal of the location diffusion matrix.
    pub sigma: [f64; 2],
    /// Initial behavioural state.
    pub beta0: f64,
}

impl MovementParams {
    pub fn validate(&self) -> Result<()> {
        for v in [self.alpha, self.c, self.sigma_beta, self.sigma[0], self.sigma[1], self.beta0] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter("non-finite movement parameter".into()));
            }
        }
        if self.sigma_beta < 0.0 || self.sigma[0] < 0.0 || self.sigma[1] < 0.0 {
            return Err(Error::InvalidParameter("negative diffusion scale".into()));
        }
        Ok(())
    }
}

impl Default for MovementParams {
    fn default() -> Self {
        MovementParams { alpha: 0.0, c: 0.0, sigma_beta: 0.1, sigma: [1.0, 1.0], beta0: 0.0 }
    }
}

/// Time-ordered locations, times and responses of one trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub times: Vec<f64>,
    pub locations: Vec<(f64, f64)>,
    pub responses: Vec<f64>,
    /// Behavioural states, only present on simulated tracks.
    pub betas: Option<Vec<f64>>,
}

impl Track {
    pub fn new(times: Vec<f64>, locations: Vec<(f64, f64)>, responses: Vec<f64>) -> Result<Track> {
        let t = Track { times, locations, responses, betas: None };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.locations.len() != n || self.responses.len() != n {
            return Err(Error::Dimension(format!(
                "track fields disagree: {} times, {} locations, {} responses",
                n,
                self.locations.len(),
                self.responses.len()
            )));
        }
        if let Some(betas) = &self.betas {
            if betas.len() != n {
                return Err(Error::Dimension("behavioural states do not match track length".into()));
            }
        }
        if n < 3 {
            return Err(Error::data(format!(
                "track needs at least 3 observations (velocity requires two predecessors), got {n}"
            )));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::data(format!(
                    "track times not strictly increasing at t = {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Logistic behavioural weight `exp(beta) / (1 + exp(beta))`.
///
/// The state is clamped to [-40, 40] before exponentiation; beyond that the
/// weight is 0 or 1 to double precision anyway.
pub fn behaviour_weight(beta: f64) -> f64 {
    let b = beta.clamp(-40.0, 40.0);
    if b >= 0.0 {
        1.0 / (1.0 + (-b).exp())
    } else {
        let e = b.exp();
        e / (1.0 + e)
    }
}

/// Derivative of [`behaviour_weight`], `f (1 - f)`.
pub fn behaviour_weight_deriv(beta: f64) -> f64 {
    let f = behaviour_weight(beta);
    f * (1.0 - f)
}

/// Second derivative of [`behaviour_weight`], `f (1 - f) (1 - 2 f)`.
pub fn behaviour_weight_deriv2(beta: f64) -> f64 {
    let f = behaviour_weight(beta);
    f * (1.0 - f) * (1.0 - 2.0 * f)
}

/// Velocity over the gap ending at index `k` (0-based, `k >= 1`):
/// `(X_k - X_{k-1}) / (t_k - t_{k-1})`.
pub fn velocity_approx(track: &Track, k: usize) -> Result<(f64, f64)> {
    if k == 0 || k >= track.len() {
        return Err(Error::Dimension(format!(
            "velocity needs a predecessor: index {k} of track length {}",
            track.len()
        )));
    }
    let dt = track.times[k] - track.times[k - 1];
    let (x1, y1) = track.locations[k];
    let (x0, y0) = track.locations[k - 1];
    Ok(((x1 - x0) / dt, (y1 - y0) / dt))
}

/// Foraging drift `-alpha (S(x) + c) grad S(x)` with the gradient taken by
/// central differences of step `h`.
pub fn foraging_drift(
    x: (f64, f64),
    real: &FieldRealization,
    params: &MovementParams,
    h: f64,
) -> Result<(f64, f64)> {
    let s = real.interpolate(x.0, x.1)?;
    let (gx, gy) = real.gradient(x.0, x.1, h)?;
    let factor = -params.alpha * (s + params.c);
    Ok((factor * gx, factor * gy))
}

/// Drift of the walk at index `k`: behavioural mixture of foraging drift
/// and current velocity, with behavioural state `beta`.
pub fn drift(
    track: &Track,
    k: usize,
    beta: f64,
    real: &FieldRealization,
    params: &MovementParams,
    h: f64,
) -> Result<(f64, f64)> {
    let f = behaviour_weight(beta);
    let v = velocity_approx(track, k)?;
    let forage = foraging_drift(track.locations[k], real, params, h)?;
    Ok((f * forage.0 + (1.0 - f) * v.0, f * forage.1 + (1.0 - f) * v.1))
}

/// One-step state of a simulated walker.
///
/// Proposed locations leaving `domain` are reflected across the offending
/// boundary back inside; `reflections` counts those events.
#[derive(Debug, Clone)]
pub struct Walker {
    pub prev: (f64, f64),
    pub curr: (f64, f64),
    pub dt_prev: f64,
    pub beta: f64,
    pub reflections: usize,
    domain: Rect,
    grad_step: f64,
}

impl Walker {
    /// Starts a walker from its first two locations.
    pub fn new(
        first: (f64, f64),
        second: (f64, f64),
        dt_first: f64,
        beta: f64,
        domain: Rect,
        grad_step: f64,
    ) -> Walker {
        Walker {
            prev: first,
            curr: second,
            dt_prev: dt_first,
            beta,
            reflections: 0,
            domain,
            grad_step,
        }
    }

    /// Advances one step of length `dt`, mutating position and state.
    ///
    /// `real` must include any constant field mean; the foraging term reads
    /// the field directly as `S* = real + c`.
    pub fn step(
        &mut self,
        real: &FieldRealization,
        params: &MovementParams,
        dt: f64,
        rng: &mut impl rand::Rng,
    ) -> Result<()> {
        use rand_distr::{Distribution, StandardNormal};
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("step duration dt = {dt}")));
        }
        let f = behaviour_weight(self.beta);
        let v = (
            (self.curr.0 - self.prev.0) / self.dt_prev,
            (self.curr.1 - self.prev.1) / self.dt_prev,
        );
        let forage = if params.alpha == 0.0 {
            // field-independent limit; avoids needing a gradient stencil
            (0.0, 0.0)
        } else {
            foraging_drift(self.curr, real, params, self.grad_step)?
        };
        let mu = (f * forage.0 + (1.0 - f) * v.0, f * forage.1 + (1.0 - f) * v.1);
        let sqrt_dt = dt.sqrt();
        let ax: f64 = StandardNormal.sample(rng);
        let ay: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        let mut x = self.curr.0 + mu.0 * dt + params.sigma[0] * ax * sqrt_dt;
        let mut y = self.curr.1 + mu.1 * dt + params.sigma[1] * ay * sqrt_dt;
        let mut reflected = false;
        x = reflect(x, self.domain.x_min, self.domain.x_max, &mut reflected);
        y = reflect(y, self.domain.y_min, self.domain.y_max, &mut reflected);
        if reflected {
            self.reflections += 1;
        }
        self.prev = self.curr;
        self.curr = (x, y);
        self.dt_prev = dt;
        self.beta += params.sigma_beta * b * sqrt_dt;
        Ok(())
    }
}

fn reflect(mut v: f64, lo: f64, hi: f64, reflected: &mut bool) -> f64 {
    // fold until inside; a single fold suffices unless the step is huge
    for _ in 0..64 {
        if v < lo {
            v = 2.0 * lo - v;
            *reflected = true;
        } else if v > hi {
            v = 2.0 * hi - v;
            *reflected = true;
        } else {
            return v;
        }
    }
    // overshoot beyond any reasonable step; pin to the nearer edge
    v.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Mesh, Rect};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn behaviour_weight_fixtures() {
        assert_relative_eq!(behaviour_weight(0.0), 0.5);
        // two-decimal fixture for the default initial state
        assert!((behaviour_weight(-1.5) - 0.18).abs() < 0.005);
        assert_eq!(behaviour_weight(40.0), 1.0);
        assert_eq!(behaviour_weight(1.0e9), 1.0);
        assert!(behaviour_weight(-1.0e9) >= 0.0);
    }

    proptest! {
        #[test]
        fn behaviour_weight_increasing_into_unit_interval(a in -60.0..60.0f64, d in 1e-4..10.0f64) {
            let lo = behaviour_weight(a);
            let hi = behaviour_weight(a + d);
            prop_assert!(lo > 0.0 && hi <= 1.0);
            prop_assert!(hi >= lo);
            // strictness is only resolvable in f64 away from saturation
            if a > -25.0 && a + d < 25.0 {
                prop_assert!(hi > lo);
            }
        }
    }

    fn flat_track() -> Track {
        Track {
            times: vec![0.0, 2.0, 3.0],
            locations: vec![(0.0, 0.0), (1.0, 1.0), (1.0, 1.0)],
            responses: vec![0.0; 3],
            betas: None,
        }
    }

    #[test]
    fn velocity_examples() {
        let t = flat_track();
        assert_eq!(velocity_approx(&t, 1).unwrap(), (0.5, 0.5));
        assert_eq!(velocity_approx(&t, 2).unwrap(), (0.0, 0.0));
        assert!(velocity_approx(&t, 0).is_err());
    }

    #[test]
    fn track_invariants() {
        assert!(Track::new(vec![0.0, 1.0], vec![(0.0, 0.0); 2], vec![0.0; 2]).is_err());
        assert!(Track::new(vec![0.0, 1.0, 1.0], vec![(0.0, 0.0); 3], vec![0.0; 3]).is_err());
        assert!(Track::new(vec![0.0, 1.0, 2.0], vec![(0.0, 0.0); 3], vec![0.0; 2]).is_err());
        assert!(Track::new(vec![0.0, 1.0, 2.0], vec![(0.0, 0.0); 3], vec![0.0; 3]).is_ok());
    }

    fn affine_realization(a: f64, b: f64, c0: f64) -> FieldRealization {
        let mesh = Arc::new(Mesh::lattice(Rect::square(-10.0, 10.0).unwrap(), 21, 21).unwrap());
        let values = (0..mesh.n_vertices())
            .map(|i| {
                let (x, y) = mesh.vertex(i);
                a * x + b * y + c0
            })
            .collect();
        FieldRealization::new(mesh, values).unwrap()
    }

    #[test]
    fn foraging_drift_arithmetic() {
        // S(x, y) = 0.01 x - 0.02 y + 5 so that S + c = 5 at the origin
        let real = affine_realization(0.01, -0.02, 5.0);
        let params = MovementParams { alpha: 100.0, c: 0.0, ..Default::default() };
        let d = foraging_drift((0.0, 0.0), &real, &params, 1.0).unwrap();
        assert_relative_eq!(d.0, -5.0, max_relative = 1e-9);
        assert_relative_eq!(d.1, 10.0, max_relative = 1e-9);
    }

    #[test]
    fn foraging_drift_vanishes_without_preference() {
        let real = affine_realization(1.0, 2.0, 3.0);
        let params = MovementParams { alpha: 0.0, ..Default::default() };
        assert_eq!(foraging_drift((1.0, 1.0), &real, &params, 0.5).unwrap(), (0.0, 0.0));
        // zero field factor kills the drift regardless of the gradient
        let params = MovementParams { alpha: 100.0, c: -6.0, ..Default::default() };
        let d = foraging_drift((1.0, 1.0), &real, &params, 0.5).unwrap();
        assert_relative_eq!(d.0, 0.0, epsilon = 1e-9);
        assert_relative_eq!(d.1, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn drift_limits_and_mixing() {
        let real = affine_realization(0.0, 0.0, 1.0); // constant field: forage = 0
        let mut track = flat_track();
        track.locations = vec![(0.0, 0.0), (0.0, 2.0), (0.0, 2.0)];
        // at beta -> -inf the drift equals the velocity
        let d = drift(&track, 1, -1.0e6, &real, &MovementParams::default(), 0.5).unwrap();
        assert_relative_eq!(d.1, 1.0, max_relative = 1e-12);
        // at beta -> +inf it equals the (zero) foraging drift
        let d = drift(&track, 1, 1.0e6, &real, &MovementParams::default(), 0.5).unwrap();
        assert_relative_eq!(d.1, 0.0, epsilon = 1e-12);
        // behavioural weight one half mixes the two terms equally
        let params = MovementParams { alpha: 3.0, c: 0.0, ..Default::default() };
        let real2 = affine_realization(-2.0, 0.5, 4.0);
        let forage = foraging_drift((0.0, 2.0), &real2, &params, 0.5).unwrap();
        let v = velocity_approx(&track, 1).unwrap();
        let mixed = drift(&track, 1, 0.0, &real2, &params, 0.5).unwrap();
        assert_relative_eq!(mixed.0, 0.5 * forage.0 + 0.5 * v.0, max_relative = 1e-12);
        assert_relative_eq!(mixed.1, 0.5 * forage.1 + 0.5 * v.1, max_relative = 1e-12);
    }

    #[test]
    fn ballistic_limit_is_straight_line() {
        let real = affine_realization(1.0, 1.0, 0.0);
        let params = MovementParams {
            alpha: 0.0,
            c: 0.0,
            sigma_beta: 0.0,
            sigma: [0.0, 0.0],
            beta0: -1.0e9,
        };
        let domain = Rect::square(-10.0, 10.0).unwrap();
        let mut w = Walker::new((0.0, 0.0), (0.5, 0.25), 1.0, params.beta0, domain, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..4 {
            w.step(&real, &params, 1.0, &mut rng).unwrap();
        }
        // velocity (0.5, 0.25) continued for 4 more unit steps
        assert_relative_eq!(w.curr.0, 2.5, max_relative = 1e-12);
        assert_relative_eq!(w.curr.1, 1.25, max_relative = 1e-12);
        assert_eq!(w.reflections, 0);
    }

    #[test]
    fn step_reproducible_for_fixed_seed() {
        let real = affine_realization(0.3, -0.2, 4.0);
        let params = MovementParams { alpha: 2.0, ..Default::default() };
        let domain = Rect::square(-10.0, 10.0).unwrap();
        let run = || {
            let mut w = Walker::new((0.0, 0.0), (0.2, 0.1), 0.5, -1.5, domain, 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            for _ in 0..10 {
                w.step(&real, &params, 0.3, &mut rng).unwrap();
            }
            (w.curr, w.beta)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn increment_covariance_matches_diffusion() {
        // zero drift: stationary start with alpha 0 gives pure diffusion
        let real = affine_realization(0.0, 0.0, 0.0);
        let params = MovementParams {
            alpha: 0.0,
            c: 0.0,
            sigma_beta: 0.0,
            sigma: [1.5, 0.7],
            beta0: 0.0,
        };
        let domain = Rect::square(-1000.0, 1000.0).unwrap();
        let dt = 0.25;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let mut w = Walker::new((0.0, 0.0), (0.0, 0.0), 1.0, 0.0, domain, 1.0);
            w.step(&real, &params, dt, &mut rng).unwrap();
            let (dx, dy) = w.curr;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        let nf = n as f64;
        // target covariance diag(sigma^2) dt within Monte-Carlo tolerance
        let vxx = 1.5f64.powi(2) * dt;
        let vyy = 0.7f64.powi(2) * dt;
        assert!((sxx / nf - vxx).abs() < 4.0 * vxx * (2.0 / nf).sqrt());
        assert!((syy / nf - vyy).abs() < 4.0 * vyy * (2.0 / nf).sqrt());
        assert!((sxy / nf).abs() < 4.0 * (vxx * vyy).sqrt() / nf.sqrt());
    }

    #[test]
    fn reflection_keeps_walker_inside() {
        let real = affine_realization(0.0, 0.0, 0.0);
        let params = MovementParams { sigma: [5.0, 5.0], sigma_beta: 0.0, ..Default::default() };
        let domain = Rect::square(-1.0, 1.0).unwrap();
        let mut w = Walker::new((0.0, 0.0), (0.0, 0.0), 1.0, 0.0, domain, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            w.step(&real, &params, 1.0, &mut rng).unwrap();
            assert!(domain.contains(w.curr.0, w.curr.1));
        }
        assert!(w.reflections > 0);
    }
}
