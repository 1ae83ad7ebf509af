//! Full track simulation: exponential surfacing gaps, burn-in, thinning,
//! and response generation with nugget noise.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldParams, FieldRealization, Rect};
use crate::movement::{MovementParams, Track, Walker};

/// Protocol for generating one batch of tracks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimProtocol {
    /// Rectangle starting locations are drawn from, and the reflection
    /// boundary for the walk.
    pub domain: Rect,
    /// Total raw positions per track (including the start).
    pub n_raw: usize,
    /// Leading raw positions discarded.
    pub burn_in: usize,
    /// Keep every `thin`-th of the remaining positions.
    pub thin: usize,
    /// Rate of the exponential inter-observation gaps.
    pub lambda: f64,
    /// Tracks per batch.
    pub n_tracks: usize,
    /// Base seed for batch generation.
    pub seed: u64,
}

impl SimProtocol {
    /// The protocol used throughout the simulation studies: 360 raw steps,
    /// 60 burn-in, thin by 3, rate-10 gaps, 3 tracks.
    pub fn standard(domain: Rect, seed: u64) -> SimProtocol {
        SimProtocol { domain, n_raw: 360, burn_in: 60, thin: 3, lambda: 10.0, n_tracks: 3, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_raw <= self.burn_in {
            return Err(Error::Config(format!(
                "n_raw {} must exceed burn_in {}",
                self.n_raw, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.kept_len() < 3 {
            return Err(Error::Config(format!(
                "protocol keeps only {} observations; need at least 3",
                self.kept_len()
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda = {} must be positive", self.lambda)));
        }
        if self.n_tracks == 0 {
            return Err(Error::Config("n_tracks must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of retained observations per track.
    pub fn kept_len(&self) -> usize {
        (self.n_raw - self.burn_in) / self.thin
    }
}

/// Simulates one track over the (zero-mean) realization `real`.
///
/// The constant mean `field.mu` is added to the field before it drives the
/// movement, so the foraging term reads `S* = mu + S + c`; responses are
/// `Y = mu + S(X) + Z` with `Z ~ N(0, tau2)`. The walk starts uniformly on
/// the protocol domain, takes `n_raw - 1` steps with exponential gaps (the
/// second position is a pure diffusion step since no velocity exists yet),
/// then drops the burn-in and keeps every `thin`-th position, each with its
/// original time stamp.
pub fn simulate_track(
    real: &FieldRealization,
    movement: &MovementParams,
    field: &FieldParams,
    protocol: &SimProtocol,
    rng: &mut impl Rng,
) -> Result<Track> {
    protocol.validate()?;
    movement.validate()?;
    field.validate()?;

    let grad_step = real.mesh().cell_width();
    let hull = real.mesh().rect();
    let needed = grad_step * (1.0 - 1e-12);
    if protocol.domain.x_min - hull.x_min < needed
        || hull.x_max - protocol.domain.x_max < needed
        || protocol.domain.y_min - hull.y_min < needed
        || hull.y_max - protocol.domain.y_max < needed
    {
        return Err(Error::Config(
            "field mesh must extend at least one gradient step beyond the simulation domain"
                .into(),
        ));
    }

    let with_mean = real.with_added_mean(field.mu);

    let ux = Uniform::new_inclusive(protocol.domain.x_min, protocol.domain.x_max);
    let uy = Uniform::new_inclusive(protocol.domain.y_min, protocol.domain.y_max);
    let gaps = Exp::new(protocol.lambda).map_err(|e| Error::Config(format!("lambda: {e}")))?;

    let start = (ux.sample(rng), uy.sample(rng));
    let mut times = Vec::with_capacity(protocol.n_raw);
    let mut locations = Vec::with_capacity(protocol.n_raw);
    let mut betas = Vec::with_capacity(protocol.n_raw);
    times.push(0.0);
    locations.push(start);
    betas.push(movement.beta0);

    // second position: pure diffusion, no velocity exists yet
    let dt0: f64 = gaps.sample(rng);
    let ax: f64 = StandardNormal.sample(rng);
    let ay: f64 = StandardNormal.sample(rng);
    let b0: f64 = StandardNormal.sample(rng);
    let sqrt_dt0 = dt0.sqrt();
    let mut second = (
        start.0 + movement.sigma[0] * ax * sqrt_dt0,
        start.1 + movement.sigma[1] * ay * sqrt_dt0,
    );
    second.0 = fold_into(second.0, protocol.domain.x_min, protocol.domain.x_max);
    second.1 = fold_into(second.1, protocol.domain.y_min, protocol.domain.y_max);
    let beta1 = movement.beta0 + movement.sigma_beta * b0 * sqrt_dt0;
    times.push(dt0);
    locations.push(second);
    betas.push(beta1);

    let mut walker = Walker::new(start, second, dt0, beta1, protocol.domain, grad_step);
    for _ in 2..protocol.n_raw {
        let dt: f64 = gaps.sample(rng);
        walker.step(&with_mean, movement, dt, rng)?;
        times.push(times.last().unwrap() + dt);
        locations.push(walker.curr);
        betas.push(walker.beta);
    }

    // drop burn-in, keep every thin-th position (the last of each group)
    let kept: Vec<usize> = (protocol.burn_in..protocol.n_raw)
        .skip(protocol.thin - 1)
        .step_by(protocol.thin)
        .collect();
    let tau = field.tau2.sqrt();
    let track = Track {
        times: kept.iter().map(|&i| times[i]).collect(),
        locations: kept.iter().map(|&i| locations[i]).collect(),
        responses: kept
            .iter()
            .map(|&i| {
                let z: f64 = StandardNormal.sample(rng);
                with_mean.interpolate(locations[i].0, locations[i].1).map(|s| s + tau * z)
            })
            .collect::<Result<Vec<f64>>>()?,
        betas: Some(kept.iter().map(|&i| betas[i]).collect()),
    };
    track.validate()?;
    Ok(track)
}

fn fold_into(mut v: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..64 {
        if v < lo {
            v = 2.0 * lo - v;
        } else if v > hi {
            v = 2.0 * hi - v;
        } else {
            return v;
        }
    }
    v.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{assemble_fem, build_precision, sample_field, Mesh};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn test_field(seed: u64) -> (FieldRealization, FieldParams) {
        let domain = Rect::square(-30.0, 30.0).unwrap();
        let mesh = Arc::new(Mesh::lattice_with_margin_cells(domain, 11, 11, 2).unwrap());
        let fem = assemble_fem(&mesh).unwrap();
        let params = FieldParams { mu: 5.0, tau2: 0.1, kappa: 2, phi: 10.0, sigma2: 1.5 };
        let bundle = build_precision(&mesh, &fem, &params).unwrap();
        (sample_field(&bundle, seed), params)
    }

    fn protocol() -> SimProtocol {
        SimProtocol::standard(Rect::square(-30.0, 30.0).unwrap(), 0)
    }

    #[test]
    fn standard_protocol_keeps_one_hundred() {
        assert_eq!(protocol().kept_len(), 100);
        let (real, fp) = test_field(1);
        let mp = MovementParams {
            alpha: 10.0,
            c: 0.0,
            sigma_beta: 0.1,
            sigma: [1.0, 1.0],
            beta0: -1.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let track = simulate_track(&real, &mp, &fp, &protocol(), &mut rng).unwrap();
        assert_eq!(track.len(), 100);
        assert!(track.betas.as_ref().unwrap().len() == 100);
        for w in track.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn mean_gap_matches_rate() {
        let (real, fp) = test_field(2);
        let mp = MovementParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut total = 0.0;
        let mut count = 0;
        for _ in 0..30 {
            let track = simulate_track(&real, &mp, &fp, &protocol(), &mut rng).unwrap();
            // thinned gaps average thin / lambda
            for w in track.times.windows(2) {
                total += w[1] - w[0];
                count += 1;
            }
        }
        let mean = total / count as f64;
        let expected = 3.0 / 10.0;
        assert!((mean - expected).abs() < 0.02, "mean thinned gap {mean}");
    }

    #[test]
    fn alpha_zero_location_law_field_independent() {
        let (real_a, fp) = test_field(3);
        let (real_b, _) = test_field(4);
        let mp = MovementParams { alpha: 0.0, ..Default::default() };
        let t1 = simulate_track(
            &real_a,
            &mp,
            &fp,
            &protocol(),
            &mut ChaCha8Rng::seed_from_u64(55),
        )
        .unwrap();
        let t2 = simulate_track(
            &real_b,
            &mp,
            &fp,
            &protocol(),
            &mut ChaCha8Rng::seed_from_u64(55),
        )
        .unwrap();
        assert_eq!(t1.locations, t2.locations);
        assert_eq!(t1.times, t2.times);
        assert_ne!(t1.responses, t2.responses);
    }

    #[test]
    fn noise_free_simulation_deterministic() {
        let (real, mut fp) = test_field(5);
        fp.tau2 = 0.0;
        let mp = MovementParams {
            alpha: 5.0,
            c: 0.0,
            sigma_beta: 0.0,
            sigma: [0.0, 0.0],
            beta0: -1.5,
        };
        let t1 =
            simulate_track(&real, &mp, &fp, &protocol(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let t2 =
            simulate_track(&real, &mp, &fp, &protocol(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn strong_preference_oversamples_cool_regions() {
        // with alpha > 0 and a positive field, drift descends the gradient,
        // so sampled responses average below the domain-wide field mean
        let (real, fp) = test_field(6);
        let mp = MovementParams {
            alpha: 100.0,
            c: 0.0,
            sigma_beta: 0.1,
            sigma: [1.0, 1.0],
            beta0: -1.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let with_mean = real.with_added_mean(fp.mu);
        let core = real.mesh().core_vertices();
        let field_mean: f64 =
            core.iter().map(|&i| with_mean.values()[i]).sum::<f64>() / core.len() as f64;
        let mut sampled = Vec::new();
        for _ in 0..100 {
            let track = simulate_track(&real, &mp, &fp, &protocol(), &mut rng).unwrap();
            sampled.extend(track.responses);
        }
        let sample_mean: f64 = sampled.iter().sum::<f64>() / sampled.len() as f64;
        assert!(
            sample_mean < field_mean,
            "sampled mean {sample_mean} not below field mean {field_mean}"
        );
    }

    #[test]
    fn mesh_must_cover_domain_with_stencil_room() {
        let domain = Rect::square(-30.0, 30.0).unwrap();
        let mesh = Arc::new(Mesh::lattice(domain, 11, 11).unwrap()); // no margin
        let values = vec![0.0; mesh.n_vertices()];
        let real = FieldRealization::new(mesh, values).unwrap();
        let fp = FieldParams { mu: 0.0, tau2: 0.0, kappa: 2, phi: 10.0, sigma2: 1.0 };
        let err = simulate_track(
            &real,
            &MovementParams::default(),
            &fp,
            &protocol(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
