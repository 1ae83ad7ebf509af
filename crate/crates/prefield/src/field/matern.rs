//! Matérn covariance with integer smoothness.

use crate::error::{Error, Result};
use crate::field::FieldParams;
use crate::special::bessel_kn;

/// Matérn covariance at distance `r`:
/// `sigma2 * 2^{1-kappa}/Gamma(kappa) * (r/phi)^kappa * K_kappa(r/phi)`,
/// with the continuous limit `sigma2` at `r = 0`.
pub fn matern_cov(r: f64, params: &FieldParams) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::InvalidParameter(format!("matern_cov distance r = {r}")));
    }
    params.validate()?;
    if r == 0.0 {
        return Ok(params.sigma2);
    }
    let u = r / params.phi;
    let kappa = params.kappa;
    // Gamma(kappa) = (kappa - 1)! for integer kappa
    let gamma_kappa: f64 = (1..kappa).map(|k| k as f64).product();
    let value = params.sigma2 * (0.5_f64).powi(kappa as i32 - 1) / gamma_kappa
        * u.powi(kappa as i32)
        * bessel_kn(kappa, u);
    // far tail underflows the Bessel factor; the limit is 0
    Ok(if value.is_finite() { value } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(phi: f64, sigma2: f64, kappa: u32) -> FieldParams {
        FieldParams { mu: 0.0, tau2: 0.0, kappa, phi, sigma2 }
    }

    #[test]
    fn zero_lag_is_marginal_variance() {
        assert_relative_eq!(matern_cov(0.0, &params(25.0, 1.5, 2)).unwrap(), 1.5);
    }

    #[test]
    fn high_precision_fixtures() {
        // reference values from 40-digit evaluation of the covariance formula
        let p = params(25.0, 1.5, 2);
        assert_relative_eq!(
            matern_cov(25.0, &p).unwrap(),
            1.218629173976383112,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            matern_cov(10.0, &p).unwrap(),
            1.444356150982544557,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            matern_cov(50.0, &p).unwrap(),
            0.7612792636981675888,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            matern_cov(2.0, &params(1.0, 1.0, 1)).unwrap(),
            0.2797317636330448546,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            matern_cov(0.5, &params(2.0, 2.0, 3)).unwrap(),
            1.984493979386033775,
            max_relative = 1e-13
        );
    }

    #[test]
    fn decays_to_zero() {
        let p = params(25.0, 1.5, 2);
        let far = matern_cov(1.0e5, &p).unwrap();
        assert!(far >= 0.0 && far < 1e-300);
        // monotone decay on a grid of lags
        let mut prev = matern_cov(0.0, &p).unwrap();
        for i in 1..200 {
            let c = matern_cov(i as f64, &p).unwrap();
            assert!(c < prev, "not strictly decreasing at r = {i}");
            prev = c;
        }
    }

    #[test]
    fn continuous_at_origin() {
        let p = params(25.0, 1.5, 2);
        let near = matern_cov(1e-8, &p).unwrap();
        assert_relative_eq!(near, 1.5, max_relative = 1e-9);
    }

    #[test]
    fn rejects_bad_distance() {
        let p = params(25.0, 1.5, 2);
        assert!(matern_cov(f64::NAN, &p).is_err());
        assert!(matern_cov(-1.0, &p).is_err());
        assert!(matern_cov(f64::INFINITY, &p).is_err());
    }
}
