//! Scaled transverse Mercator projection for track ingestion.
//!
//! Spherical transverse Mercator on the authalic radius, with the usual
//! zone layout (central meridian `zone * 6 - 183`, false easting 500 km,
//! optional 10000 km false northing in the southern hemisphere), then
//! multiplied by a user scale into the toolkit's abstract distance units.
//! The scale carries no physical meaning beyond giving isotropic distances
//! a convenient magnitude, so a spherical datum is plenty; the round-trip
//! error of the projection itself is far below location accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Authalic Earth radius in meters.
const EARTH_RADIUS: f64 = 6_371_007.181;
const CENTRAL_SCALE: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Projection {
    /// UTM zone, 1..=60.
    pub zone: u32,
    /// Multiplier from meters to abstract units.
    pub scale: f64,
    /// Add the southern-hemisphere false northing.
    pub south: bool,
}

impl Projection {
    pub fn new(zone: u32, scale: f64, south: bool) -> Result<Projection> {
        if !(1..=60).contains(&zone) {
            return Err(Error::Config(format!("UTM zone {zone} outside 1..=60")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("projection scale {scale}")));
        }
        Ok(Projection { zone, scale, south })
    }

    pub fn central_meridian_deg(&self) -> f64 {
        self.zone as f64 * 6.0 - 183.0
    }

    /// Forward projection of one point, degrees to abstract units.
    pub fn forward(&self, lon_deg: f64, lat_deg: f64) -> Result<(f64, f64)> {
        if !(-80.0..=84.0).contains(&lat_deg) {
            return Err(Error::data(format!(
                "latitude {lat_deg} outside the projection's validity band [-80, 84]"
            )));
        }
        let lam = (lon_deg - self.central_meridian_deg()).to_radians();
        let phi = lat_deg.to_radians();
        let b = phi.cos() * lam.sin();
        let rk = EARTH_RADIUS * CENTRAL_SCALE;
        let x = rk * 0.5 * ((1.0 + b) / (1.0 - b)).ln();
        let mut y = rk * (phi.tan() / lam.cos()).atan();
        if self.south {
            y += FALSE_NORTHING_SOUTH;
        }
        Ok(((x + FALSE_EASTING) * self.scale, y * self.scale))
    }

    /// Inverse projection, abstract units back to degrees.
    pub fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let rk = EARTH_RADIUS * CENTRAL_SCALE;
        let xm = x / self.scale - FALSE_EASTING;
        let mut ym = y / self.scale;
        if self.south {
            ym -= FALSE_NORTHING_SOUTH;
        }
        let d = ym / rk;
        let xr = xm / rk;
        let lat = (d.sin() / xr.cosh()).asin().to_degrees();
        let lon = self.central_meridian_deg() + (xr.sinh() / d.cos()).atan().to_degrees();
        (lon, lat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng as _;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn central_meridian_at_equator_maps_to_false_easting() {
        let p = Projection::new(43, 2.0, false).unwrap();
        assert_relative_eq!(p.central_meridian_deg(), 75.0);
        let (x, y) = p.forward(75.0, 0.0).unwrap();
        assert_relative_eq!(x, 500_000.0 * 2.0, max_relative = 1e-12);
        assert!(y.abs() < 1e-6);
    }

    #[test]
    fn southern_false_northing_applies() {
        let p = Projection::new(43, 1.0, true).unwrap();
        let (_, y) = p.forward(75.0, -0.0001).unwrap();
        assert!(y < 10_000_000.0 && y > 9_900_000.0);
    }

    #[test]
    fn meridian_convergence_shrinks_longitude_distance() {
        let p = Projection::new(43, 1.0, true).unwrap();
        let (x1, _) = p.forward(74.5, -55.0).unwrap();
        let (x2, _) = p.forward(75.5, -55.0).unwrap();
        let equatorial_degree = EARTH_RADIUS * std::f64::consts::PI / 180.0;
        assert!((x2 - x1).abs() < equatorial_degree);
        // roughly cos(55 deg) of the equatorial arc
        assert_relative_eq!(
            (x2 - x1).abs() / equatorial_degree,
            (55.0_f64).to_radians().cos(),
            max_relative = 0.01
        );
    }

    #[test]
    fn round_trip_within_one_meter() {
        let p = Projection::new(43, 1.0, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let lon = 75.0 + rng.gen_range(-5.0..5.0);
            let lat = rng.gen_range(-65.0..-45.0);
            let (x, y) = p.forward(lon, lat).unwrap();
            let (lon2, lat2) = p.inverse(x, y);
            // a degree is ~111 km, so 1 m is ~9e-6 degrees
            assert!((lon2 - lon).abs() * 111_000.0 * lat.to_radians().cos() < 1.0);
            assert!((lat2 - lat).abs() * 111_000.0 < 1.0);
        }
    }

    #[test]
    fn out_of_band_latitude_rejected() {
        let p = Projection::new(43, 1.0, true).unwrap();
        assert!(p.forward(75.0, -85.0).is_err());
        assert!(p.forward(75.0, 89.0).is_err());
    }
}
