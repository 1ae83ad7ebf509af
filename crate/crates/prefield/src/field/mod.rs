//! Latent Gaussian fields: parameters, lattice meshes, sparse precision
//! construction, sampling, interpolation, and the dense-covariance oracle.

pub mod dense_gp;
pub mod fem;
pub mod io;
pub mod matern;
pub mod mesh;
pub mod precision;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dense_gp::{dense_gp_draw, matern_covariance_matrix};
pub use fem::{assemble_fem, FemMatrices};
pub use matern::matern_cov;
pub use mesh::{GradientStencil, Mesh, Rect};
pub use precision::{build_precision, sample_field, PrecisionBundle};

/// Parameters of the latent Matérn field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    /// Constant mean of the observation model (response units).
    pub mu: f64,
    /// Nugget variance of the measurement error (response units squared).
    pub tau2: f64,
    /// Matérn smoothness; all precision-based inference requires 2.
    pub kappa: u32,
    /// Matérn scale (distance units).
    pub phi: f64,
    /// Marginal variance (response units squared).
    pub sigma2: f64,
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi = {}", self.phi)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 = {}", self.sigma2)));
        }
        if !(self.tau2 >= 0.0 && self.tau2.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau2 = {}", self.tau2)));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu = {}", self.mu)));
        }
        if self.kappa == 0 {
            return Err(Error::InvalidParameter("kappa must be a positive integer".into()));
        }
        Ok(())
    }

    /// The precision construction is only valid for smoothness 2.
    pub fn require_kappa2(&self) -> Result<()> {
        if self.kappa != 2 {
            return Err(Error::InvalidParameter(format!(
                "precision construction requires kappa = 2, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams { mu: 0.0, tau2: 0.0, kappa: 2, phi: 1.0, sigma2: 1.0 }
    }
}

/// Field values at the vertices of a mesh.
///
/// Realizations drawn by [`sample_field`] or [`dense_gp_draw`] are zero-mean;
/// [`FieldRealization::with_added_mean`] folds a constant in when a field
/// with its trend is needed (track simulation reads the field this way).
#[derive(Debug, Clone)]
pub struct FieldRealization {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FieldRealization {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::Dimension(format!(
                "realization has {} values for a mesh with {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        Ok(FieldRealization { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_added_mean(&self, mean: f64) -> FieldRealization {
        FieldRealization {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| v + mean).collect(),
        }
    }

    /// Piecewise-linear interpolation at `(x, y)`.
    pub fn interpolate(&self, x: f64, y: f64) -> Result<f64> {
        let (idx, w) = self.mesh.interp_weights(x, y)?;
        Ok((0..3).map(|k| w[k] * self.values[idx[k]]).sum())
    }

    /// Central-difference gradient of the interpolant with step `h`.
    pub fn gradient(&self, x: f64, y: f64, h: f64) -> Result<(f64, f64)> {
        let stencil = self.mesh.gradient_stencil(x, y, h)?;
        Ok(stencil.apply(&self.values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear_field() -> FieldRealization {
        let mesh = Arc::new(Mesh::lattice(Rect::square(0.0, 4.0).unwrap(), 5, 5).unwrap());
        let values = (0..mesh.n_vertices()).map(|i| mesh.vertex(i).0).collect();
        FieldRealization::new(mesh, values).unwrap()
    }

    #[test]
    fn interpolation_exact_at_vertices() {
        let f = linear_field();
        for i in 0..f.mesh().n_vertices() {
            let (x, y) = f.mesh().vertex(i);
            assert_relative_eq!(f.interpolate(x, y).unwrap(), f.values()[i]);
        }
    }

    #[test]
    fn interpolation_exact_on_affine_fields() {
        let mesh = Arc::new(Mesh::lattice(Rect::square(-2.0, 2.0).unwrap(), 7, 7).unwrap());
        let values: Vec<f64> =
            (0..mesh.n_vertices()).map(|i| {
                let (x, y) = mesh.vertex(i);
                3.0 * x - 2.0 * y + 0.5
            }).collect();
        let f = FieldRealization::new(mesh, values).unwrap();
        for &(x, y) in &[(0.13, -0.7), (1.99, 1.99), (-2.0, 2.0), (0.0, 0.0)] {
            assert_relative_eq!(
                f.interpolate(x, y).unwrap(),
                3.0 * x - 2.0 * y + 0.5,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn centroid_value_is_vertex_mean() {
        let mesh = Arc::new(Mesh::lattice(Rect::square(0.0, 1.0).unwrap(), 2, 2).unwrap());
        let f = FieldRealization::new(Arc::clone(&mesh), vec![1.0, 2.0, 4.0, 8.0]).unwrap();
        let tri = mesh.triangle(0);
        let (cx, cy) = tri
            .iter()
            .fold((0.0, 0.0), |acc, &v| {
                let (x, y) = mesh.vertex(v);
                (acc.0 + x / 3.0, acc.1 + y / 3.0)
            });
        let mean = tri.iter().map(|&v| f.values()[v]).sum::<f64>() / 3.0;
        assert_relative_eq!(f.interpolate(cx, cy).unwrap(), mean, max_relative = 1e-12);
    }

    #[test]
    fn gradient_exact_on_affine_fields() {
        let mesh = Arc::new(Mesh::lattice(Rect::square(-3.0, 3.0).unwrap(), 7, 7).unwrap());
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|i| {
                let (x, y) = mesh.vertex(i);
                2.0 * x - 3.0 * y
            })
            .collect();
        let f = FieldRealization::new(mesh, values).unwrap();
        let (gx, gy) = f.gradient(0.4, -0.9, 0.5).unwrap();
        assert_relative_eq!(gx, 2.0, max_relative = 1e-12);
        assert_relative_eq!(gy, -3.0, max_relative = 1e-12);
    }

    #[test]
    fn gradient_zero_on_constant_field() {
        let mesh = Arc::new(Mesh::lattice(Rect::square(0.0, 2.0).unwrap(), 5, 5).unwrap());
        let f = FieldRealization::new(mesh, vec![7.0; 25]).unwrap();
        let (gx, gy) = f.gradient(1.0, 1.0, 0.3).unwrap();
        assert_relative_eq!(gx, 0.0, epsilon = 1e-13);
        assert_relative_eq!(gy, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn gradient_second_order_on_quadratic() {
        // S(x, y) = x^2 has gradient (2x, 0); the interpolant itself is only
        // piecewise linear, so evaluate the convergence of the stencil on a
        // fine mesh where interpolation error is negligible.
        let mesh = Arc::new(Mesh::lattice(Rect::square(0.0, 2.0).unwrap(), 201, 201).unwrap());
        let values: Vec<f64> =
            (0..mesh.n_vertices()).map(|i| mesh.vertex(i).0.powi(2)).collect();
        let f = FieldRealization::new(mesh, values).unwrap();
        let (gx, gy) = f.gradient(1.0, 1.0, 0.1).unwrap();
        assert_relative_eq!(gx, 2.0, max_relative = 1e-3);
        assert!(gy.abs() < 1e-10);
    }

    #[test]
    fn gradient_stencil_outside_hull_errors() {
        let mesh = Arc::new(Mesh::lattice(Rect::square(0.0, 1.0).unwrap(), 3, 3).unwrap());
        let f = FieldRealization::new(mesh, vec![0.0; 9]).unwrap();
        // point inside, stencil arm outside
        assert!(f.gradient(0.95, 0.5, 0.2).is_err());
    }
}
