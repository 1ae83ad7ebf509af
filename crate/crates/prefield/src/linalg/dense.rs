//! Small dense helpers layered over nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Cholesky with a single diagonal-jitter retry.
///
/// On first failure adds `jitter` to every diagonal entry and tries once
/// more; a second failure is reported as an SPD violation (for covariance
/// matrices this usually means duplicated locations).
pub fn cholesky_with_jitter(
    mut a: DMatrix<f64>,
    jitter: f64,
    context: &str,
) -> Result<Cholesky<f64, Dyn>> {
    match a.clone().cholesky() {
        Some(c) => Ok(c),
        None => {
            for i in 0..a.nrows() {
                a[(i, i)] += jitter;
            }
            a.cholesky().ok_or_else(|| {
                Error::NotPositiveDefinite(format!(
                    "{context}: dense Cholesky failed even after jitter {jitter:.1e}"
                ))
            })
        }
    }
}

pub fn chol_log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Negative log density of `N(mean, Sigma)` evaluated at `y`, with `Sigma`
/// given through its Cholesky factor.
pub fn gaussian_nll(chol: &Cholesky<f64, Dyn>, resid: &DVector<f64>) -> f64 {
    let n = resid.len() as f64;
    let alpha = chol.solve(resid);
    0.5 * resid.dot(&alpha) + 0.5 * chol_log_det(chol) + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jitter_rescues_semidefinite() {
        // rank-deficient: duplicate rows
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(a.clone().cholesky().is_none());
        let c = cholesky_with_jitter(a, 1e-8, "test").unwrap();
        assert!(c.l_dirty()[(0, 0)] > 0.0);
    }

    #[test]
    fn gaussian_nll_matches_hand_computation() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let chol = sigma.clone().cholesky().unwrap();
        let r = DVector::from_column_slice(&[0.5, -1.2]);
        let inv = sigma.clone().try_inverse().unwrap();
        let det: f64 = sigma.determinant();
        let expected = 0.5 * (r.transpose() * &inv * &r)[(0, 0)]
            + 0.5 * det.ln()
            + (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(gaussian_nll(&chol, &r), expected, max_relative = 1e-12);
    }
}
