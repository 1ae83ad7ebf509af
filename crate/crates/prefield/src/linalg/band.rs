//! Symmetric banded matrices and their Cholesky factorization.
//!
//! Every mesh in this crate is a structured lattice, so precision matrices
//! and field-block Hessians have a natural band structure under row-major
//! vertex ordering. A dedicated band solver keeps factorization at
//! `O(n b^2)` and solves at `O(n b)` without any ordering machinery.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix, stored column-major: entry `(j + d, j)`
/// lives at `data[j * (bandwidth + 1) + d]` for `d in 0..=bandwidth`.
#[derive(Debug, Clone)]
pub struct SymBandMatrix {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        SymBandMatrix { n, bandwidth, data: vec![0.0; n * (bandwidth + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row >= col && row - col <= self.bandwidth);
        col * (self.bandwidth + 1) + (row - col)
    }

    /// Adds `v` at symmetric position `(i, j)`; only the lower triangle is stored.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (row, col) = if i >= j { (i, j) } else { (j, i) };
        assert!(
            row - col <= self.bandwidth,
            "entry ({i}, {j}) outside bandwidth {}",
            self.bandwidth
        );
        let k = self.idx(row, col);
        self.data[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (row, col) = if i >= j { (i, j) } else { (j, i) };
        if row - col > self.bandwidth {
            return 0.0;
        }
        self.data[self.idx(row, col)]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` to every diagonal entry (Levenberg-style damping).
    pub fn add_diagonal(&mut self, v: f64) {
        let stride = self.bandwidth + 1;
        for j in 0..self.n {
            self.data[j * stride] += v;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += factor * other`; requires `other` to fit inside this band.
    pub fn add_scaled(&mut self, other: &SymBandMatrix, factor: f64) {
        assert_eq!(self.n, other.n);
        assert!(self.bandwidth >= other.bandwidth, "target band too narrow");
        let stride = self.bandwidth + 1;
        let ostride = other.bandwidth + 1;
        for j in 0..self.n {
            for d in 0..=other.bandwidth {
                self.data[j * stride + d] += factor * other.data[j * ostride + d];
            }
        }
    }

    /// `x' A x` over the full symmetric matrix.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        let bw = self.bandwidth;
        let mut acc = 0.0;
        for j in 0..self.n {
            let base = j * (bw + 1);
            acc += self.data[base] * x[j] * x[j];
            let top = (self.n - 1 - j).min(bw);
            for d in 1..=top {
                acc += 2.0 * self.data[base + d] * x[j] * x[j + d];
            }
        }
        acc
    }

    /// `y += A x` over the full symmetric matrix.
    pub fn mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let bw = self.bandwidth;
        for j in 0..self.n {
            let base = j * (bw + 1);
            y[j] += self.data[base] * x[j];
            let top = (self.n - 1 - j).min(bw);
            for d in 1..=top {
                let a = self.data[base + d];
                y[j + d] += a * x[j];
                y[j] += a * x[j + d];
            }
        }
    }

    /// Cholesky factorization `A = L L^T`; fails if the matrix is not
    /// positive definite.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bandwidth;
        let stride = bw + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            // update column j with contributions from columns k < j in band
            let kmin = j.saturating_sub(bw);
            for k in kmin..j {
                let ljk = l[k * stride + (j - k)];
                if ljk == 0.0 {
                    continue;
                }
                // entries (i, j) for i in j..=min(n-1, k+bw)
                let imax = (k + bw).min(n - 1);
                let base_j = j * stride;
                let base_k = k * stride;
                for i in j..=imax {
                    l[base_j + (i - j)] -= ljk * l[base_k + (i - k)];
                }
            }
            let d = l[j * stride];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(
                    "band Cholesky pivot {d:.3e} at column {j}"
                )));
            }
            let root = d.sqrt();
            let imax = (j + bw).min(n - 1);
            for i in j..=imax {
                l[j * stride + (i - j)] /= root;
            }
        }
        Ok(BandCholesky { n, bandwidth: bw, l })
    }
}

/// Lower-triangular band factor from [`SymBandMatrix::cholesky`].
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bandwidth: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn n(&self) -> usize {
        self.n
    }

    /// log det A = 2 sum log L_jj
    pub fn log_det(&self) -> f64 {
        let stride = self.bandwidth + 1;
        (0..self.n).map(|j| self.l[j * stride].ln()).sum::<f64>() * 2.0
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let bw = self.bandwidth;
        let stride = bw + 1;
        for j in 0..self.n {
            let base = j * stride;
            let yj = b[j] / self.l[base];
            b[j] = yj;
            if yj != 0.0 {
                let imax = (j + bw).min(self.n - 1);
                for i in (j + 1)..=imax {
                    b[i] -= self.l[base + (i - j)] * yj;
                }
            }
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let bw = self.bandwidth;
        let stride = bw + 1;
        for j in (0..self.n).rev() {
            let base = j * stride;
            let imax = (j + bw).min(self.n - 1);
            let mut s = b[j];
            for i in (j + 1)..=imax {
                s -= self.l[base + (i - j)] * b[i];
            }
            b[j] = s / self.l[base];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn random_spd_band(n: usize, bw: usize, seed: u64) -> SymBandMatrix {
        // deterministic LCG so the test needs no rng dependency here
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        };
        let mut a = SymBandMatrix::zeros(n, bw);
        for j in 0..n {
            for i in j..(j + bw + 1).min(n) {
                if i == j {
                    a.add(i, j, 2.0 * bw as f64 + 1.0 + next().abs());
                } else {
                    a.add(i, j, next());
                }
            }
        }
        a
    }

    fn to_dense(a: &SymBandMatrix) -> DMatrix<f64> {
        let n = a.n();
        DMatrix::from_fn(n, n, |i, j| a.get(i, j))
    }

    #[test]
    fn factorization_matches_dense() {
        let a = random_spd_band(40, 7, 42);
        let chol = a.cholesky().unwrap();
        let dense = to_dense(&a);
        let dense_chol = dense.clone().cholesky().unwrap();
        let expected_logdet: f64 =
            (0..40).map(|i| dense_chol.l()[(i, i)].ln()).sum::<f64>() * 2.0;
        assert_relative_eq!(chol.log_det(), expected_logdet, max_relative = 1e-12);

        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = chol.solve(&b);
        let x_dense = dense_chol.solve(&nalgebra::DVector::from_column_slice(&b));
        for i in 0..40 {
            assert_relative_eq!(x[i], x_dense[i], max_relative = 1e-10);
        }
    }

    #[test]
    fn mul_vec_matches_dense() {
        let a = random_spd_band(23, 5, 7);
        let dense = to_dense(&a);
        let x: Vec<f64> = (0..23).map(|i| (i as f64 * 1.1).cos()).collect();
        let mut y = vec![0.0; 23];
        a.mul_vec_add(&x, &mut y);
        let y_dense = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..23 {
            assert_relative_eq!(y[i], y_dense[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = SymBandMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -2.0);
        a.add(2, 2, 1.0);
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite(_))));
    }
}
