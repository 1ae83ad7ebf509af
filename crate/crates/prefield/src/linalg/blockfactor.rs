//! Factorization of symmetric matrices with a banded leading block.
//!
//! The inner-problem Hessian has the structure
//!
//! ```text
//!     H = [ B   F ]      B: m x m banded (field block)
//!         [ F'  T ]      T: q x q dense-small (behavioural states)
//! ```
//!
//! which factors as `H = L L'` with `L = [[L_B, 0], [W', L_S]]` where
//! `B = L_B L_B'`, `W = L_B^{-1} F`, and `L_S L_S' = T - W' W` (the Schur
//! complement). All solves and the log determinant follow from the blocks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::band::{BandCholesky, SymBandMatrix};

/// Assembled symmetric block matrix prior to factorization.
#[derive(Debug, Clone)]
pub struct BlockSymMatrix {
    pub band: SymBandMatrix,
    /// Sparse cross block: for each tail column `j`, the nonzero
    /// `(field_index, value)` pairs of `F[:, j]`.
    pub cross: Vec<Vec<(usize, f64)>>,
    /// Dense tail block `T` (q x q).
    pub tail: DMatrix<f64>,
}

impl BlockSymMatrix {
    pub fn zeros(m: usize, bandwidth: usize, q: usize) -> Self {
        BlockSymMatrix {
            band: SymBandMatrix::zeros(m, bandwidth),
            cross: vec![Vec::new(); q],
            tail: DMatrix::zeros(q, q),
        }
    }

    pub fn field_dim(&self) -> usize {
        self.band.n()
    }

    pub fn tail_dim(&self) -> usize {
        self.tail.nrows()
    }

    pub fn dim(&self) -> usize {
        self.field_dim() + self.tail_dim()
    }

    pub fn clear(&mut self) {
        self.band.fill_zero();
        for c in &mut self.cross {
            c.clear();
        }
        self.tail.fill(0.0);
    }

    pub fn add_cross(&mut self, field_index: usize, tail_index: usize, v: f64) {
        self.cross[tail_index].push((field_index, v));
    }

    /// Adds `damping` to the full diagonal.
    pub fn damped(&self, damping: f64) -> BlockSymMatrix {
        let mut out = self.clone();
        if damping > 0.0 {
            out.band.add_diagonal(damping);
            for i in 0..out.tail.nrows() {
                out.tail[(i, i)] += damping;
            }
        }
        out
    }

    /// `y += H x` over the full symmetric matrix (used by gradient checks).
    pub fn mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        let m = self.field_dim();
        let q = self.tail_dim();
        assert_eq!(x.len(), m + q);
        assert_eq!(y.len(), m + q);
        self.band.mul_vec_add(&x[..m], &mut y[..m]);
        for (j, col) in self.cross.iter().enumerate() {
            for &(i, v) in col {
                y[i] += v * x[m + j];
                y[m + j] += v * x[i];
            }
        }
        for j in 0..q {
            for i in 0..q {
                y[m + i] += self.tail[(i, j)] * x[m + j];
            }
        }
    }

    pub fn cholesky(&self) -> Result<BlockCholesky> {
        let m = self.field_dim();
        let q = self.tail_dim();
        let band_chol = self.band.cholesky()?;

        // W = L_B^{-1} F, one forward solve per tail column; forward
        // substitution cannot create nonzeros above the first entry of F's
        // column, so the start offsets carry into the Schur product below
        let mut w = DMatrix::zeros(m, q);
        let mut starts = vec![m; q];
        for (j, col) in self.cross.iter().enumerate() {
            if col.is_empty() {
                continue;
            }
            let mut rhs = vec![0.0; m];
            let mut first = m;
            for &(i, v) in col {
                rhs[i] += v;
                first = first.min(i);
            }
            starts[j] = first;
            band_chol.forward(&mut rhs);
            w.column_mut(j).copy_from_slice(&rhs);
        }

        let mut schur = self.tail.clone();
        for a in 0..q {
            let col_a = w.column(a);
            for b in a..q {
                let lo = starts[a].max(starts[b]);
                if lo >= m {
                    continue;
                }
                let col_b = w.column(b);
                let mut dot = 0.0;
                for i in lo..m {
                    dot += col_a[i] * col_b[i];
                }
                schur[(a, b)] -= dot;
                if a != b {
                    schur[(b, a)] -= dot;
                }
            }
        }
        let schur_chol = schur.cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite("Schur complement of behavioural block".into())
        })?;

        Ok(BlockCholesky { m, q, band_chol, w, schur_chol })
    }
}

/// Factor produced by [`BlockSymMatrix::cholesky`].
pub struct BlockCholesky {
    m: usize,
    q: usize,
    band_chol: BandCholesky,
    w: DMatrix<f64>,
    schur_chol: Cholesky<f64, Dyn>,
}

impl BlockCholesky {
    pub fn dim(&self) -> usize {
        self.m + self.q
    }

    pub fn log_det(&self) -> f64 {
        let schur_l = self.schur_chol.l_dirty();
        let schur: f64 = (0..self.q).map(|i| schur_l[(i, i)].ln()).sum();
        self.band_chol.log_det() + 2.0 * schur
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.m + self.q);
        let (head, tail) = b.split_at_mut(self.m);
        // forward: y1 = L_B^{-1} b1 ; y2 = L_S^{-1} (b2 - W' y1)
        self.band_chol.forward(head);
        let y1 = DVector::from_column_slice(head);
        let mut y2 = DVector::from_column_slice(tail) - self.w.transpose() * &y1;
        self.schur_chol.l_dirty().solve_lower_triangular_mut(&mut y2);
        // backward: x2 = L_S^{-T} y2 ; x1 = L_B^{-T} (y1 - W x2)
        self.schur_chol
            .l_dirty()
            .transpose()
            .solve_upper_triangular_mut(&mut y2);
        let x1 = y1 - &self.w * &y2;
        head.copy_from_slice(x1.as_slice());
        tail.copy_from_slice(y2.as_slice());
        self.band_chol.backward(head);
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

    fn example() -> (BlockSymMatrix, DMatrix<f64>) {
        let m = 12;
        let q = 4;
        let bw = 3;
        let mut h = BlockSymMatrix::zeros(m, bw, q);
        for j in 0..m {
            h.band.add(j, j, 6.0 + (j as f64 * 0.1));
            if j + 1 < m {
                h.band.add(j + 1, j, -1.0);
            }
            if j + 3 < m {
                h.band.add(j + 3, j, 0.5);
            }
        }
        for j in 0..q {
            h.tail[(j, j)] = 5.0 + j as f64;
            if j + 1 < q {
                h.tail[(j, j + 1)] = -0.7;
                h.tail[(j + 1, j)] = -0.7;
            }
            h.add_cross(2 * j, j, 0.9);
            h.add_cross(2 * j + 1, j, -0.4);
        }
        let n = m + q;
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..m {
            for j in 0..m {
                dense[(i, j)] = h.band.get(i, j);
            }
        }
        for (j, col) in h.cross.iter().enumerate() {
            for &(i, v) in col {
                dense[(i, m + j)] += v;
                dense[(m + j, i)] += v;
            }
        }
        for i in 0..q {
            for j in 0..q {
                dense[(m + i, m + j)] = h.tail[(i, j)];
            }
        }
        (h, dense)
    }

    #[test]
    fn solve_and_logdet_match_dense() {
        let (h, dense) = example();
        let chol = h.cholesky().unwrap();
        let dense_chol = dense.clone().cholesky().unwrap();
        let expected_logdet: f64 =
            (0..dense.nrows()).map(|i| dense_chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
        assert_relative_eq!(chol.log_det(), expected_logdet, max_relative = 1e-12);

        let b: Vec<f64> = (0..dense.nrows()).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let x = chol.solve(&b);
        let xd = dense_chol.solve(&DVector::from_column_slice(&b));
        for i in 0..x.len() {
            assert_relative_eq!(x[i], xd[i], max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let (h, dense) = example();
        let x: Vec<f64> = (0..dense.nrows()).map(|i| (i as f64 * 0.73).sin()).collect();
        let mut y = vec![0.0; dense.nrows()];
        h.mul_vec_add(&x, &mut y);
        let yd = &dense * DVector::from_column_slice(&x);
        for i in 0..y.len() {
            assert_relative_eq!(y[i], yd[i], max_relative = 1e-12, epsilon = 1e-13);
        }
    }
}
