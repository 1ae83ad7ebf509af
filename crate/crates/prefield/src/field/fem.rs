//! P1 finite-element matrices on a lattice mesh.
//!
//! Builds the lumped mass matrix `C~` (row sums of the consistent mass
//! matrix, kept diagonal so precision matrices stay sparse), the stiffness
//! matrix `G`, and the derived products
//!
//! ```text
//!     M0 = C~,   M1 = G,   M2 = G C~^{-1} G,   M3 = G C~^{-1} G C~^{-1} G
//! ```
//!
//! none of which depend on the field parameters.

use crate::error::{Error, Result};
use crate::field::mesh::Mesh;
use crate::linalg::band::SymBandMatrix;

/// Parameter-independent FEM matrices of a mesh.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    /// Diagonal of the lumped mass matrix `M0 = C~`.
    pub c_lumped: Vec<f64>,
    /// Stiffness matrix `M1 = G`.
    pub g: SymBandMatrix,
    /// `M2 = G C~^{-1} G`.
    pub m2: SymBandMatrix,
    /// `M3 = G C~^{-1} G C~^{-1} G`.
    pub m3: SymBandMatrix,
}

/// Assembles the P1 mass and stiffness matrices and their products.
pub fn assemble_fem(mesh: &Mesh) -> Result<FemMatrices> {
    let m = mesh.n_vertices();
    let bw = mesh.cols() + 1;
    let mut c_lumped = vec![0.0; m];
    let mut g = SymBandMatrix::zeros(m, bw);

    for (t, tri) in mesh.triangles().enumerate() {
        let (x0, y0) = mesh.vertex(tri[0]);
        let (x1, y1) = mesh.vertex(tri[1]);
        let (x2, y2) = mesh.vertex(tri[2]);
        let area = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0));
        if !(area > 0.0) || !area.is_finite() {
            return Err(Error::Mesh(format!(
                "degenerate triangle {t} (vertices {tri:?}) with area {area}"
            )));
        }
        // gradients of the barycentric basis: grad lambda_i = (b_i, c_i) / (2A)
        let b = [y1 - y2, y2 - y0, y0 - y1];
        let c = [x2 - x1, x0 - x2, x1 - x0];
        for i in 0..3 {
            c_lumped[tri[i]] += area / 3.0;
            for j in 0..=i {
                g.add(tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
            }
        }
    }

    let d_inv: Vec<f64> = c_lumped.iter().map(|&v| 1.0 / v).collect();
    let m2 = sym_banded_triple(&g, &d_inv, &g);
    let m3 = sym_banded_triple(&m2, &d_inv, &g);
    Ok(FemMatrices { c_lumped, g, m2, m3 })
}

/// `A diag(d) B` for symmetric banded `A`, `B`, assuming the product is
/// itself symmetric (true for the palindromic products used here).
fn sym_banded_triple(a: &SymBandMatrix, d: &[f64], b: &SymBandMatrix) -> SymBandMatrix {
    let n = a.n();
    let bw = a.bandwidth() + b.bandwidth();
    let mut out = SymBandMatrix::zeros(n, bw);
    for j in 0..n {
        let k_lo = j.saturating_sub(b.bandwidth());
        let k_hi = (j + b.bandwidth()).min(n - 1);
        for k in k_lo..=k_hi {
            let bkj = b.get(k, j);
            if bkj == 0.0 {
                continue;
            }
            let scaled = d[k] * bkj;
            let i_lo = k.saturating_sub(a.bandwidth()).max(j);
            let i_hi = (k + a.bandwidth()).min(n - 1);
            for i in i_lo..=i_hi {
                let aik = a.get(i, k);
                if aik != 0.0 {
                    out.add(i, j, aik * scaled);
                }
            }
        }
    }
    out
}
