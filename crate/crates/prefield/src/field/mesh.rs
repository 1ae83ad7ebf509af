//! Structured lattice meshes of right triangles.
//!
//! Fields are discretised on regular lattices, each cell split along its
//! SW-NE diagonal into two triangles. Row-major vertex ordering gives
//! precision matrices a small bandwidth, and point location is O(1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let r = Rect { x_min, x_max, y_min, y_max };
        if !(r.width() > 0.0) || !(r.height() > 0.0) {
            return Err(Error::Mesh(format!(
                "degenerate domain: width {}, height {}",
                r.width(),
                r.height()
            )));
        }
        Ok(r)
    }

    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        Rect::new(lo, hi, lo, hi)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    fn expand(&self, by_x: f64, by_y: f64) -> Rect {
        Rect {
            x_min: self.x_min - by_x,
            x_max: self.x_max + by_x,
            y_min: self.y_min - by_y,
            y_max: self.y_max + by_y,
        }
    }
}

/// Triangulated lattice over a rectangle.
///
/// The mesh may extend beyond the declared core domain by a margin of whole
/// cells; the extension absorbs boundary effects of the precision operator
/// and is never a prediction target.
#[derive(Debug, Clone)]
pub struct Mesh {
    rect: Rect,
    core: Rect,
    rows: usize,
    cols: usize,
    margin_cells: usize,
    hx: f64,
    hy: f64,
}

impl Mesh {
    /// Regular lattice with `rows x cols` vertices covering `rect` exactly.
    pub fn lattice(rect: Rect, rows: usize, cols: usize) -> Result<Mesh> {
        if rows < 2 || cols < 2 {
            return Err(Error::Mesh(format!("lattice needs rows, cols >= 2, got {rows}x{cols}")));
        }
        let hx = rect.width() / (cols - 1) as f64;
        let hy = rect.height() / (rows - 1) as f64;
        if !(hx > 0.0 && hx.is_finite() && hy > 0.0 && hy.is_finite()) {
            return Err(Error::Mesh("degenerate lattice spacing".into()));
        }
        Ok(Mesh { rect, core: rect, rows, cols, margin_cells: 0, hx, hy })
    }

    /// Lattice whose core `rows x cols` grid covers `core`, extended on every
    /// side by enough whole cells (at the core spacing) to cover `margin`.
    pub fn lattice_with_margin(core: Rect, rows: usize, cols: usize, margin: f64) -> Result<Mesh> {
        if margin < 0.0 || !margin.is_finite() {
            return Err(Error::Mesh(format!("invalid margin {margin}")));
        }
        let base = Mesh::lattice(core, rows, cols)?;
        if margin == 0.0 {
            return Ok(base);
        }
        let extra_x = (margin / base.hx - 1e-9).ceil() as usize;
        let extra_y = (margin / base.hy - 1e-9).ceil() as usize;
        Mesh::lattice_with_margin_cells(core, rows, cols, extra_x.max(extra_y))
    }

    /// Like [`Mesh::lattice_with_margin`] with the extension given directly
    /// in whole cells (exact, so meshes round-trip through serialization).
    pub fn lattice_with_margin_cells(
        core: Rect,
        rows: usize,
        cols: usize,
        cells: usize,
    ) -> Result<Mesh> {
        let base = Mesh::lattice(core, rows, cols)?;
        if cells == 0 {
            return Ok(base);
        }
        let rect = core.expand(cells as f64 * base.hx, cells as f64 * base.hy);
        Ok(Mesh {
            rect,
            core,
            rows: rows + 2 * cells,
            cols: cols + 2 * cells,
            margin_cells: cells,
            hx: base.hx,
            hy: base.hy,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_vertices(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_triangles(&self) -> usize {
        2 * (self.rows - 1) * (self.cols - 1)
    }

    /// Full covered rectangle (core plus margin).
    pub fn rect(&self) -> Rect {
        self.rect
    }

    /// Declared core domain.
    pub fn core(&self) -> Rect {
        self.core
    }

    pub fn margin_cells(&self) -> usize {
        self.margin_cells
    }

    pub fn cell_width(&self) -> f64 {
        self.hx
    }

    pub fn cell_height(&self) -> f64 {
        self.hy
    }

    pub fn vertex(&self, index: usize) -> (f64, f64) {
        let r = index / self.cols;
        let c = index % self.cols;
        (self.rect.x_min + c as f64 * self.hx, self.rect.y_min + r as f64 * self.hy)
    }

    pub fn vertex_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Vertex triples of triangle `t`, counter-clockwise.
    pub fn triangle(&self, t: usize) -> [usize; 3] {
        let cell = t / 2;
        let r = cell / (self.cols - 1);
        let c = cell % (self.cols - 1);
        let v00 = self.vertex_index(r, c);
        let v10 = v00 + 1;
        let v01 = v00 + self.cols;
        let v11 = v01 + 1;
        if t % 2 == 0 {
            [v00, v10, v11]
        } else {
            [v00, v11, v01]
        }
    }

    pub fn triangles(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.n_triangles()).map(move |t| self.triangle(t))
    }

    /// Indices of vertices lying inside (or on the boundary of) the core domain.
    pub fn core_vertices(&self) -> Vec<usize> {
        let eps = 1e-9 * self.hx.max(self.hy);
        (0..self.n_vertices())
            .filter(|&i| {
                let (x, y) = self.vertex(i);
                x >= self.core.x_min - eps
                    && x <= self.core.x_max + eps
                    && y >= self.core.y_min - eps
                    && y <= self.core.y_max + eps
            })
            .collect()
    }

    /// Vertices strictly inside the core domain (boundary excluded); the
    /// margin and the core boundary both feel the Neumann edge of the
    /// precision operator.
    pub fn interior_vertices(&self) -> Vec<usize> {
        let eps = 1e-9 * self.hx.max(self.hy);
        (0..self.n_vertices())
            .filter(|&i| {
                let (x, y) = self.vertex(i);
                x > self.core.x_min + eps
                    && x < self.core.x_max - eps
                    && y > self.core.y_min + eps
                    && y < self.core.y_max - eps
            })
            .collect()
    }

    /// Vertex index closest to the centre of the covered rectangle.
    pub fn central_vertex(&self) -> usize {
        let (cx, cy) = self.rect.center();
        let c = ((cx - self.rect.x_min) / self.hx).round() as usize;
        let r = ((cy - self.rect.y_min) / self.hy).round() as usize;
        self.vertex_index(r.min(self.rows - 1), c.min(self.cols - 1))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let eps_x = 1e-9 * self.hx;
        let eps_y = 1e-9 * self.hy;
        x >= self.rect.x_min - eps_x
            && x <= self.rect.x_max + eps_x
            && y >= self.rect.y_min - eps_y
            && y <= self.rect.y_max + eps_y
    }

    /// Barycentric interpolation weights of the triangle containing `(x, y)`.
    ///
    /// Returns the three vertex indices with their weights. Points outside
    /// the covered rectangle are an extrapolation error.
    pub fn interp_weights(&self, x: f64, y: f64) -> Result<([usize; 3], [f64; 3])> {
        if !self.contains(x, y) || !x.is_finite() || !y.is_finite() {
            return Err(Error::OutsideHull { x, y });
        }
        let fx = ((x - self.rect.x_min) / self.hx).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((y - self.rect.y_min) / self.hy).clamp(0.0, (self.rows - 1) as f64);
        let c = (fx.floor() as usize).min(self.cols - 2);
        let r = (fy.floor() as usize).min(self.rows - 2);
        let u = (fx - c as f64).clamp(0.0, 1.0);
        let v = (fy - r as f64).clamp(0.0, 1.0);
        let v00 = self.vertex_index(r, c);
        let v10 = v00 + 1;
        let v01 = v00 + self.cols;
        let v11 = v01 + 1;
        if u >= v {
            Ok(([v00, v10, v11], [1.0 - u, u - v, v]))
        } else {
            Ok(([v00, v11, v01], [1.0 - v, u, v - u]))
        }
    }

    /// Sparse weights of the central-difference gradient of the interpolant
    /// at `(x, y)` with step `h`: two linear functionals over vertex values.
    pub fn gradient_stencil(&self, x: f64, y: f64, h: f64) -> Result<GradientStencil> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("gradient step h = {h}")));
        }
        let mut stencil = GradientStencil::default();
        let half = 0.5 / h;
        for (p, sign, comp) in [
            ((x + h, y), half, 0),
            ((x - h, y), -half, 0),
            ((x, y + h), half, 1),
            ((x, y - h), -half, 1),
        ] {
            let (idx, w) = self.interp_weights(p.0, p.1)?;
            let target = if comp == 0 { &mut stencil.gx } else { &mut stencil.gy };
            for k in 0..3 {
                if w[k] != 0.0 {
                    push_merged(target, idx[k], sign * w[k]);
                }
            }
        }
        Ok(stencil)
    }
}

/// Sparse representation of the two gradient components at a point.
#[derive(Debug, Clone, Default)]
pub struct GradientStencil {
    /// (vertex, weight) pairs for d/dx
    pub gx: Vec<(usize, f64)>,
    /// (vertex, weight) pairs for d/dy
    pub gy: Vec<(usize, f64)>,
}

impl GradientStencil {
    pub fn apply(&self, values: &[f64]) -> (f64, f64) {
        let gx = self.gx.iter().map(|&(i, w)| w * values[i]).sum();
        let gy = self.gy.iter().map(|&(i, w)| w * values[i]).sum();
        (gx, gy)
    }

    /// All vertices referenced by either component.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> =
            self.gx.iter().chain(self.gy.iter()).map(|&(i, _)| i).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

fn push_merged(target: &mut Vec<(usize, f64)>, idx: usize, w: f64) {
    for entry in target.iter_mut() {
        if entry.0 == idx {
            entry.1 += w;
            return;
        }
    }
    target.push((idx, w));
}
