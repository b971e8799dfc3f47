//! Regular voxel/pixel grids and the cell-pair integrals shared by the Newtonian
//! and Lippmann–Schwinger discretizations.
//!
//! Cells are the squares or cubes of side `h` of a regular grid, cut by the shape
//! boundary. Matrices are written in the orthonormal basis `1_c / sqrt|c|`, so an
//! off-diagonal entry is `sqrt(|c||c'|) Phi(x_c, x_c')` (midpoint rule at the cell
//! centroids) and the matrix is symmetric for any cell sizes. Diagonal entries use
//! the exact cell-pair mean of the kernel: closed form for whole cells, the
//! equal-measure ball or disc for cut cells.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

use crate::config::{Point, ReferenceShape};
use crate::kernels::constant_e;

/// Mean of `1/|x-y|` for `x`, `y` independent and uniform in the unit cube.
pub const CUBE_MEAN_INV_DISTANCE: f64 = 1.882_312_644_389_660_2;
/// Mean of `|x-y|` over the unit cube.
pub const CUBE_MEAN_DISTANCE: f64 = 0.661_707_182_267_176_2;
/// Mean of `|x-y|^2` over the unit cube.
pub const CUBE_MEAN_SQ_DISTANCE: f64 = 0.5;
/// Mean of `log|x-y|` over the unit square.
pub const SQUARE_MEAN_LOG_DISTANCE: f64 = -0.805_086_721_950_087_2;

/// Minimum number of cells a grid must contain.
pub const MIN_CELLS: usize = 8;
/// Sub-samples per axis used to measure cut cells.
const CUT_SAMPLES_3D: usize = 8;
const CUT_SAMPLES_2D: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("resolution {resolution} yields {cells} cells, need at least {MIN_CELLS}")]
    TooCoarse { resolution: usize, cells: usize },
    #[error("resolution must be at least 2, got {0}")]
    Resolution(usize),
}

/// Cells covering a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub dim: usize,
    /// Side of the underlying grid squares/cubes.
    pub side: f64,
    /// Cell centroids.
    pub centers: Vec<Point>,
    /// Cell measures.
    pub measures: Vec<f64>,
    /// Whether each cell is a whole grid square/cube.
    pub whole: Vec<bool>,
}

impl CellGrid {
    /// Grid of `resolution` cells per side over the bounding box of `shape`, cut by
    /// the shape boundary.
    pub fn for_shape(shape: &ReferenceShape, resolution: usize) -> Result<Self, GridError> {
        if resolution < 2 {
            return Err(GridError::Resolution(resolution));
        }
        let dim = shape.dim();
        let extent = shape.side();
        let h = extent / resolution as f64;
        let c = shape.centroid();
        let full = h.powi(dim as i32);
        let coord = |i: usize, a: usize| c[a] - 0.5 * extent + (i as f64 + 0.5) * h;
        let nz = if dim == 3 { resolution } else { 1 };
        let sub = if dim == 3 { CUT_SAMPLES_3D } else { CUT_SAMPLES_2D };
        let offsets: Vec<f64> = (0..sub).map(|i| ((i as f64 + 0.5) / sub as f64 - 0.5) * h).collect();
        let mut grid = Self { dim, side: h, centers: Vec::new(), measures: Vec::new(), whole: Vec::new() };
        for i in 0..resolution {
            for j in 0..resolution {
                for l in 0..nz {
                    let p = [coord(i, 0), coord(j, 1), if dim == 3 { coord(l, 2) } else { 0.0 }];
                    if shape.kind.is_box() || cell_inside(shape, &p, h) {
                        grid.push(p, full, true);
                        continue;
                    }
                    // Cut cell: sub-sample for its measure and centroid.
                    let mut count = 0usize;
                    let mut acc = [0.0; 3];
                    let zs: &[f64] = if dim == 3 { &offsets } else { &[0.0] };
                    for ox in &offsets {
                        for oy in &offsets {
                            for oz in zs {
                                let q = [p[0] + ox, p[1] + oy, p[2] + oz];
                                if shape.contains(&q) {
                                    count += 1;
                                    for a in 0..3 {
                                        acc[a] += q[a];
                                    }
                                }
                            }
                        }
                    }
                    if count > 0 {
                        let total = sub.pow(dim as u32);
                        let n = count as f64;
                        grid.push([acc[0] / n, acc[1] / n, acc[2] / n], full * n / total as f64, count == total);
                    }
                }
            }
        }
        if grid.len() < MIN_CELLS {
            return Err(GridError::TooCoarse { resolution, cells: grid.len() });
        }
        Ok(grid)
    }

    fn push(&mut self, p: Point, m: f64, whole: bool) {
        self.centers.push(p);
        self.measures.push(m);
        self.whole.push(whole);
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Total measure.
    pub fn measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Whether every cell has the same measure.
    pub fn is_uniform(&self) -> bool {
        self.whole.iter().all(|w| *w)
    }

    /// `sqrt|c|` per cell, the weights of the orthonormal cell basis.
    pub fn sqrt_measures(&self) -> Vec<f64> {
        self.measures.iter().map(|m| m.sqrt()).collect()
    }

    /// The grid of `origin + delta * B`.
    pub fn scaled(&self, delta: f64, origin: &Point) -> Self {
        let f = delta.powi(self.dim as i32);
        Self {
            dim: self.dim,
            side: self.side * delta,
            centers: self
                .centers
                .iter()
                .map(|p| [origin[0] + delta * p[0], origin[1] + delta * p[1], origin[2] + delta * p[2]])
                .collect(),
            measures: self.measures.iter().map(|m| m * f).collect(),
            whole: self.whole.clone(),
        }
    }

    /// Laplace self entry of cell `i`.
    pub fn laplace_self_entry(&self, i: usize) -> f64 {
        if self.whole[i] {
            laplace_self_entry(self.dim, self.side)
        } else {
            laplace_self_entry_round(self.dim, self.measures[i])
        }
    }

    /// Helmholtz self entry of cell `i` with wavenumber `k`.
    pub fn helmholtz_self_entry(&self, i: usize, k: f64) -> Complex64 {
        if self.whole[i] {
            helmholtz_self_entry(self.dim, self.side, k)
        } else {
            helmholtz_self_entry_round(self.dim, self.measures[i], k)
        }
    }
}

fn cell_inside(shape: &ReferenceShape, p: &Point, h: f64) -> bool {
    // The farthest corner of the cell from the shape centroid decides.
    let c = shape.centroid();
    let dim = shape.dim();
    let far: f64 = (0..dim).map(|a| ((p[a] - c[a]).abs() + 0.5 * h).powi(2)).sum::<f64>().sqrt();
    far <= 0.5 * shape.diameter
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn equivalent_radius(dim: usize, measure: f64) -> f64 {
    if dim == 3 {
        (3.0 * measure / (4.0 * PI)).cbrt()
    } else {
        (measure / PI).sqrt()
    }
}

/// Diagonal Galerkin entry of the Laplace kernel for a whole cell of side `h`.
pub fn laplace_self_entry(dim: usize, h: f64) -> f64 {
    if dim == 3 {
        h * h * CUBE_MEAN_INV_DISTANCE / (4.0 * PI)
    } else {
        -h * h * (h.ln() + SQUARE_MEAN_LOG_DISTANCE) / (2.0 * PI)
    }
}

/// Diagonal entry for a cut cell of the given measure, using the ball (mean `1/r` is
/// `6/(5a)`) or disc (mean `log r` is `log a - 1/4`) of equal measure.
pub fn laplace_self_entry_round(dim: usize, measure: f64) -> f64 {
    let a = equivalent_radius(dim, measure);
    if dim == 3 {
        measure * 6.0 / (5.0 * a) / (4.0 * PI)
    } else {
        -measure * (a.ln() - 0.25) / (2.0 * PI)
    }
}

/// Off-diagonal Laplace entry between cells of measures `mi`, `mj` at distance `r`.
pub fn laplace_pair_entry(dim: usize, mi: f64, mj: f64, r: f64) -> f64 {
    let w = (mi * mj).sqrt();
    if dim == 3 {
        w / (4.0 * PI * r)
    } else {
        -w * r.ln() / (2.0 * PI)
    }
}

// e^{ikr}/(4 pi r) - 1/(4 pi r) = (ik - k^2 r / 2 - i k^3 r^2 / 6 + ...) / (4 pi)
fn smooth_3d(k: f64, mean_r: f64, mean_r2: f64) -> Complex64 {
    Complex64::new(-0.5 * k * k * mean_r, k - k * k * k * mean_r2 / 6.0) / (4.0 * PI)
}

/// Diagonal Galerkin entry of the Helmholtz kernel with wavenumber `k` for a whole
/// cell: the exact Laplace part plus the cell-pair mean of the smooth remainder.
pub fn helmholtz_self_entry(dim: usize, h: f64, k: f64) -> Complex64 {
    let laplace = laplace_self_entry(dim, h);
    if dim == 3 {
        laplace + h * h * h * smooth_3d(k, CUBE_MEAN_DISTANCE * h, CUBE_MEAN_SQ_DISTANCE * h * h)
    } else {
        laplace + h * h * constant_e(k).expect("positive wavenumber")
    }
}

/// Helmholtz self entry for a cut cell (equal-measure ball: mean `r` is `36a/35`,
/// mean `r^2` is `6a^2/5`).
pub fn helmholtz_self_entry_round(dim: usize, measure: f64, k: f64) -> Complex64 {
    let laplace = laplace_self_entry_round(dim, measure);
    if dim == 3 {
        let a = equivalent_radius(3, measure);
        laplace + measure * smooth_3d(k, 36.0 * a / 35.0, 1.2 * a * a)
    } else {
        laplace + measure * constant_e(k).expect("positive wavenumber")
    }
}

/// Symmetric Galerkin matrix of the Laplace kernel on `grid`, row-major.
pub fn newtonian_entries(grid: &CellGrid) -> Vec<f64> {
    let n = grid.len();
    let dim = grid.dim;
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &grid.centers[i];
            let mi = grid.measures[i];
            (i..n)
                .map(|j| {
                    if i == j {
                        grid.laplace_self_entry(i)
                    } else {
                        laplace_pair_entry(dim, mi, grid.measures[j], dist(xi, &grid.centers[j]))
                    }
                })
                .collect()
        })
        .collect();
    let mut a = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            let j = i + off;
            a[i * n + j] = *v;
            a[j * n + i] = *v;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ShapeKind;
    use crate::quadrature::gauss_legendre_on;

    /// E[1/r] over the unit cube, reduced to the difference density and split into
    /// three pyramids so the integrand is smooth.
    fn cube_mean_inv_distance(n: usize) -> f64 {
        let (x, w) = gauss_legendre_on(n, 0.0, 1.0);
        let mut s = 0.0;
        for (u, wu) in x.iter().zip(&w) {
            for (a, wa) in x.iter().zip(&w) {
                for (b, wb) in x.iter().zip(&w) {
                    s += wu * wa * wb * (1.0 - u) * (1.0 - u * a) * (1.0 - u * b) * u / (1.0 + a * a + b * b).sqrt();
                }
            }
        }
        24.0 * s
    }

    fn cube_mean_distance(n: usize) -> f64 {
        let (x, w) = gauss_legendre_on(n, 0.0, 1.0);
        let mut s = 0.0;
        for (u, wu) in x.iter().zip(&w) {
            for (a, wa) in x.iter().zip(&w) {
                for (b, wb) in x.iter().zip(&w) {
                    s += wu * wa * wb * (1.0 - u) * (1.0 - u * a) * (1.0 - u * b) * u.powi(3) * (1.0 + a * a + b * b).sqrt();
                }
            }
        }
        24.0 * s
    }

    fn square_mean_log_distance(n: usize) -> f64 {
        // Split the u integral at a geometric sequence of points to resolve u log u.
        let mut s = 0.0;
        let (xa, wa) = gauss_legendre_on(n, 0.0, 1.0);
        let mut hi: f64 = 1.0;
        for _ in 0..40 {
            let lo = hi * 0.5;
            let (xu, wu) = gauss_legendre_on(n, lo, hi);
            for (u, w1) in xu.iter().zip(&wu) {
                for (a, w2) in xa.iter().zip(&wa) {
                    s += w1 * w2 * (1.0 - u) * (1.0 - u * a) * u * (u.ln() + 0.5 * (1.0 + a * a).ln());
                }
            }
            hi = lo;
        }
        8.0 * s
    }

    #[test]
    fn self_cell_constants_match_quadrature() {
        assert!((cube_mean_inv_distance(24) - CUBE_MEAN_INV_DISTANCE).abs() < 1e-12);
        assert!((cube_mean_distance(24) - CUBE_MEAN_DISTANCE).abs() < 1e-12);
        assert!((square_mean_log_distance(24) - SQUARE_MEAN_LOG_DISTANCE).abs() < 1e-12);
        let closed = (4.0 * 2f64.ln() + 4.0 * PI - 25.0) / 12.0;
        assert!((closed - SQUARE_MEAN_LOG_DISTANCE).abs() < 1e-15);
    }

    #[test]
    fn grids_cover_shapes() {
        let cube = ReferenceShape::new(ShapeKind::Cube3d, 1.0);
        let g = CellGrid::for_shape(&cube, 4).unwrap();
        assert_eq!(g.len(), 64);
        assert!(g.is_uniform());
        assert!((g.measure() - cube.measure()).abs() < 1e-14);
        let ball = ReferenceShape::new(ShapeKind::Ball3d, 1.0);
        let g = CellGrid::for_shape(&ball, 16).unwrap();
        assert!((g.measure() / ball.measure() - 1.0).abs() < 0.005);
        assert!(!g.is_uniform());
        let disc = ReferenceShape::new(ShapeKind::Disc2d, 1.0);
        let g = CellGrid::for_shape(&disc, 20).unwrap();
        assert!((g.measure() / disc.measure() - 1.0).abs() < 0.005);
    }

    #[test]
    fn helmholtz_self_entry_reduces_to_laplace() {
        let h = 0.01;
        let e = helmholtz_self_entry(3, h, 0.0);
        assert_eq!(e.re, laplace_self_entry(3, h));
        assert_eq!(e.im, 0.0);
        let m = 1e-6;
        assert_eq!(helmholtz_self_entry_round(3, m, 0.0).re, laplace_self_entry_round(3, m));
    }

    #[test]
    fn round_self_entries_approximate_square_cells() {
        // A whole cell and its equal-measure ball/disc differ by a few percent only.
        let h: f64 = 0.1;
        let cube = laplace_self_entry(3, h);
        let ball = laplace_self_entry_round(3, h.powi(3));
        assert!((cube / ball - 1.0).abs() < 0.03);
        let sq = laplace_self_entry(2, h);
        let disc = laplace_self_entry_round(2, h * h);
        assert!((sq / disc - 1.0).abs() < 0.03);
    }
}
