//! Newtonian operator on the reference shape: Galerkin assembly, eigenpairs, the
//! scattering function `w` and the scattering coefficient `C`.
//!
//! Spectra are kept in reference units. In 3D the operator on `delta B` is exactly
//! `delta^2` times the reference one; in 2D it is `delta^2 (A_B + |log delta|/(2 pi) <., 1> 1)`,
//! so a 2D spectrum is tied to the `delta` it was computed for.

pub mod cache;
pub mod resonances;

use faer::Mat;
use std::f64::consts::PI;
use thiserror::Error;

use crate::config::{ContrastParams, Point, ReferenceShape};
use crate::grid::{newtonian_entries, CellGrid, GridError};
use crate::linalg::{eigen_residual, real_from_rows, symmetric_eigen_descending, LinalgError};

pub use resonances::*;

/// Relative gap below which a wavenumber is treated as an exact resonance.
pub const RESONANCE_GAP: f64 = 1e-14;
/// Moments with `m^2 <= MOMENT_THRESHOLD |B|` count as vanishing.
pub const MOMENT_THRESHOLD: f64 = 1e-8;
/// Accepted eigen-residual relative to the matrix norm.
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("eigensolver residual {residual:.3e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("requested {count} eigenpairs from a {cells}-cell discretization")]
    Count { count: usize, cells: usize },
    #[error("no eigenvector has a nonvanishing moment")]
    NoExcitableMode,
    #[error("resonance index {0} has a vanishing moment or is out of range")]
    ResonanceIndex(usize),
    #[error("wavenumber sits on resonance n={n} (relative gap {gap:.3e})")]
    ExactResonance { n: usize, gap: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("surface quadrature did not converge: drift {drift:.3e} between the two finest levels")]
    QuadratureDrift { drift: f64 },
    #[error("no admissible plasmonic resonance")]
    NoPlasmonicResonance,
    #[error("cache: {0}")]
    Cache(String),
}

/// Galerkin matrix of the Newtonian operator against piecewise-constant cells.
#[derive(Debug, Clone)]
pub struct NewtonianDiscretization {
    pub shape: ReferenceShape,
    pub resolution: usize,
    pub grid: CellGrid,
    pub matrix: Mat<f64>,
}

impl NewtonianDiscretization {
    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn n_cells(&self) -> usize {
        self.grid.len()
    }

    /// Assembles the operator on an arbitrary grid (for instance a scaled copy of `B`).
    pub fn on_grid(shape: ReferenceShape, resolution: usize, grid: CellGrid) -> Self {
        let n = grid.len();
        let matrix = real_from_rows(n, &newtonian_entries(&grid));
        Self { shape, resolution, grid, matrix }
    }

    /// The operator on `delta B` obtained from this reference operator through the
    /// exact scaling identity.
    pub fn scaled(&self, delta: f64) -> Self {
        let n = self.n_cells();
        let shift = if self.dim() == 2 { delta.ln().abs() / (2.0 * PI) } else { 0.0 };
        let s = self.grid.sqrt_measures();
        let d2 = delta * delta;
        let matrix = Mat::from_fn(n, n, |i, j| d2 * (self.matrix[(i, j)] + shift * s[i] * s[j]));
        Self {
            shape: self.shape.clone(),
            resolution: self.resolution,
            grid: self.grid.scaled(delta, &[0.0; 3]),
            matrix,
        }
    }
}

/// Galerkin discretization of the Newtonian operator on `shape` with `resolution`
/// cells per side of its bounding box.
pub fn assemble_newtonian(shape: &ReferenceShape, resolution: usize) -> Result<NewtonianDiscretization, SpectralError> {
    if !(shape.diameter > 0.0 && shape.diameter <= 1.0) {
        return Err(SpectralError::Invalid(format!("shape diameter {} outside (0, 1]", shape.diameter)));
    }
    let grid = CellGrid::for_shape(shape, resolution)?;
    Ok(NewtonianDiscretization::on_grid(shape.clone(), resolution, grid))
}

/// Eigenpairs of the Newtonian operator in reference units.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub dim: usize,
    /// Particle scale the spectrum belongs to; physical eigenvalues are `delta^2 * eigenvalues`.
    pub delta: f64,
    /// Descending eigenvalues in reference units.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as cell values, orthonormal in `L^2(B)`.
    pub eigenvectors: Mat<f64>,
    /// `<1, e_n>` over `B`.
    pub moments: Vec<f64>,
    /// Measure of the discretized `B`.
    pub measure: f64,
    /// Reference cell measures.
    pub cell_measures: Vec<f64>,
    /// Resonance index used for detuning.
    pub n0: usize,
    /// Largest relative eigen-residual.
    pub residual: f64,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Physical eigenvalue `lambda_n` of the operator on `delta B`.
    pub fn physical_eigenvalue(&self, n: usize) -> f64 {
        self.delta * self.delta * self.eigenvalues[n]
    }

    /// Physical squared moment `m_n^2` over `delta B`.
    pub fn physical_moment_sq(&self, n: usize) -> f64 {
        self.delta.powi(self.dim as i32) * self.moments[n] * self.moments[n]
    }

    /// `|B| - sum m_n^2`, relative to `|B|`.
    pub fn parseval_defect(&self) -> f64 {
        let s: f64 = self.moments.iter().map(|m| m * m).sum();
        (self.measure - s).abs() / self.measure
    }

    /// Whether mode `n` couples to the constant function.
    pub fn is_excitable(&self, n: usize) -> bool {
        n < self.len() && self.moments[n] * self.moments[n] > MOMENT_THRESHOLD * self.measure
    }

    /// Same spectrum reinterpreted at another scale (3D only).
    pub fn at_delta(&self, delta: f64) -> Self {
        assert_eq!(self.dim, 3, "2D spectra depend on delta; recompute with eigensystem_at");
        let mut s = self.clone();
        s.delta = delta;
        s
    }

    /// Overrides the resonance index.
    pub fn with_resonance_index(mut self, n0: usize) -> Result<Self, SpectralError> {
        if !self.is_excitable(n0) {
            return Err(SpectralError::ResonanceIndex(n0));
        }
        self.n0 = n0;
        Ok(self)
    }
}

fn spectral_from_matrix(
    matrix: &Mat<f64>,
    grid: &CellGrid,
    delta: f64,
    count: usize,
) -> Result<SpectralData, SpectralError> {
    let n = grid.len();
    if count == 0 || count > n {
        return Err(SpectralError::Count { count, cells: n });
    }
    let (values, vectors) = symmetric_eigen_descending(matrix, count)?;
    let residual = eigen_residual(matrix, &values, &vectors);
    if residual > EIGEN_RESIDUAL_TOLERANCE {
        return Err(SpectralError::Residual { residual });
    }
    let s = grid.sqrt_measures();
    let eigenvectors = Mat::from_fn(n, count, |i, j| vectors[(i, j)] / s[i]);
    let moments: Vec<f64> = (0..count)
        .map(|j| (0..n).map(|i| s[i] * vectors[(i, j)]).sum::<f64>())
        .collect();
    let measure = grid.measure();
    let n0 = (0..count)
        .find(|&j| moments[j] * moments[j] > MOMENT_THRESHOLD * measure)
        .ok_or(SpectralError::NoExcitableMode)?;
    Ok(SpectralData {
        dim: grid.dim,
        delta,
        eigenvalues: values,
        eigenvectors,
        moments,
        measure,
        cell_measures: grid.measures.clone(),
        n0,
        residual,
    })
}

/// Leading `count` eigenpairs of the discretized operator, descending, with
/// eigenvectors normalized in the cell-measure weighted inner product.
/// The data refer to the grid the discretization was assembled on (`delta = 1`).
pub fn eigensystem(disc: &NewtonianDiscretization, count: usize) -> Result<SpectralData, SpectralError> {
    spectral_from_matrix(&disc.matrix, &disc.grid, 1.0, count)
}

/// Spectrum of the operator on `delta B` in reference units, from a reference-shape
/// discretization.
pub fn eigensystem_at(disc: &NewtonianDiscretization, delta: f64, count: usize) -> Result<SpectralData, SpectralError> {
    if disc.dim() == 3 {
        return Ok(eigensystem(disc, count)?.at_delta(delta));
    }
    let n = disc.n_cells();
    let shift = delta.ln().abs() / (2.0 * PI);
    let s = disc.grid.sqrt_measures();
    let m = Mat::from_fn(n, n, |i, j| disc.matrix[(i, j)] + shift * s[i] * s[j]);
    spectral_from_matrix(&m, &disc.grid, delta, count)
}

/// Scattering coefficient, norm of `w` and the resolvent shift for one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scattering {
    /// `C = ∫_D w`.
    pub coefficient: f64,
    /// `|w|_{L^2(D)}`.
    pub w_norm: f64,
    /// `a0 / (k^2 c)` with `c` the contrast entering the resolvent.
    pub shift: f64,
    /// `k^2 c / a0`.
    pub kappa: f64,
}

/// `w = kappa (I - kappa A)^-1 1` on `delta B`, as cell values, with its integral and norm.
#[derive(Debug, Clone)]
pub struct ScatteringFunction {
    pub values: Vec<f64>,
    pub scattering: Scattering,
}

fn spectral_terms(spec: &SpectralData, contrast: f64, a0: f64, k: f64) -> Result<(f64, Vec<f64>), SpectralError> {
    if !(contrast.is_finite() && k > 0.0 && a0 > 0.0) {
        return Err(SpectralError::Invalid(format!("contrast {contrast}, k {k}, a0 {a0}")));
    }
    let d2 = spec.delta * spec.delta;
    let shift = a0 / (k * k * contrast);
    let reduced = shift / d2;
    let top = spec.eigenvalues[0].abs();
    let mut denominators = Vec::with_capacity(spec.len());
    for (n, mu) in spec.eigenvalues.iter().enumerate() {
        let gap = reduced - mu;
        if gap.abs() < RESONANCE_GAP * top {
            return Err(SpectralError::ExactResonance { n, gap: gap / top });
        }
        denominators.push(gap);
    }
    Ok((shift, denominators))
}

/// Scattering coefficient of a particle with contrast `contrast` at incident wavenumber `k`.
/// `C = sum_n m_n^2 / (a0/(k^2 c) - lambda_n)`, evaluated through the eigenpairs.
pub fn scattering_coefficient(spec: &SpectralData, contrast: f64, a0: f64, k: f64) -> Result<Scattering, SpectralError> {
    let (shift, den) = spectral_terms(spec, contrast, a0, k)?;
    if contrast == 0.0 {
        return Ok(Scattering { coefficient: 0.0, w_norm: 0.0, shift, kappa: 0.0 });
    }
    let dim = spec.dim as i32;
    let mut c = 0.0;
    let mut w2 = 0.0;
    for (m, g) in spec.moments.iter().zip(&den) {
        c += m * m / g;
        w2 += (m / g).powi(2);
    }
    let delta = spec.delta;
    Ok(Scattering {
        coefficient: delta.powi(dim - 2) * c,
        w_norm: delta.powf(0.5 * dim as f64 - 2.0) * w2.sqrt(),
        shift,
        kappa: 1.0 / shift,
    })
}

/// The scattering function `w` of particle `j` at incident wavenumber `k`.
pub fn scattering_function_w(
    spec: &SpectralData,
    contrasts: &ContrastParams,
    j: usize,
    k: f64,
    which: crate::config::CoefficientContrast,
) -> Result<ScatteringFunction, SpectralError> {
    let contrast = contrasts.coefficient_contrast(j, which);
    let scattering = scattering_coefficient(spec, contrast, contrasts.a0, k)?;
    let (_, den) = spectral_terms(spec, contrast, contrasts.a0, k)?;
    let n = spec.eigenvectors.nrows();
    if contrast == 0.0 {
        return Ok(ScatteringFunction { values: vec![0.0; n], scattering });
    }
    let inv_d2 = 1.0 / (spec.delta * spec.delta);
    let values = (0..n)
        .map(|i| inv_d2 * (0..spec.len()).map(|m| spec.moments[m] * spec.eigenvectors[(i, m)] / den[m]).sum::<f64>())
        .collect();
    Ok(ScatteringFunction { values, scattering })
}

/// Centers of the cells of particle `z + delta B`.
pub fn particle_cells(spec_grid: &CellGrid, delta: f64, z: &Point) -> CellGrid {
    spec_grid.scaled(delta, z)
}
