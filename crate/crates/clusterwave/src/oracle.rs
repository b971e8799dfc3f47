//! Dense Lippmann–Schwinger reference solver over every cell of every particle.
//!
//! Unknowns are coordinates of the total field in the orthonormal cell basis
//! `1_c / sqrt|c|`; the system reads
//! `v_a - sum_b kappa_b <phi_a, Phi_k phi_b> v_b = sqrt|a| u^i(x_a)`.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{derive_contrasts, norm, sub, ClusterConfig, ConfigError, Point};
use crate::foldylax::{phi, plane_wave};
use crate::grid::{CellGrid, GridError};
use crate::kernels::KernelError;
use crate::linalg::{relative_residual, ComplexLu, LinalgError};

/// Largest number of unknowns accepted by [`solve_lse`].
pub const MAX_UNKNOWNS: usize = 20_000;
/// Minimum number of cells per particle.
pub const MIN_CELLS_PER_PARTICLE: usize = 64;
pub const LSE_RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Condition estimates above this are reported as a near-resonant system.
pub const LSE_MAX_CONDITION: f64 = 1e13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("the volume solver needs a1 = a0 (alpha = {alpha})")]
    NonzeroAlpha { alpha: f64 },
    #[error("{cells} cells per particle, at least {min} required")]
    TooFewCells { cells: usize, min: usize },
    #[error("{unknowns} unknowns exceed the cap of {cap}")]
    TooLarge { unknowns: usize, cap: usize },
    #[error("residual {residual:.3e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("evaluation point lies within particle {particle}")]
    InsideParticle { particle: usize },
}

/// Total field on every cell.
#[derive(Debug, Clone)]
pub struct LseSolution {
    pub dim: usize,
    /// Kernel wavenumber.
    pub k: f64,
    pub centers: Vec<Point>,
    pub measures: Vec<f64>,
    /// `kappa` of the particle owning each cell.
    pub kappa: Vec<f64>,
    /// Range of cell indices owned by each particle.
    pub ranges: Vec<std::ops::Range<usize>>,
    /// Cell values of the total field.
    pub v: Vec<Complex64>,
    pub residual: f64,
    pub condition: f64,
    /// Particle centers and the radius of a ball containing each particle.
    pub particle_centers: Vec<Point>,
    pub particle_radius: f64,
}

impl LseSolution {
    pub fn unknowns(&self) -> usize {
        self.v.len()
    }

    /// `∫_{D_j} v`.
    pub fn volume_integral(&self, j: usize) -> Complex64 {
        self.ranges[j].clone().map(|c| self.v[c] * self.measures[c]).sum()
    }

    /// `|v|_{L^2(D_j)}`.
    pub fn particle_norm(&self, j: usize) -> f64 {
        self.ranges[j].clone().map(|c| self.v[c].norm_sqr() * self.measures[c]).sum::<f64>().sqrt()
    }
}

/// Cells of all particles of `cfg` at the given reference resolution.
pub fn cluster_cells(cfg: &ClusterConfig, resolution: usize) -> Result<(CellGrid, Vec<CellGrid>), OracleError> {
    let reference = CellGrid::for_shape(&cfg.shape, resolution)?;
    let parts = cfg.center_points().iter().map(|z| reference.scaled(cfg.delta, z)).collect();
    Ok((reference, parts))
}

/// Assembled cell system: kernel matrix `S` in the orthonormal cell basis,
/// per-cell `kappa` and the incident right-hand side.
#[derive(Debug, Clone)]
pub struct LseSystem {
    pub dim: usize,
    /// Kernel wavenumber.
    pub k: f64,
    pub centers: Vec<Point>,
    pub measures: Vec<f64>,
    pub kappa: Vec<f64>,
    pub ranges: Vec<std::ops::Range<usize>>,
    /// `S_ab = <phi_a, Phi_k phi_b>`, complex symmetric.
    pub kernel: Mat<Complex64>,
    /// `sqrt|a| u^i(x_a)`.
    pub rhs: Vec<Complex64>,
    pub particle_centers: Vec<Point>,
    pub particle_radius: f64,
}

impl LseSystem {
    pub fn unknowns(&self) -> usize {
        self.centers.len()
    }

    /// `I - S diag(kappa)`.
    pub fn operator(&self) -> Mat<Complex64> {
        let n = self.unknowns();
        Mat::from_fn(n, n, |a, b| {
            let identity = if a == b { 1.0 } else { 0.0 };
            Complex64::new(identity, 0.0) - self.kappa[b] * self.kernel[(a, b)]
        })
    }

    /// Solves for the incident right-hand side.
    pub fn solve(&self) -> Result<LseSolution, OracleError> {
        self.solve_with(&self.rhs)
    }

    /// Solves with right-hand side `rhs` given in basis coordinates.
    pub fn solve_with(&self, rhs: &[Complex64]) -> Result<LseSolution, OracleError> {
        let matrix = self.operator();
        let lu = ComplexLu::new(&matrix);
        if !(lu.condition < LSE_MAX_CONDITION) {
            return Err(LinalgError::IllConditioned { condition: lu.condition }.into());
        }
        let coords = lu.solve(rhs);
        if coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite.into());
        }
        let residual = relative_residual(&matrix, &coords, rhs);
        if residual > LSE_RESIDUAL_TOLERANCE {
            return Err(OracleError::Residual { residual });
        }
        let v = coords.iter().zip(&self.measures).map(|(c, m)| c / m.sqrt()).collect();
        Ok(LseSolution {
            dim: self.dim,
            k: self.k,
            centers: self.centers.clone(),
            measures: self.measures.clone(),
            kappa: self.kappa.clone(),
            ranges: self.ranges.clone(),
            v,
            residual,
            condition: lu.condition,
            particle_centers: self.particle_centers.clone(),
            particle_radius: self.particle_radius,
        })
    }
}

/// Assembles the cell system for `cfg` at incident wavenumber `k`.
pub fn assemble_lse(cfg: &ClusterConfig, k: f64, resolution: usize) -> Result<LseSystem, OracleError> {
    let contrasts = derive_contrasts(cfg)?;
    if contrasts.alpha != 0.0 {
        return Err(OracleError::NonzeroAlpha { alpha: contrasts.alpha });
    }
    let (reference, parts) = cluster_cells(cfg, resolution)?;
    if reference.len() < MIN_CELLS_PER_PARTICLE {
        return Err(OracleError::TooFewCells { cells: reference.len(), min: MIN_CELLS_PER_PARTICLE });
    }
    let unknowns = reference.len() * parts.len();
    if unknowns > MAX_UNKNOWNS {
        return Err(OracleError::TooLarge { unknowns, cap: MAX_UNKNOWNS });
    }
    let k_eff = k * cfg.background.wavenumber_factor();
    let dim = cfg.dim;
    let theta = cfg.direction();

    let mut centers = Vec::with_capacity(unknowns);
    let mut measures = Vec::with_capacity(unknowns);
    let mut kappa = Vec::with_capacity(unknowns);
    let mut whole = Vec::with_capacity(unknowns);
    let mut ranges = Vec::with_capacity(parts.len());
    for (j, grid) in parts.iter().enumerate() {
        let contrast = contrasts.coefficient_contrast(j, cfg.model.coefficient_contrast);
        let start = centers.len();
        centers.extend_from_slice(&grid.centers);
        measures.extend_from_slice(&grid.measures);
        whole.extend((0..grid.len()).map(|i| (j, i)));
        kappa.extend(std::iter::repeat(k * k * contrast / contrasts.a0).take(grid.len()));
        ranges.push(start..centers.len());
    }
    let sqrt_m: Vec<f64> = measures.iter().map(|m| m.sqrt()).collect();

    let rows: Vec<Vec<Complex64>> = (0..unknowns)
        .into_par_iter()
        .map(|a| {
            (0..unknowns)
                .map(|b| {
                    if a == b {
                        let (j, i) = whole[a];
                        Ok(parts[j].helmholtz_self_entry(i, k_eff))
                    } else {
                        Ok(sqrt_m[a] * sqrt_m[b] * phi(dim, k_eff, &centers[a], &centers[b])?)
                    }
                })
                .collect::<Result<Vec<_>, KernelError>>()
        })
        .collect::<Result<_, _>>()?;
    let kernel = Mat::from_fn(unknowns, unknowns, |a, b| rows[a][b]);
    drop(rows);
    let rhs = (0..unknowns).map(|a| sqrt_m[a] * plane_wave(k_eff, &theta, &centers[a])).collect();
    Ok(LseSystem {
        dim,
        k: k_eff,
        centers,
        measures,
        kappa,
        ranges,
        kernel,
        rhs,
        particle_centers: cfg.center_points(),
        particle_radius: cfg.delta * cfg.shape.diameter,
    })
}

/// Solves the volume integral equation for `cfg` at incident wavenumber `k`.
pub fn solve_lse(cfg: &ClusterConfig, k: f64, resolution: usize) -> Result<LseSolution, OracleError> {
    assemble_lse(cfg, k, resolution)?.solve()
}

/// `u^s(x) = sum_c kappa_c |c| Phi(x, x_c) v_c`.
pub fn oracle_scattered_field(sol: &LseSolution, x: &Point) -> Result<Complex64, OracleError> {
    for (particle, z) in sol.particle_centers.iter().enumerate() {
        if norm(&sub(x, z)) <= sol.particle_radius {
            return Err(OracleError::InsideParticle { particle });
        }
    }
    let mut s = Complex64::new(0.0, 0.0);
    for c in 0..sol.unknowns() {
        s += sol.kappa[c] * sol.measures[c] * phi(sol.dim, sol.k, x, &sol.centers[c])? * sol.v[c];
    }
    Ok(s)
}

/// Amplification `|v|_{L^2(D_j)} / |u^i|_{L^2(D_j)}` per particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriDiagnostics {
    pub ratios: Vec<f64>,
}

impl AprioriDiagnostics {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

pub fn apriori_diagnostics(sol: &LseSolution, theta: &Point) -> AprioriDiagnostics {
    let ratios = sol
        .ranges
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let ui: f64 = r
                .clone()
                .map(|c| plane_wave(sol.k, theta, &sol.centers[c]).norm_sqr() * sol.measures[c])
                .sum::<f64>()
                .sqrt();
            sol.particle_norm(j) / ui
        })
        .collect();
    AprioriDiagnostics { ratios }
}
