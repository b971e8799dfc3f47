//! Foldy–Lax point-scatterer system: assembly, direct and Born solves, and the
//! approximate scattered field.
//!
//! In 3D the coupling matrix is `B[i][j] = C_j Phi(z_i, z_j) / (1 - i k C_i f)` and the
//! right-hand side is `u^i(z_j) / (1 - i k C_j f)`, where `f` is the self-term
//! factor. In 2D `B[i][j] = Phi(z_i, z_j) C*_j` with `C* = [C^-1 - E]^-1` and the bare
//! incident values.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::config::{derive_contrasts, norm, sub, ClusterConfig, ConfigError, Point, SelfTerm};
use crate::kernels::{constant_e, green2d, green3d, KernelError};
use crate::linalg::{relative_residual, ComplexLu, LinalgError};
use crate::spectral::{scattering_coefficient, SpectralData, SpectralError};

/// Largest accepted condition estimate of `I - B`.
pub const MAX_CONDITION: f64 = 1e12;
/// Accepted relative residual of the direct solve.
pub const DIRECT_RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Field samples must lie this many particle diameters away from every center.
pub const EXCLUSION_FACTOR: f64 = 5.0;
const PARALLEL_THRESHOLD: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoldyLaxError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("1 - ikC vanishes for particle {0}")]
    SingularDenominator(usize),
    #[error("direct solve residual {residual:.3e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("evaluation point at distance {distance:.3e} from particle {particle}, inside exclusion radius {radius:.3e}")]
    Exclusion { particle: usize, distance: f64, radius: f64 },
    #[error("inconsistent system: {0}")]
    Shape(String),
}

/// Outgoing kernel in the given dimension (2D uses the first two coordinates).
pub(crate) fn phi(dim: usize, k: f64, x: &Point, y: &Point) -> Result<Complex64, KernelError> {
    if dim == 3 {
        Ok(green3d(k, x, y, false)?.value)
    } else {
        Ok(green2d(k, &[x[0], x[1]], &[y[0], y[1]], false)?.value)
    }
}

/// Plane wave `exp(i k theta . x)`.
pub fn plane_wave(k: f64, theta: &Point, x: &Point) -> Complex64 {
    Complex64::from_polar(1.0, k * (theta[0] * x[0] + theta[1] * x[1] + theta[2] * x[2]))
}

/// Immutable Foldy–Lax system.
#[derive(Debug, Clone)]
pub struct FoldyLaxSystem {
    pub dim: usize,
    /// Kernel wavenumber.
    pub k: f64,
    pub centers: Vec<Point>,
    pub direction: Point,
    /// Scattering coefficients `C_j`.
    pub coefficients: Vec<f64>,
    /// Effective coefficients: `C_j` in 3D, `[C_j^-1 - E]^-1` in 2D.
    pub cstar: Vec<Complex64>,
    /// Coupling matrix with zero diagonal.
    pub bk: Mat<Complex64>,
    pub u: Vec<Complex64>,
    /// Incident values `u^i(z_j)` before any prefactor.
    pub incident: Vec<Complex64>,
    pub norm_bk: f64,
    pub self_term: SelfTerm,
    /// Minimum distance of field samples from every center.
    pub exclusion_radius: f64,
}

fn self_factor(self_term: SelfTerm) -> f64 {
    match self_term {
        SelfTerm::Consistent => 1.0 / (4.0 * PI),
        SelfTerm::AsPrinted => 1.0,
    }
}

/// Max-row-sum norm.
pub fn row_sum_norm(b: &Mat<Complex64>) -> f64 {
    (0..b.nrows())
        .map(|i| (0..b.ncols()).map(|j| b[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Max-modulus norm used together with [`row_sum_norm`].
pub fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl FoldyLaxSystem {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Builds a system from an explicit coupling matrix and right-hand side.
    pub fn from_parts(dim: usize, k: f64, centers: Vec<Point>, cstar: Vec<Complex64>, bk: Mat<Complex64>, u: Vec<Complex64>) -> Result<Self, FoldyLaxError> {
        let m = u.len();
        if bk.nrows() != m || bk.ncols() != m || cstar.len() != m || centers.len() != m {
            return Err(FoldyLaxError::Shape(format!("{m} particles, B is {}x{}", bk.nrows(), bk.ncols())));
        }
        if (0..m).any(|i| bk[(i, i)] != Complex64::new(0.0, 0.0)) {
            return Err(FoldyLaxError::Shape("nonzero diagonal".into()));
        }
        Ok(Self {
            dim,
            k,
            centers,
            direction: [0.0; 3],
            coefficients: cstar.iter().map(|c| c.re).collect(),
            cstar,
            norm_bk: row_sum_norm(&bk),
            bk,
            incident: u.clone(),
            u,
            self_term: SelfTerm::Consistent,
            exclusion_radius: 0.0,
        })
    }

    /// Same system with particles relabeled: particle `i` of the result is `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut s = self.clone();
        s.centers = perm.iter().map(|&p| self.centers[p]).collect();
        s.coefficients = perm.iter().map(|&p| self.coefficients[p]).collect();
        s.cstar = perm.iter().map(|&p| self.cstar[p]).collect();
        s.u = perm.iter().map(|&p| self.u[p]).collect();
        s.incident = perm.iter().map(|&p| self.incident[p]).collect();
        s.bk = Mat::from_fn(perm.len(), perm.len(), |i, j| self.bk[(perm[i], perm[j])]);
        s
    }
}

/// Scattering coefficients of every particle of `cfg` at incident wavenumber `k`.
pub fn particle_coefficients(cfg: &ClusterConfig, spec: &SpectralData, k: f64) -> Result<Vec<f64>, FoldyLaxError> {
    let contrasts = derive_contrasts(cfg)?;
    (0..cfg.particle_count())
        .map(|j| {
            let c = contrasts.coefficient_contrast(j, cfg.model.coefficient_contrast);
            Ok(scattering_coefficient(spec, c, contrasts.a0, k)?.coefficient)
        })
        .collect()
}

/// Assembles the system for `cfg` at incident wavenumber `k`.
pub fn assemble(cfg: &ClusterConfig, spec: &SpectralData, k: f64) -> Result<FoldyLaxSystem, FoldyLaxError> {
    let coefficients = particle_coefficients(cfg, spec, k)?;
    assemble_with_coefficients(cfg, k, &coefficients)
}

/// Assembles the system for `cfg` with given scattering coefficients.
pub fn assemble_with_coefficients(cfg: &ClusterConfig, k: f64, coefficients: &[f64]) -> Result<FoldyLaxSystem, FoldyLaxError> {
    let dim = cfg.dim;
    let k_eff = k * cfg.background.wavenumber_factor();
    let centers = cfg.center_points();
    let m = centers.len();
    if coefficients.len() != m {
        return Err(FoldyLaxError::Shape(format!("{} coefficients for {m} particles", coefficients.len())));
    }
    let theta = cfg.direction();
    let incident: Vec<Complex64> = centers.iter().map(|z| plane_wave(k_eff, &theta, z)).collect();

    let (cstar, row_scale, u) = if dim == 3 {
        let f = self_factor(cfg.model.self_term);
        let mut denominators = Vec::with_capacity(m);
        for (j, c) in coefficients.iter().enumerate() {
            let d = Complex64::new(1.0, -k_eff * c * f);
            if d.norm() == 0.0 || !d.re.is_finite() {
                return Err(FoldyLaxError::SingularDenominator(j));
            }
            denominators.push(d);
        }
        let cstar: Vec<Complex64> = coefficients.iter().map(|c| Complex64::new(*c, 0.0)).collect();
        let scale: Vec<Complex64> = denominators.iter().map(|d| d.inv()).collect();
        let u = incident.iter().zip(&scale).map(|(a, s)| a * s).collect();
        (cstar, scale, u)
    } else {
        let e = constant_e(k_eff)?;
        let cstar = coefficients
            .iter()
            .map(|c| if *c == 0.0 { Complex64::new(0.0, 0.0) } else { (Complex64::new(1.0 / c, 0.0) - e).inv() })
            .collect();
        (cstar, vec![Complex64::new(1.0, 0.0); m], incident.clone())
    };

    let entry = |i: usize, j: usize| -> Result<Complex64, KernelError> {
        if i == j {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(row_scale[i] * phi(dim, k_eff, &centers[i], &centers[j])? * cstar[j])
    };
    let rows: Vec<Vec<Complex64>> = if m >= PARALLEL_THRESHOLD {
        (0..m).into_par_iter().map(|i| (0..m).map(|j| entry(i, j)).collect::<Result<_, _>>()).collect::<Result<_, _>>()?
    } else {
        (0..m).map(|i| (0..m).map(|j| entry(i, j)).collect::<Result<_, _>>()).collect::<Result<_, _>>()?
    };
    let bk = Mat::from_fn(m, m, |i, j| rows[i][j]);
    if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(FoldyLaxError::Shape("non-finite coupling entry".into()));
    }
    Ok(FoldyLaxSystem {
        dim,
        k: k_eff,
        centers,
        direction: theta,
        coefficients: coefficients.to_vec(),
        cstar,
        norm_bk: row_sum_norm(&bk),
        bk,
        u,
        incident,
        self_term: cfg.model.self_term,
        exclusion_radius: EXCLUSION_FACTOR * cfg.delta * cfg.shape.diameter,
    })
}

/// Which analytic statement the invertibility predicate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvertibilityCase {
    SingleParticle,
    /// `1 - h - t > 0` (3D).
    Subcritical,
    /// `1 - h - t = 0` (3D), decided by the coefficient-distance sum.
    Critical,
    /// `1 - h - t < 0` (3D).
    Supercritical,
    /// `d > exp(-|log delta|^(1-h))` (2D).
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityReport {
    pub norm_bk: f64,
    pub exponent: f64,
    pub case: InvertibilityCase,
    /// Analytic prediction that `|B| < 1`.
    pub predicted: bool,
    pub numeric: bool,
    pub agrees: bool,
    /// In 3D the right-hand side carries the `(1 - ikC)^-1` prefactor; in 2D it does not.
    pub prefactored_rhs: bool,
}

/// Compares the measured `|B|` with the analytic invertibility predicate at detuning `h`
/// and dilution `t`.
pub fn check_invertibility(sys: &FoldyLaxSystem, cfg: &ClusterConfig, h: f64, t: f64) -> InvertibilityReport {
    let exponent = 1.0 - h - t;
    let (case, predicted) = if sys.len() <= 1 {
        (InvertibilityCase::SingleParticle, true)
    } else if sys.dim == 3 {
        if exponent.abs() < 1e-12 {
            let worst = (0..sys.len())
                .map(|i| {
                    (0..sys.len())
                        .filter(|&j| j != i)
                        .map(|j| sys.coefficients[j].abs() / (4.0 * PI * norm(&sub(&sys.centers[i], &sys.centers[j]))))
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            (InvertibilityCase::Critical, worst < 1.0)
        } else if exponent > 0.0 {
            (InvertibilityCase::Subcritical, true)
        } else {
            (InvertibilityCase::Supercritical, false)
        }
    } else {
        let d = cfg.min_distance().unwrap_or(f64::INFINITY);
        let threshold = (-cfg.delta.ln().abs().powf(1.0 - h)).exp();
        (InvertibilityCase::Logarithmic, d > threshold)
    };
    let numeric = sys.norm_bk < 1.0;
    InvertibilityReport {
        norm_bk: sys.norm_bk,
        exponent,
        case,
        predicted,
        numeric,
        agrees: predicted == numeric,
        prefactored_rhs: sys.dim == 3,
    }
}

/// Whether the truncated Born expansion of order `n` is covered by the error estimate:
/// 3D `0 <= 1-h-t <= min(1/(n+1), (1-t)/n)`, 2D `1-t-h > 0`.
pub fn born_order_condition(dim: usize, h: f64, t: f64, n: usize) -> bool {
    let e = 1.0 - h - t;
    if dim == 3 {
        let cap = if n == 0 { 1.0 } else { (1.0 / (n + 1) as f64).min((1.0 - t) / n as f64) };
        e >= -1e-12 && e <= cap + 1e-12
    } else {
        e > 0.0
    }
}

/// Whether the full (direct) Foldy–Lax error estimate applies:
/// 3D `1-h-t >= 0`, 2D `1-t-h >= 0`.
pub fn direct_condition(h: f64, t: f64) -> bool {
    1.0 - h - t >= -1e-12
}

/// Solution of `(I - B) Q = U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectSolution {
    pub q: Vec<Complex64>,
    pub condition: f64,
    pub residual: f64,
}

pub fn solve_direct(sys: &FoldyLaxSystem) -> Result<DirectSolution, FoldyLaxError> {
    let m = sys.len();
    let a = Mat::from_fn(m, m, |i, j| if i == j { Complex64::new(1.0, 0.0) - sys.bk[(i, j)] } else { -sys.bk[(i, j)] });
    let lu = ComplexLu::new(&a);
    if !(lu.condition < MAX_CONDITION) {
        return Err(LinalgError::IllConditioned { condition: lu.condition }.into());
    }
    let q = lu.solve(&sys.u);
    if q.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite.into());
    }
    let residual = relative_residual(&a, &q, &sys.u);
    if residual > DIRECT_RESIDUAL_TOLERANCE {
        return Err(FoldyLaxError::Residual { residual });
    }
    Ok(DirectSolution { q, condition: lu.condition, residual })
}

/// Partial sums `Q^N = sum_{n<=N} B^n U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornSeries {
    pub partial_sums: Vec<Vec<Complex64>>,
    /// `B^N U`, so that `Q^N - Q^{N-1} = terms[N]`.
    pub terms: Vec<Vec<Complex64>>,
    /// Whether `|B| < 1`.
    pub converged: bool,
    pub norm_bk: f64,
}

impl BornSeries {
    /// Geometric bound `|B|^{N+1} / (1 - |B|) |U|` on `|Q^N - Q|`, if `|B| < 1`.
    pub fn bound(&self, n: usize) -> Option<f64> {
        let u = max_norm(&self.terms[0]);
        self.converged.then(|| self.norm_bk.powi(n as i32 + 1) / (1.0 - self.norm_bk) * u)
    }
}

fn mat_vec(b: &Mat<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..b.nrows())
        .map(|i| (0..b.ncols()).map(|j| b[(i, j)] * v[j]).sum())
        .collect()
}

pub fn solve_born(sys: &FoldyLaxSystem, n_max: usize) -> BornSeries {
    let mut terms = vec![sys.u.clone()];
    let mut partial_sums = vec![sys.u.clone()];
    for n in 1..=n_max {
        let next = mat_vec(&sys.bk, &terms[n - 1]);
        let sum = partial_sums[n - 1].iter().zip(&next).map(|(a, b)| a + b).collect();
        terms.push(next);
        partial_sums.push(sum);
    }
    BornSeries { partial_sums, terms, converged: sys.norm_bk < 1.0, norm_bk: sys.norm_bk }
}

/// Direct and Born solutions together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub direct: Option<DirectSolution>,
    pub direct_error: Option<String>,
    pub born: BornSeries,
}

pub fn solve(sys: &FoldyLaxSystem, n_max: usize) -> SolveResult {
    let (direct, direct_error) = match solve_direct(sys) {
        Ok(d) => (Some(d), None),
        Err(e) => (None, Some(e.to_string())),
    };
    SolveResult { direct, direct_error, born: solve_born(sys, n_max) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "snake_case")]
pub enum FieldVariant {
    FlDirect,
    FlBorn(usize),
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x: Point,
    pub value: Complex64,
    pub variant: FieldVariant,
}

fn check_exclusion(sys: &FoldyLaxSystem, x: &Point) -> Result<(), FoldyLaxError> {
    for (particle, z) in sys.centers.iter().enumerate() {
        let distance = norm(&sub(x, z));
        if distance < sys.exclusion_radius || distance == 0.0 {
            return Err(FoldyLaxError::Exclusion { particle, distance, radius: sys.exclusion_radius });
        }
    }
    Ok(())
}

/// `sum_j Phi(x, z_j) C*_j Q_j`.
pub fn scattered_field(sys: &FoldyLaxSystem, q: &[Complex64], x: &Point) -> Result<Complex64, FoldyLaxError> {
    check_exclusion(sys, x)?;
    let mut s = Complex64::new(0.0, 0.0);
    for ((z, c), qj) in sys.centers.iter().zip(&sys.cstar).zip(q) {
        s += phi(sys.dim, sys.k, x, z)? * c * qj;
    }
    Ok(s)
}

pub fn field_sample(sys: &FoldyLaxSystem, q: &[Complex64], x: &Point, variant: FieldVariant) -> Result<FieldSample, FoldyLaxError> {
    Ok(FieldSample { x: *x, value: scattered_field(sys, q, x)?, variant })
}

/// Born fields `u^{s,N}(x)` and increments `u^{s,N} - u^{s,N-1}` (`increments[0] = fields[0]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionLadder {
    pub fields: Vec<Complex64>,
    pub increments: Vec<Complex64>,
}

pub fn interaction_ladder(sys: &FoldyLaxSystem, born: &BornSeries, x: &Point) -> Result<InteractionLadder, FoldyLaxError> {
    check_exclusion(sys, x)?;
    let weights: Vec<Complex64> = sys
        .centers
        .iter()
        .zip(&sys.cstar)
        .map(|(z, c)| Ok(phi(sys.dim, sys.k, x, z)? * c))
        .collect::<Result<_, KernelError>>()?;
    let dot = |v: &[Complex64]| weights.iter().zip(v).map(|(w, q)| w * q).sum::<Complex64>();
    let increments: Vec<Complex64> = born.terms.iter().map(|t| dot(t)).collect();
    let fields = born.partial_sums.iter().map(|q| dot(q)).collect();
    Ok(InteractionLadder { fields, increments })
}

/// Converts a volume integral of the total field over particle `j` into the
/// Foldy–Lax amplitude: `Q_j = kappa_j ∫ v / C_j`.
pub fn q_from_volume_integral(kappa: f64, integral: Complex64, coefficient: f64) -> Complex64 {
    integral * kappa / coefficient
}
