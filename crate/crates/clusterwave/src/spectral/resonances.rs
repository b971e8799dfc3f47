//! Dielectric, Minnaert and plasmonic resonances, and the detuned incident wavenumber.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{SpectralData, SpectralError};
use crate::config::{ClusterConfig, ContrastParams, Point};
use crate::quadrature::gauss_legendre;

/// A dielectric resonance `k_n = sqrt(a0 / (gamma lambda_n))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricResonance {
    pub index: usize,
    /// Physical eigenvalue `lambda_n` on `delta B`.
    pub eigenvalue: f64,
    pub k: f64,
}

/// Dielectric resonances of the excitable modes among the first `count` eigenpairs.
pub fn dielectric_resonances(spec: &SpectralData, contrasts: &ContrastParams, count: usize) -> Result<Vec<DielectricResonance>, SpectralError> {
    let gamma = contrasts.gamma[0];
    let out: Vec<DielectricResonance> = (0..count.min(spec.len()))
        .filter(|&n| spec.is_excitable(n))
        .filter_map(|n| {
            let lambda = spec.physical_eigenvalue(n);
            let k2 = contrasts.a0 / (gamma * lambda);
            (k2 > 0.0).then(|| DielectricResonance { index: n, eigenvalue: lambda, k: k2.sqrt() })
        })
        .collect();
    if out.is_empty() {
        return Err(SpectralError::NoExcitableMode);
    }
    Ok(out)
}

/// Detuning factor `1 + sign delta^h` (3D) or `1 + sign |log delta|^-h` (2D).
pub fn detuning_factor(dim: usize, delta: f64, h: f64, sign: i32) -> f64 {
    let small = if dim == 3 { delta.powf(h) } else { delta.ln().abs().powf(-h) };
    1.0 + sign as f64 * small
}

/// Incident wave with its realized wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    pub direction: Point,
    /// Incident wavenumber `k`, with `k^2 = k_n0^2 (1 +- detuning)`.
    pub k: f64,
    /// Kernel wavenumber `k sqrt(b0 / a0)`.
    pub k_eff: f64,
    pub n0: usize,
    pub k_resonance: f64,
    pub h: f64,
    pub sign: i32,
}

/// Realizes the configured detuning against resonance `n0` of `spec`.
pub fn realize_incident(cfg: &ClusterConfig, spec: &SpectralData, contrasts: &ContrastParams) -> Result<IncidentWave, SpectralError> {
    let inc = cfg
        .incident
        .as_ref()
        .ok_or_else(|| SpectralError::Invalid("config has no incident section".into()))?;
    let n0 = match inc.n0 {
        Some(n) => {
            if !spec.is_excitable(n) {
                return Err(SpectralError::ResonanceIndex(n));
            }
            n
        }
        None => spec.n0,
    };
    let lambda = spec.physical_eigenvalue(n0);
    let k_res2 = contrasts.a0 / (contrasts.gamma[0] * lambda);
    let factor = detuning_factor(cfg.dim, cfg.delta, inc.h, inc.sign);
    if !(k_res2 > 0.0 && factor > 0.0) {
        return Err(SpectralError::Invalid(format!("detuned k^2 is not positive (factor {factor})")));
    }
    let k = (k_res2 * factor).sqrt();
    Ok(IncidentWave {
        direction: cfg.direction(),
        k,
        k_eff: k * cfg.background.wavenumber_factor(),
        n0,
        k_resonance: k_res2.sqrt(),
        h: inc.h,
        sign: inc.sign,
    })
}

/// Closed surfaces available for the Minnaert quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedSurface {
    Sphere { radius: f64 },
    Cube { side: f64 },
}

impl ClosedSurface {
    pub fn area(&self) -> f64 {
        match self {
            ClosedSurface::Sphere { radius } => 4.0 * PI * radius * radius,
            ClosedSurface::Cube { side } => 6.0 * side * side,
        }
    }

    pub fn scaled(&self, delta: f64) -> Self {
        match *self {
            ClosedSurface::Sphere { radius } => ClosedSurface::Sphere { radius: radius * delta },
            ClosedSurface::Cube { side } => ClosedSurface::Cube { side: side * delta },
        }
    }

    /// Quadrature points, outward normals and weights at the given resolution.
    fn rule(&self, resolution: usize) -> Vec<(Point, Point, f64)> {
        let (x, w) = gauss_legendre(resolution);
        let mut out = Vec::new();
        match *self {
            ClosedSurface::Sphere { radius } => {
                // Gauss in cos(theta), trapezoid in phi.
                let nphi = 2 * resolution;
                let dphi = 2.0 * PI / nphi as f64;
                for (c, wc) in x.iter().zip(&w) {
                    let s = (1.0 - c * c).sqrt();
                    for p in 0..nphi {
                        let phi = (p as f64 + 0.5) * dphi;
                        let nrm = [s * phi.cos(), s * phi.sin(), *c];
                        let pt = [radius * nrm[0], radius * nrm[1], radius * nrm[2]];
                        out.push((pt, nrm, radius * radius * wc * dphi));
                    }
                }
            }
            ClosedSurface::Cube { side } => {
                let half = 0.5 * side;
                for axis in 0..3 {
                    for sgn in [-1.0, 1.0] {
                        let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                        for (u, wu) in x.iter().zip(&w) {
                            for (v, wv) in x.iter().zip(&w) {
                                let mut pt = [0.0; 3];
                                let mut nrm = [0.0; 3];
                                pt[axis] = sgn * half;
                                pt[a1] = u * half;
                                pt[a2] = v * half;
                                nrm[axis] = sgn;
                                out.push((pt, nrm, wu * wv * half * half));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// `(1/|S|) ∫_S ∫_S (x - y) . nu(x) / (4 pi |x - y|) ds(x) ds(y)` at one resolution.
/// The integrand is bounded, so coincident nodes are simply skipped.
pub fn surface_theta(surface: &ClosedSurface, resolution: usize) -> f64 {
    let rule = surface.rule(resolution);
    let mut total = 0.0;
    for (x, nu, wx) in &rule {
        let mut inner = 0.0;
        for (y, _, wy) in &rule {
            let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r > 0.0 {
                inner += wy * (d[0] * nu[0] + d[1] * nu[1] + d[2] * nu[2]) / r;
            }
        }
        total += wx * inner;
    }
    total / (4.0 * PI * surface.area())
}

/// Surface constant with a convergence check between `resolution` and `resolution / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta: f64,
    pub drift: f64,
}

pub fn surface_theta_checked(surface: &ClosedSurface, resolution: usize) -> Result<ThetaEstimate, SpectralError> {
    if resolution < 4 {
        return Err(SpectralError::Invalid(format!("surface resolution {resolution} below 4")));
    }
    let fine = surface_theta(surface, resolution);
    let coarse = surface_theta(surface, resolution / 2);
    let drift = (fine - coarse).abs() / fine.abs();
    if drift > 0.01 {
        return Err(SpectralError::QuadratureDrift { drift });
    }
    Ok(ThetaEstimate { theta: fine, drift })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinnaertResonance {
    /// Surface constant of the reference surface.
    pub theta_reference: f64,
    /// `delta^2` times the reference constant.
    pub theta_particle: f64,
    pub k: f64,
    pub quadrature_drift: f64,
}

/// `k_M^2 = sqrt(8 pi a0 / (a1 Theta))` with `Theta = delta^2 Theta_B`.
pub fn minnaert_from_theta(theta_particle: f64, a0: f64, a1: f64) -> f64 {
    (8.0 * PI * a0 / (a1 * theta_particle)).sqrt().sqrt()
}

pub fn minnaert_resonance(surface: &ClosedSurface, delta: f64, a0: f64, a1: f64, surface_resolution: usize) -> Result<MinnaertResonance, SpectralError> {
    let est = surface_theta_checked(surface, surface_resolution)?;
    let theta_particle = delta * delta * est.theta;
    Ok(MinnaertResonance {
        theta_reference: est.theta,
        theta_particle,
        k: minnaert_from_theta(theta_particle, a0, a1),
        quadrature_drift: est.drift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasmonicResonance {
    pub index: usize,
    pub sigma: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasmonicResonances {
    pub resonances: Vec<PlasmonicResonance>,
    /// Indices whose radicand `eps0 - 1/2 - sigma_n` is not positive.
    pub skipped: Vec<usize>,
}

/// `k_n^2 = (k_p^2 / eps0)(eps0 - 1/2 - sigma_n)` for each admissible `sigma_n`.
pub fn plasmonic_resonances(eps0: f64, k_p: f64, sigma: &[f64]) -> Result<PlasmonicResonances, SpectralError> {
    let mut resonances = Vec::new();
    let mut skipped = Vec::new();
    for (index, s) in sigma.iter().enumerate() {
        let radicand = eps0 - 0.5 - s;
        if radicand > 0.0 {
            resonances.push(PlasmonicResonance { index, sigma: *s, k: (k_p * k_p / eps0 * radicand).sqrt() });
        } else {
            skipped.push(index);
        }
    }
    if resonances.is_empty() {
        return Err(SpectralError::NoPlasmonicResonance);
    }
    Ok(PlasmonicResonances { resonances, skipped })
}

/// All resonance families computed for a scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSet {
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub dielectric: Vec<DielectricResonance>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub minnaert: Option<MinnaertResonance>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub plasmonic: Option<PlasmonicResonances>,
    /// Detuned incident wavenumbers, one per listed resonance of the active family.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub detuned: Vec<f64>,
}
