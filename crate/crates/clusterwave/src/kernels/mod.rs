//! Fundamental solutions of the Helmholtz and Laplace operators in 2D and 3D.
//!
//! All Helmholtz kernels take the effective wavenumber, i.e. the incident `k`
//! already multiplied by `sqrt(b0 / a0)`; the scene layer owns that factor.

pub mod bessel;

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,
    #[error("wavenumber must be positive, got {0}")]
    NonPositiveWavenumber(f64),
}

/// Kernel value and, on request, its gradient with respect to the source point `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval<const D: usize> {
    pub value: Complex64,
    pub gradient: Option<[Complex64; D]>,
}


fn distance<const D: usize>(x: &[f64; D], y: &[f64; D]) -> ([f64; D], f64) {
    let mut d = [0.0; D];
    let mut r2 = 0.0;
    for a in 0..D {
        d[a] = y[a] - x[a];
        r2 += d[a] * d[a];
    }
    (d, r2.sqrt())
}

/// Outgoing 3D Helmholtz kernel `exp(ik|x-y|) / (4 pi |x-y|)`; `k = 0` gives the Laplace kernel.
pub fn green3d(k: f64, x: &[f64; 3], y: &[f64; 3], with_gradient: bool) -> Result<KernelEval<3>, KernelError> {
    #[cfg(test)]
    accounting::record(3);
    let (d, r) = distance(x, y);
    if r == 0.0 {
        return Err(KernelError::CoincidentPoints);
    }
    let value = Complex64::from_polar(1.0, k * r) / (4.0 * PI * r);
    let gradient = with_gradient.then(|| {
        // d/dy of e^{ikr}/(4 pi r) = value * (ik - 1/r) * (y - x)/r
        let factor = value * Complex64::new(-1.0 / r, k) / r;
        [factor * d[0], factor * d[1], factor * d[2]]
    });
    Ok(KernelEval { value, gradient })
}

/// Outgoing 2D Helmholtz kernel `(i/4) H0(k|x-y|)`.
pub fn green2d(k: f64, x: &[f64; 2], y: &[f64; 2], with_gradient: bool) -> Result<KernelEval<2>, KernelError> {
    #[cfg(test)]
    accounting::record(2);
    if k <= 0.0 || k.is_nan() {
        return Err(KernelError::NonPositiveWavenumber(k));
    }
    let (d, r) = distance(x, y);
    if r == 0.0 {
        return Err(KernelError::CoincidentPoints);
    }
    let b = bessel::bessel_set(k * r);
    let i4 = Complex64::new(0.0, 0.25);
    let value = i4 * b.h0();
    let gradient = with_gradient.then(|| {
        // H0' = -H1
        let factor = -i4 * b.h1() * k / r;
        [factor * d[0], factor * d[1]]
    });
    Ok(KernelEval { value, gradient })
}

/// 2D Laplace kernel `-(1/2pi) log|x-y|`.
pub fn green0_2d(x: &[f64; 2], y: &[f64; 2]) -> Result<f64, KernelError> {
    let (_, r) = distance(x, y);
    if r == 0.0 {
        return Err(KernelError::CoincidentPoints);
    }
    Ok(-r.ln() / (2.0 * PI))
}

/// Constant term of the small-distance expansion of the 2D kernel:
/// `(i/4) H0(kr) = -(1/2pi) log r + E + O(r^2 log r)`.
pub fn constant_e(k: f64) -> Result<Complex64, KernelError> {
    if k <= 0.0 || k.is_nan() {
        return Err(KernelError::NonPositiveWavenumber(k));
    }
    Ok(Complex64::new(-((0.5 * k).ln() + EULER_GAMMA) / (2.0 * PI), 0.25))
}
