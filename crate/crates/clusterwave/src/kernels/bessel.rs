//! Integer-order Bessel functions J0, J1, Y0, Y1 for real positive arguments.
//!
//! Below [`SERIES_SWITCH`] the ascending power series is summed directly; above it
//! the Hankel asymptotic expansion is truncated at its smallest term. At the switch
//! both branches are accurate to about 1e-12 absolute.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::EULER_GAMMA;

/// Argument at which evaluation moves from the power series to the asymptotic expansion.
pub const SERIES_SWITCH: f64 = 12.0;

/// J0, J1, Y0, Y1 evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselSet {
    pub j0: f64,
    pub j1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BesselSet {
    pub fn h0(&self) -> Complex64 {
        Complex64::new(self.j0, self.y0)
    }

    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j1, self.y1)
    }
}

/// All four functions at `z > 0`, choosing the branch by [`SERIES_SWITCH`].
pub fn bessel_set(z: f64) -> BesselSet {
    debug_assert!(z > 0.0);
    if z < SERIES_SWITCH {
        series(z)
    } else {
        asymptotic(z)
    }
}

/// Hankel function of the first kind, order zero.
pub fn hankel1_0(z: f64) -> Complex64 {
    bessel_set(z).h0()
}

/// Hankel function of the first kind, order one.
pub fn hankel1_1(z: f64) -> Complex64 {
    bessel_set(z).h1()
}

/// Ascending series. Exposed so tests can compare the branches at the seam.
pub fn series(z: f64) -> BesselSet {
    let q = 0.25 * z * z;
    let log_term = (0.5 * z).ln() + EULER_GAMMA;

    // term_m = (-q)^m / (m!)^2 and term1_m = (-q)^m / (m! (m+1)!)
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut harmonic = 0.0;
    let mut j0 = 0.0;
    let mut j1s = 0.0;
    let mut y0s = 0.0;
    let mut y1s = 0.0;
    let mut m = 0usize;
    loop {
        let hm1 = harmonic + 1.0 / (m as f64 + 1.0);
        j0 += term0;
        j1s += term1;
        y0s -= harmonic * term0;
        // psi(m+1) + psi(m+2) = H_m + H_{m+1} - 2 gamma; the gamma part is folded into log_term
        y1s += (harmonic + hm1) * term1;
        m += 1;
        let mf = m as f64;
        term0 *= -q / (mf * mf);
        term1 *= -q / (mf * (mf + 1.0));
        harmonic = hm1;
        if term0.abs() < 1e-18 * j0.abs().max(1e-300) && term1.abs() < 1e-18 && m > 4 {
            break;
        }
        if m > 200 {
            break;
        }
    }
    let half = 0.5 * z;
    let j1 = half * j1s;
    let y0 = (2.0 / PI) * (log_term * j0 + y0s);
    let y1 = -2.0 / (PI * z) + (2.0 / PI) * log_term * j1 - half * y1s / PI;
    BesselSet { j0, j1, y0, y1 }
}

/// Hankel asymptotic expansion, truncated before the terms start growing.
pub fn asymptotic(z: f64) -> BesselSet {
    let h0 = asymptotic_hankel(0, z);
    let h1 = asymptotic_hankel(1, z);
    BesselSet { j0: h0.re, j1: h1.re, y0: h0.im, y1: h1.im }
}

fn asymptotic_hankel(order: u32, z: f64) -> Complex64 {
    let mu = 4.0 * (order * order) as f64;
    let i = Complex64::new(0.0, 1.0);
    let mut sum = Complex64::new(1.0, 0.0);
    let mut coeff = 1.0f64;
    let mut ik = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        coeff *= (mu - odd * odd) / (kf * 8.0 * z);
        ik *= i;
        let mag = coeff.abs();
        if mag >= last {
            break;
        }
        sum += ik * coeff;
        last = mag;
        if mag < 1e-17 {
            break;
        }
    }
    let phase = z - order as f64 * FRAC_PI_2 - FRAC_PI_4;
    (2.0 / (PI * z)).sqrt() * Complex64::from_polar(1.0, phase) * sum
}
