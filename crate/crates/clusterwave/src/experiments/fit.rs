//! Least-squares exponent fits on logarithmic axes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of points accepted by [`fit_slope`].
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("{0} points given, at least {MIN_FIT_POINTS} required")]
    TooFewPoints(usize),
    #[error("abscissa is degenerate")]
    DegenerateAbscissa,
    #[error("non-positive or non-finite value at point {0}")]
    InvalidValue(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    /// `log x`.
    LogDelta,
    /// `log |log x|`.
    LogLogDelta,
}

impl Abscissa {
    pub fn transform(self, x: f64) -> f64 {
        match self {
            Abscissa::LogDelta => x.ln(),
            Abscissa::LogLogDelta => x.ln().abs().ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub abscissa: Abscissa,
    pub points: usize,
}

/// Fits `log y = slope * X(x) + intercept`.
pub fn fit_slope(points: &[(f64, f64)], abscissa: Abscissa) -> Result<SlopeFit, FitError> {
    if points.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for (i, (x, y)) in points.iter().enumerate() {
        let tx = abscissa.transform(*x);
        if !(*y > 0.0 && y.is_finite() && tx.is_finite()) {
            return Err(FitError::InvalidValue(i));
        }
        xs.push(tx);
        ys.push(y.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let scale = xs.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    if sxx <= (1e-12 * scale).powi(2) {
        return Err(FitError::DegenerateAbscissa);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit { slope, intercept, r2, abscissa, points: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_cubic() {
        let pts: Vec<_> = [0.1, 0.05, 0.02, 0.01].iter().map(|x: &f64| (*x, 2.5 * x.powi(3))).collect();
        let f = fit_slope(&pts, Abscissa::LogDelta).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_log_axis() {
        let pts: Vec<_> = (3..8).map(|m| {
            let x = (-(m as f64)).exp();
            (x, 0.7 * x.ln().abs().powi(-2))
        }).collect();
        let f = fit_slope(&pts, Abscissa::LogLogDelta).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(fit_slope(&[(0.1, 1.0); 3], Abscissa::LogDelta), Err(FitError::TooFewPoints(3)));
        assert_eq!(fit_slope(&[(0.1, 1.0); 4], Abscissa::LogDelta), Err(FitError::DegenerateAbscissa));
        assert_eq!(
            fit_slope(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0), (0.4, 1.0)], Abscissa::LogDelta),
            Err(FitError::InvalidValue(1))
        );
    }
}
