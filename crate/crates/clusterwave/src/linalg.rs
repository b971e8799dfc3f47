//! Thin wrappers over faer's dense eigensolver and LU factorization.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, Side};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("symmetric eigensolver failed to converge")]
    EigenNoConvergence,
    #[error("system is singular or ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("non-finite entries in solution")]
    NonFinite,
}

/// Builds a dense matrix from row-major data.
pub fn real_from_rows(n: usize, data: &[f64]) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| data[i * n + j])
}

pub fn complex_from_rows(n: usize, data: &[Complex64]) -> Mat<Complex64> {
    Mat::from_fn(n, n, |i, j| data[i * n + j])
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending. Each eigenvector is
/// sign-normalized so that its first non-negligible component is positive.
pub fn symmetric_eigen_descending(a: &Mat<f64>, count: usize) -> Result<(Vec<f64>, Mat<f64>), LinalgError> {
    let n = a.nrows();
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| LinalgError::EigenNoConvergence)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let count = count.min(n);
    let mut values = Vec::with_capacity(count);
    let mut vectors = Mat::<f64>::zeros(n, count);
    for c in 0..count {
        let src = n - 1 - c;
        values.push(s[src]);
        let scale = (0..n).map(|i| u[(i, src)].abs()).fold(0.0, f64::max);
        let first = (0..n).find(|&i| u[(i, src)].abs() > 1e-10 * scale).unwrap_or(0);
        let sign = if u[(first, src)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, c)] = sign * u[(i, src)];
        }
    }
    Ok((values, vectors))
}

/// Largest relative eigen-residual `max_n |A v_n - l_n v_n| / |A|_F`.
pub fn eigen_residual(a: &Mat<f64>, values: &[f64], vectors: &Mat<f64>) -> f64 {
    let av = a * vectors;
    let anorm = a.norm_l2();
    let mut worst: f64 = 0.0;
    for (c, l) in values.iter().enumerate() {
        let r: f64 = (0..a.nrows()).map(|i| (av[(i, c)] - l * vectors[(i, c)]).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(r / anorm);
    }
    worst
}

/// LU factorization with a 1-norm condition estimate.
pub struct ComplexLu {
    lu: PartialPivLu<Complex64>,
    pub condition: f64,
}

fn one_norm(a: &Mat<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl ComplexLu {
    pub fn new(a: &Mat<Complex64>) -> Self {
        let lu = a.partial_piv_lu();
        let inv_norm = hager_inverse_norm(&lu, a.nrows());
        let condition = one_norm(a) * inv_norm;
        Self { lu, condition: if condition.is_finite() { condition } else { f64::INFINITY } }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Hager–Higham estimate of `|A^-1|_1` from an LU factorization.
fn hager_inverse_norm(lu: &PartialPivLu<Complex64>, n: usize) -> f64 {
    let mut x = Mat::from_fn(n, 1, |_, _| Complex64::new(1.0 / n as f64, 0.0));
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x);
        let y_norm: f64 = (0..n).map(|i| y[(i, 0)].norm()).sum();
        if !y_norm.is_finite() {
            return f64::INFINITY;
        }
        if y_norm <= estimate {
            break;
        }
        estimate = y_norm;
        let xi = Mat::from_fn(n, 1, |i, _| {
            let v = y[(i, 0)];
            if v.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                v / v.norm()
            }
        });
        let z = lu.solve_adjoint(&xi);
        let (jmax, zmax) = (0..n)
            .map(|i| (i, z[(i, 0)].norm()))
            .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        let ztx: f64 = (0..n).map(|i| (z[(i, 0)].conj() * x[(i, 0)]).re).sum();
        if zmax <= ztx {
            break;
        }
        x = Mat::from_fn(n, 1, |i, _| if i == jmax { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    }
    estimate
}

/// Solves `A x = b` by partial-pivoting LU, refusing systems whose condition
/// estimate exceeds `max_condition`. Returns the solution and the estimate.
pub fn solve_complex(a: &Mat<Complex64>, b: &[Complex64], max_condition: f64) -> Result<(Vec<Complex64>, f64), LinalgError> {
    let lu = ComplexLu::new(a);
    if !(lu.condition < max_condition) {
        return Err(LinalgError::IllConditioned { condition: lu.condition });
    }
    let x = lu.solve(b);
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok((x, lu.condition))
}

/// `|A x - b|_2 / |b|_2`.
pub fn relative_residual(a: &Mat<Complex64>, x: &[Complex64], b: &[Complex64]) -> f64 {
    let n = b.len();
    let mut r2 = 0.0;
    for i in 0..n {
        let mut s = -b[i];
        for (j, xj) in x.iter().enumerate() {
            s += a[(i, j)] * xj;
        }
        r2 += s.norm_sqr();
    }
    let b2: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    if b2 == 0.0 {
        r2.sqrt()
    } else {
        (r2 / b2).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_estimate_of_diagonal_matrix() {
        let a = Mat::from_fn(4, 4, |i, j| if i == j { Complex64::new((i + 1) as f64, 0.0) } else { Complex64::new(0.0, 0.0) });
        let lu = ComplexLu::new(&a);
        assert!((lu.condition - 4.0).abs() < 1e-12);
        let x = lu.solve(&[Complex64::new(1.0, 0.0); 4]);
        assert!((x[3].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_refused() {
        let a = Mat::from_fn(3, 3, |i, _| Complex64::new(i as f64, 1.0));
        assert!(solve_complex(&a, &[Complex64::new(1.0, 0.0); 3], 1e12).is_err());
    }

    #[test]
    fn eigenpairs_descending_with_sign_convention() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 } else if i.abs_diff(j) == 1 { -1.0 } else { 0.0 });
        let (l, v) = symmetric_eigen_descending(&a, 3).unwrap();
        assert!(l[0] > l[1] && l[1] > l[2]);
        assert!((l[0] - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        for c in 0..3 {
            assert!(v[(0, c)] > 0.0);
        }
        assert!(eigen_residual(&a, &l, &v) < 1e-14);
    }
}
