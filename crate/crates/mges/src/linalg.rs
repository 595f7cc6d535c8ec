//! Small dense linear algebra for the handful of k x k systems the
//! analyses need (ANOVA normal equations, LDA pooled covariance).
//! Row-major `&[f64]` buffers of size n*n; nothing here is meant for
//! large matrices.

use crate::{Error, Result};

/// Cholesky factor L (lower triangular, row-major) of a symmetric
/// positive-definite matrix. `None` when the matrix is not PD, which
/// callers treat as rank deficiency.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve L L^T x = b given the Cholesky factor.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// Solve a symmetric positive-definite system, erroring on rank deficiency.
pub fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a, n).ok_or(Error::RankDeficient)?;
    Ok(cholesky_solve(&l, n, b))
}

/// Ordinary least squares fit of `y` on the design `x` (rows = samples,
/// `p` columns, row-major). Returns the coefficients, the residual sum of
/// squares, and the Cholesky factor of X'X for later contrast variances.
pub struct LsFit {
    pub coef: Vec<f64>,
    pub rss: f64,
    pub xtx_chol: Vec<f64>,
    pub p: usize,
}

pub fn least_squares(x: &[f64], rows: usize, p: usize, y: &[f64]) -> Result<LsFit> {
    debug_assert_eq!(x.len(), rows * p);
    debug_assert_eq!(y.len(), rows);
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for r in 0..rows {
        let row = &x[r * p..(r + 1) * p];
        for i in 0..p {
            xty[i] += row[i] * y[r];
            for j in 0..=i {
                xtx[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            xtx[i * p + j] = xtx[j * p + i];
        }
    }
    let l = cholesky(&xtx, p).ok_or(Error::RankDeficient)?;
    let coef = cholesky_solve(&l, p, &xty);
    let mut rss = 0.0;
    for r in 0..rows {
        let row = &x[r * p..(r + 1) * p];
        let fitted: f64 = row.iter().zip(&coef).map(|(a, b)| a * b).sum();
        let e = y[r] - fitted;
        rss += e * e;
    }
    Ok(LsFit { coef, rss, xtx_chol: l, p })
}

impl LsFit {
    /// c' (X'X)^-1 c for a contrast vector c.
    pub fn contrast_variance_factor(&self, c: &[f64]) -> f64 {
        let v = cholesky_solve(&self.xtx_chol, self.p, c);
        c.iter().zip(&v).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_recovers_known_factor() {
        // A = [[4, 2], [2, 3]] has L = [[2, 0], [1, sqrt(2)]]
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-12);
        assert!((l[2] - 1.0).abs() < 1e-12);
        assert!((l[3] - 2.0_f64.sqrt()).abs() < 1e-12);
        let x = cholesky_solve(&l, 2, &[8.0, 7.0]);
        // A x = b ->  x = [1.25, 1.5]
        assert!((x[0] - 1.25).abs() < 1e-12);
        assert!((x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(cholesky(&a, 2).is_none());
    }

    #[test]
    fn least_squares_fits_a_line() {
        // y = 3 + 2 x with design [1, x]
        let xs = [0.0, 1.0, 2.0, 3.0];
        let mut design = Vec::new();
        let mut y = Vec::new();
        for &x in &xs {
            design.extend_from_slice(&[1.0, x]);
            y.push(3.0 + 2.0 * x);
        }
        let fit = least_squares(&design, 4, 2, &y).unwrap();
        assert!((fit.coef[0] - 3.0).abs() < 1e-10);
        assert!((fit.coef[1] - 2.0).abs() < 1e-10);
        assert!(fit.rss < 1e-18);
    }
}
