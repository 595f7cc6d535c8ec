//! Pearson correlation with its zero-correlation test, the leave-one-out
//! robust variant, and the Fisher Z comparison of two correlations.

use super::dist::{norm_cdf, t_cdf};
use super::{CorrelationEstimate, TestMethod, TestResult};
use crate::{Error, Result};

fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    // single sqrt keeps exactly (anti)linear data at |r| = 1
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn p_zero(r: f64, n: usize) -> Result<f64> {
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    Ok((2.0 * (1.0 - t_cdf(t.abs(), df)?)).clamp(0.0, 1.0))
}

/// Sample Pearson correlation with a two-sided zero-correlation test.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationEstimate> {
    if x.len() != y.len() {
        return Err(Error::Domain("pearson: length mismatch".into()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: x.len() });
    }
    let r = pearson_r(x, y)?;
    Ok(CorrelationEstimate { r, n: x.len(), removed_index: None, p_zero: p_zero(r, x.len())? })
}

/// Leave-one-out robust correlation: drop the single most influential
/// point (the index maximizing |r_loo - r|, lowest index on ties) and
/// report the correlation without it.
pub fn robust_cor(x: &[f64], y: &[f64]) -> Result<CorrelationEstimate> {
    if x.len() != y.len() {
        return Err(Error::Domain("robust_cor: length mismatch".into()));
    }
    let n = x.len();
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, found: n });
    }
    let full = pearson_r(x, y)?;
    let mut best_idx = 0usize;
    let mut best_delta = -1.0;
    let mut best_r = f64::NAN;
    let mut xs = Vec::with_capacity(n - 1);
    let mut ys = Vec::with_capacity(n - 1);
    for i in 0..n {
        xs.clear();
        ys.clear();
        for j in 0..n {
            if j != i {
                xs.push(x[j]);
                ys.push(y[j]);
            }
        }
        let r_i = pearson_r(&xs, &ys)?;
        let delta = (r_i - full).abs();
        if delta > best_delta {
            best_delta = delta;
            best_idx = i;
            best_r = r_i;
        }
    }
    Ok(CorrelationEstimate {
        r: best_r,
        n: n - 1,
        removed_index: Some(best_idx),
        p_zero: p_zero(best_r, n - 1)?,
    })
}

/// Fisher Z comparison of two independent correlations.
pub fn fisher_z_compare(r_a: f64, n_a: usize, r_b: f64, n_b: usize) -> Result<TestResult> {
    if n_a < 4 || n_b < 4 {
        return Err(Error::TooFewSamples { needed: 4, found: n_a.min(n_b) });
    }
    if r_a.abs() >= 1.0 || r_b.abs() >= 1.0 {
        return Err(Error::Domain("fisher_z_compare: |r| must be < 1".into()));
    }
    let z = (r_a.atanh() - r_b.atanh())
        / (1.0 / (n_a as f64 - 3.0) + 1.0 / (n_b as f64 - 3.0)).sqrt();
    let p = (2.0 * (1.0 - norm_cdf(z.abs()))).clamp(0.0, 1.0);
    Ok(TestResult { statistic: z, df: None, p_value: p, method: TestMethod::FisherZ })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 2.0, 3.0];
        let r = pearson(&x, &x).unwrap();
        assert_eq!(r.r, 1.0);
        assert_eq!(r.p_zero, 0.0);
        let y = [6.0, 4.0, 2.0];
        let r = pearson(&x, &y).unwrap();
        assert_eq!(r.r, -1.0);
    }

    #[test]
    fn known_t_for_r_half_n_five() {
        // r = 0.5, n = 5: t = 0.5 sqrt(3) / sqrt(0.75) = 1, p = 0.391002...
        let p = p_zero(0.5, 5).unwrap();
        assert!((p - 0.391002218955770642).abs() < 1e-10);
    }

    #[test]
    fn affine_invariance_and_negation() {
        let x = [0.4, 1.9, 2.2, 3.8, 5.5];
        let y = [1.1, 0.7, 2.9, 3.0, 4.2];
        let base = pearson(&x, &y).unwrap().r;
        let xs: Vec<f64> = x.iter().map(|v| 3.5 * v + 11.0).collect();
        let scaled = pearson(&xs, &y).unwrap().r;
        assert!((base - scaled).abs() < 1e-12);
        let yn: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((pearson(&x, &yn).unwrap().r + base).abs() < 1e-12);
    }

    /// LOO enumeration oracle: recompute every leave-one-out correlation
    /// directly and check the argmax rule.
    #[test]
    fn robust_cor_removes_the_planted_outlier() {
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        let y = [1.0, 2.0, 3.0, 4.0, -10.0];
        let full = pearson_r(&x, &y).unwrap();
        let mut best = (0usize, -1.0);
        for i in 0..5 {
            let xs: Vec<f64> = (0..5).filter(|&j| j != i).map(|j| x[j]).collect();
            let ys: Vec<f64> = (0..5).filter(|&j| j != i).map(|j| y[j]).collect();
            let d = (pearson_r(&xs, &ys).unwrap() - full).abs();
            if d > best.1 {
                best = (i, d);
            }
        }
        let r = robust_cor(&x, &y).unwrap();
        assert_eq!(r.removed_index, Some(best.0));
        assert_eq!(r.removed_index, Some(4)); // the planted outlier (0-based)
        assert!((r.r - 1.0).abs() < 1e-12);
        assert_eq!(r.n, 4);
    }

    #[test]
    fn robust_cor_on_clean_line_keeps_r_one() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 6.0, 8.0, 10.0];
        let r = robust_cor(&x, &y).unwrap();
        assert!((r.r - 1.0).abs() < 1e-12);
        // deterministic: rerun gives the same removed index
        assert_eq!(r.removed_index, robust_cor(&x, &y).unwrap().removed_index);
    }

    #[test]
    fn fisher_z_reference_case() {
        // rA = 0.9, nA = 23 vs rB = 0, nB = 23
        let r = fisher_z_compare(0.9, 23, 0.0, 23).unwrap();
        assert!((r.statistic - 4.65556680277351138).abs() < 1e-9);
        let want = 3.23090624681409662e-6;
        assert!((r.p_value - want).abs() / want < 1e-3);
        // symmetry
        let s = fisher_z_compare(0.0, 23, 0.9, 23).unwrap();
        assert_eq!(s.p_value, r.p_value);
        assert_eq!(s.statistic, -r.statistic);
        // equal correlations
        let e = fisher_z_compare(0.4, 10, 0.4, 12).unwrap();
        assert_eq!(e.statistic, 0.0);
        assert_eq!(e.p_value, 1.0);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance)));
        assert!(fisher_z_compare(1.0, 10, 0.0, 10).is_err());
        assert!(fisher_z_compare(0.5, 3, 0.0, 10).is_err());
    }
}
