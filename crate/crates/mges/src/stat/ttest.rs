//! Two-sample t tests: Welch (unequal variance, the default across the
//! toolkit) and pooled variance (needed for the ANOVA F identity).

use super::dist::t_cdf;
use super::{Df, TestMethod, TestResult};
use crate::matrix::{mean, sample_variance};
use crate::{Error, Result};

fn check_sizes(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: x.len().min(y.len()) });
    }
    Ok(())
}

/// Welch statistic and Satterthwaite df without error handling; used by the
/// resampling loop where degenerate draws must still yield a comparable
/// magnitude. Both groups constant: equal means give 0, otherwise +/-inf.
pub(crate) fn welch_statistic(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let (vx, vy) = (sample_variance(x), sample_variance(y));
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let se2 = vx / nx + vy / ny;
    if se2 == 0.0 {
        let t = if mx == my { 0.0 } else { (mx - my).signum() * f64::INFINITY };
        return (t, nx + ny - 2.0);
    }
    let t = (mx - my) / se2.sqrt();
    let df = se2 * se2
        / ((vx / nx) * (vx / nx) / (nx - 1.0) + (vy / ny) * (vy / ny) / (ny - 1.0));
    (t, df)
}

/// Welch two-sample t test with a two-sided p-value.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    check_sizes(x, y)?;
    if sample_variance(x) == 0.0 && sample_variance(y) == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let (t, df) = welch_statistic(x, y);
    let p = 2.0 * (1.0 - t_cdf(t.abs(), df)?);
    Ok(TestResult {
        statistic: t,
        df: Some(Df::One(df)),
        p_value: p.clamp(0.0, 1.0),
        method: TestMethod::WelchT,
    })
}

/// Pooled-variance two-sample t test.
pub fn pooled_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    check_sizes(x, y)?;
    let (vx, vy) = (sample_variance(x), sample_variance(y));
    if vx == 0.0 && vy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let df = nx + ny - 2.0;
    let sp2 = ((nx - 1.0) * vx + (ny - 1.0) * vy) / df;
    let t = (mean(x) - mean(y)) / (sp2 * (1.0 / nx + 1.0 / ny)).sqrt();
    let p = 2.0 * (1.0 - t_cdf(t.abs(), df)?);
    Ok(TestResult {
        statistic: t,
        df: Some(Df::One(df)),
        p_value: p.clamp(0.0, 1.0),
        method: TestMethod::PooledT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_t_zero_p_one() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn hand_computed_welch_case() {
        // x = 1..4, y = 2,4,6,8: var_x = 5/3, var_y = 20/3, t = -sqrt(3)
        let r = welch_t(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!((r.statistic - (-(3.0f64.sqrt()))).abs() < 1e-9);
        match r.df {
            // (25/12)^2 / (25/432 + 400/432) = 75/17
            Some(Df::One(df)) => assert!((df - 75.0 / 17.0).abs() < 1e-9),
            _ => panic!("expected scalar df"),
        }
    }

    #[test]
    fn zero_variance_is_an_error() {
        assert!(matches!(
            welch_t(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]),
            Err(Error::ZeroVariance)
        ));
        assert!(matches!(
            pooled_t(&[5.0, 5.0], &[7.0, 7.0]),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn pooled_equals_welch_for_equal_sizes_and_variances() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 3.0, 4.0, 5.0];
        let a = welch_t(&x, &y).unwrap();
        let b = pooled_t(&x, &y).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
    }
}
