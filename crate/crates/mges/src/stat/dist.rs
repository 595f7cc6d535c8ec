//! Special functions and distribution CDFs used by every test in the
//! kernel. The gamma/beta/erf machinery is backed by `statrs`; the
//! hypergeometric tail is summed here in log space so deep tails stay
//! accurate.

use crate::{Error, Result};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma;

/// Natural log of the gamma function, `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("ln_gamma: x = {x} must be > 0")));
    }
    Ok(gamma::ln_gamma(x))
}

/// Digamma function, `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("digamma: x = {x} must be > 0")));
    }
    Ok(gamma::digamma(x))
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Student t CDF with `df > 0` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::Domain(format!("t_cdf: df = {df} must be > 0")));
    }
    if t.is_nan() {
        return Err(Error::Domain("t_cdf: t is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    // complement argument computed directly; df/(df + t^2) near 1 would
    // lose half the accuracy budget at large df
    let xc = t * t / (df + t * t);
    let tail = 0.5 * (1.0 - beta_reg(0.5, df / 2.0, xc));
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

/// Chi-square CDF with `df > 0`.
pub fn chi_sq_cdf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::Domain(format!("chi_sq_cdf: df = {df} must be > 0")));
    }
    if x.is_nan() {
        return Err(Error::Domain("chi_sq_cdf: x is NaN".into()));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("chi_sq_cdf: x = {x} must be >= 0")));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(gamma::gamma_lr(df / 2.0, x / 2.0))
}

/// F distribution CDF with `df1, df2 > 0`.
pub fn f_cdf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    if !(df1 > 0.0) || !(df2 > 0.0) {
        return Err(Error::Domain(format!("f_cdf: df1 = {df1}, df2 = {df2} must be > 0")));
    }
    if x.is_nan() {
        return Err(Error::Domain("f_cdf: x is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let z = df1 * x / (df1 * x + df2);
    Ok(beta_reg(df1 / 2.0, df2 / 2.0, z))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    gamma::ln_gamma(n as f64 + 1.0)
        - gamma::ln_gamma(k as f64 + 1.0)
        - gamma::ln_gamma((n - k) as f64 + 1.0)
}

/// Upper tail `P(X >= k)` of the hypergeometric distribution with
/// population `total`, `successes` marked items, and `draws` draws.
/// Terms are evaluated in log space before accumulation.
pub fn hypergeom_tail(k: u64, total: u64, successes: u64, draws: u64) -> Result<f64> {
    if successes > total || draws > total {
        return Err(Error::Domain(format!(
            "hypergeom_tail: successes = {successes}, draws = {draws} must be <= total = {total}"
        )));
    }
    let lo = (successes + draws).saturating_sub(total); // smallest possible overlap
    let hi = successes.min(draws);
    if k <= lo {
        return Ok(1.0);
    }
    if k > hi {
        return Ok(0.0);
    }
    let ln_denom = ln_choose(total, draws);
    let mut sum = 0.0;
    for j in k..=hi {
        let ln_p = ln_choose(successes, j) + ln_choose(total - successes, draws - j) - ln_denom;
        sum += ln_p.exp();
    }
    Ok(sum.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 40-digit arithmetic (mpmath).
    const TOL: f64 = 1e-10;

    #[test]
    fn norm_cdf_matches_reference() {
        let cases = [
            (-8.0, 6.22096057427178412e-16),
            (-3.0, 0.00134989803163009453),
            (-1.0, 0.158655253931457051),
            (0.0, 0.5),
            (0.5, 0.691462461274013104),
            (1.96, 0.975002104851779566),
            (4.6556, 0.999998384807170123),
            (8.0, 0.999999999999999378),
            (-0.5, 0.308537538725986896),
            (2.5, 0.993790334674223865),
        ];
        for (z, want) in cases {
            assert!((norm_cdf(z) - want).abs() <= TOL, "normCdf({z})");
        }
    }

    #[test]
    fn t_cdf_matches_reference() {
        let cases = [
            (1.0, 3.0, 0.804498890522114679),
            (-1.7320508075688772, 5.93103448275862, 0.0672750330005213356),
            (2.5, 10.0, 0.984276577881695598),
            (0.5, 1.0, 0.647583617650433274),
            (-3.0, 30.0, 0.00269498203282597331),
            (1.0, 1_000_000.0, 0.841344625083210935),
            (4.0, 2.0, 0.971404520791031683),
        ];
        for (t, df, want) in cases {
            assert!((t_cdf(t, df).unwrap() - want).abs() <= TOL, "tCdf({t},{df})");
        }
        assert!(t_cdf(1.0, 0.0).is_err());
    }

    #[test]
    fn chi_sq_cdf_matches_reference() {
        let cases = [
            (0.5, 1.0, 0.520499877813046538),
            (10.0, 2.0, 0.993262053000914533),
            (5.0, 5.0, 0.58411981300449208),
            (100.0, 50.0, 0.999965450686170151),
            (1.0, 10.0, 0.000172115629955840778),
        ];
        for (x, k, want) in cases {
            assert!((chi_sq_cdf(x, k).unwrap() - want).abs() <= TOL, "chiSqCdf({x},{k})");
        }
        assert!(chi_sq_cdf(-1.0, 2.0).is_err());
    }

    #[test]
    fn f_cdf_matches_reference() {
        let cases = [
            (1.0, 3.0, 10.0, 0.567662796978302935),
            (4.2, 2.0, 17.0, 0.967059571793610788),
            (0.5, 1.0, 1.0, 0.39182655203060727),
        ];
        for (x, d1, d2, want) in cases {
            assert!((f_cdf(x, d1, d2).unwrap() - want).abs() <= TOL, "fCdf({x},{d1},{d2})");
        }
    }

    #[test]
    fn gamma_family_matches_reference() {
        assert!((ln_gamma(0.5).unwrap() - 0.572364942924700087).abs() <= TOL);
        assert!(ln_gamma(1.0).unwrap().abs() <= TOL);
        assert!((ln_gamma(2.5).unwrap() - 0.28468287047291916).abs() <= TOL);
        assert!((ln_gamma(10.0).unwrap() - 12.8018274800814696).abs() <= TOL);
        assert!((ln_gamma(100.25).unwrap() - 360.284559637764235).abs() <= 1e-9);
        assert!((digamma(1.0).unwrap() - (-0.577215664901532861)).abs() <= TOL);
        assert!((digamma(0.5).unwrap() - (-1.96351002602142348)).abs() <= TOL);
        assert!((digamma(5.0).unwrap() - 1.50611766843180047).abs() <= TOL);
        assert!((digamma(20.5).unwrap() - 2.99583639470764658).abs() <= TOL);
        assert!(ln_gamma(0.0).is_err());
        assert!(digamma(-1.0).is_err());
    }

    #[test]
    fn hypergeom_tail_matches_combinatorial_sum() {
        // C(5,5) C(5,0) / C(10,5) = 1/252
        let p = hypergeom_tail(5, 10, 5, 5).unwrap();
        assert!((p - 1.0 / 252.0).abs() <= 1e-12);
        let cases = [
            (3, 20, 8, 6, 0.455108359133126935),
            (0, 10, 5, 5, 1.0),
            (1, 100, 10, 10, 0.669523788913274846),
            (2, 7, 3, 4, 0.628571428571428571),
        ];
        for (k, n, s, d, want) in cases {
            assert!((hypergeom_tail(k, n, s, d).unwrap() - want).abs() <= TOL);
        }
        assert_eq!(hypergeom_tail(6, 10, 5, 5).unwrap(), 0.0);
        assert!(hypergeom_tail(0, 10, 11, 5).is_err());
    }
}
