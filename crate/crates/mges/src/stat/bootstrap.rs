//! Resampling t test. The default null is a label permutation of the
//! pooled sample with group sizes preserved; a centered with-replacement
//! bootstrap is available behind a flag. Both recompute the Welch
//! statistic per draw and use the add-one p-value estimate
//! `(#{|t*| >= |t|} + 1) / (B + 1)`.

use super::ttest::welch_statistic;
use super::{TestMethod, TestResult};
use crate::matrix::{mean, sample_variance};
use crate::rng;
use crate::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    /// Permute pooled labels, keeping group sizes. Has an exact
    /// enumeration for small samples, which the tests use as the oracle.
    Permutation,
    /// Center each group at the pooled mean, then resample each group with
    /// replacement from its centered values.
    CenteredBootstrap,
}

pub fn bootstrap_t(
    x: &[f64],
    y: &[f64],
    b: usize,
    seed: u64,
    mode: ResampleMode,
) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: x.len().min(y.len()) });
    }
    if b < 100 {
        return Err(Error::InvalidParam(format!("bootstrap B = {b} must be >= 100")));
    }
    let (nx, ny) = (x.len(), y.len());
    let mut pooled = Vec::with_capacity(nx + ny);
    pooled.extend_from_slice(x);
    pooled.extend_from_slice(y);
    if sample_variance(&pooled) == 0.0 {
        return Err(Error::ZeroVariance);
    }

    let (t_obs, df) = welch_statistic(x, y);
    // Re-drawing the observed split evaluates the statistic with a
    // different summation order; the tolerance keeps such draws counted
    // at the threshold instead of dropping below it by rounding.
    let t_abs = t_obs.abs();
    let thresh = t_abs - 1e-12 * t_abs.max(1.0);
    let mut rng = rng::stream(seed, &[]);
    let mut hits = 0usize;

    match mode {
        ResampleMode::Permutation => {
            let mut buf = pooled.clone();
            for _ in 0..b {
                rng::shuffle(&mut buf, &mut rng);
                let (t, _) = welch_statistic(&buf[..nx], &buf[nx..]);
                if t.abs() >= thresh {
                    hits += 1;
                }
            }
        }
        ResampleMode::CenteredBootstrap => {
            let grand = mean(&pooled);
            let cx: Vec<f64> = x.iter().map(|v| v - mean(x) + grand).collect();
            let cy: Vec<f64> = y.iter().map(|v| v - mean(y) + grand).collect();
            let mut bx = vec![0.0; nx];
            let mut by = vec![0.0; ny];
            for _ in 0..b {
                for slot in bx.iter_mut() {
                    *slot = cx[rng.gen_range(0..nx)];
                }
                for slot in by.iter_mut() {
                    *slot = cy[rng.gen_range(0..ny)];
                }
                let (t, _) = welch_statistic(&bx, &by);
                if t.abs() >= thresh {
                    hits += 1;
                }
            }
        }
    }

    let p = (hits as f64 + 1.0) / (b as f64 + 1.0);
    Ok(TestResult {
        statistic: t_obs,
        df: Some(super::Df::One(df)),
        p_value: p,
        method: TestMethod::BootstrapT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact permutation oracle: every way of assigning nx of the pooled
    /// values to the first group, via index subsets.
    pub(crate) fn exact_permutation_p(x: &[f64], y: &[f64]) -> f64 {
        let mut pooled = x.to_vec();
        pooled.extend_from_slice(y);
        let _n = pooled.len();
        let nx = x.len();
        let (t_obs, _) = welch_statistic(x, y);
        let t_abs = t_obs.abs();
        let mut extreme = 0usize;
        let mut total = 0usize;
        let mut pick = vec![0usize; nx];
        fn rec(
            pooled: &[f64],
            pick: &mut Vec<usize>,
            depth: usize,
            start: usize,
            t_abs: f64,
            extreme: &mut usize,
            total: &mut usize,
        ) {
            if depth == pick.len() {
                let in_x: Vec<f64> = pick.iter().map(|&i| pooled[i]).collect();
                let chosen: std::collections::HashSet<usize> = pick.iter().copied().collect();
                let in_y: Vec<f64> = (0..pooled.len())
                    .filter(|i| !chosen.contains(i))
                    .map(|i| pooled[i])
                    .collect();
                let (t, _) = welch_statistic(&in_x, &in_y);
                *total += 1;
                if t.abs() >= t_abs - 1e-12 * t_abs.max(1.0) {
                    *extreme += 1;
                }
                return;
            }
            for i in start..pooled.len() {
                pick[depth] = i;
                rec(pooled, pick, depth + 1, i + 1, t_abs, extreme, total);
            }
        }
        rec(&pooled, &mut pick, 0, 0, t_abs, &mut extreme, &mut total);
        extreme as f64 / total as f64
    }

    #[test]
    fn identical_groups_give_p_one() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let r = bootstrap_t(&v, &v, 500, 1, ResampleMode::Permutation).unwrap();
        assert_eq!(r.p_value, 1.0); // |t*| >= 0 always, so every draw hits
    }

    #[test]
    fn same_seed_reproduces_p() {
        let x = [1.0, 2.5, 3.0, 4.2];
        let y = [2.0, 4.0, 5.5, 8.0];
        let a = bootstrap_t(&x, &y, 1000, 42, ResampleMode::Permutation).unwrap();
        let b = bootstrap_t(&x, &y, 1000, 42, ResampleMode::Permutation).unwrap();
        assert_eq!(a.p_value, b.p_value);
        let c = bootstrap_t(&x, &y, 1000, 43, ResampleMode::Permutation).unwrap();
        assert_ne!(a.p_value, c.p_value); // different stream
    }

    #[test]
    fn converges_to_exact_enumeration() {
        let x = [0.61, 1.92, 2.45, 3.07];
        let y = [2.88, 4.11, 4.73, 6.02];
        let exact = exact_permutation_p(&x, &y);
        for b in [1_000usize, 10_000] {
            let r = bootstrap_t(&x, &y, b, 7, ResampleMode::Permutation).unwrap();
            let tol = 3.0 * (exact * (1.0 - exact) / b as f64).sqrt() + 2.0 / b as f64;
            assert!(
                (r.p_value - exact).abs() <= tol,
                "B={b}: got {} want {exact} +/- {tol}",
                r.p_value
            );
        }
    }

    #[test]
    fn zero_pooled_variance_is_an_error() {
        let v = [3.0, 3.0, 3.0];
        assert!(matches!(
            bootstrap_t(&v, &v, 200, 0, ResampleMode::Permutation),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn centered_bootstrap_runs_and_is_calibrated_enough() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.5, 2.5, 3.5, 4.5, 5.5];
        let r = bootstrap_t(&x, &y, 2000, 11, ResampleMode::CenteredBootstrap).unwrap();
        assert!(r.p_value > 0.2, "near-null data should not look significant");
    }
}
