//! Shared statistical kernel: two-sample tests, correlation machinery,
//! mutual information, and multiplicity adjustment.
//!
//! Everything here is a pure function of its arguments; seeded operations
//! take the seed explicitly, so parallel callers get identical results
//! regardless of scheduling.

mod adjust;
mod bootstrap;
mod correlation;
pub mod dist;
mod mi;
mod ttest;
mod wilcoxon;

pub use adjust::{adjust_pvalues, AdjustMethod};
pub use bootstrap::{bootstrap_t, ResampleMode};
pub use correlation::{fisher_z_compare, pearson, robust_cor};
pub use mi::kraskov_mi;
pub use ttest::{pooled_t, welch_t};
pub use wilcoxon::wilcoxon_rank_sum;

use serde::{Deserialize, Serialize};

/// Degrees of freedom attached to a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Df {
    One(f64),
    Pair(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    WelchT,
    PooledT,
    Wilcoxon,
    BootstrapT,
    AnovaF,
    ContrastT,
    FisherZ,
    PermutationMi,
}

/// Outcome of a hypothesis test: statistic, optional degrees of freedom,
/// and a two-sided p-value in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: Option<Df>,
    pub p_value: f64,
    pub method: TestMethod,
}

/// Correlation with its zero-correlation test. `removed_index` is set by
/// the robust variant and names the most influential point (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub r: f64,
    pub n: usize,
    pub removed_index: Option<usize>,
    pub p_zero: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    // Every test in the kernel must return p in [0, 1] and be invariant
    // under swapping the two samples.
    #[test]
    fn two_sided_tests_are_symmetric_under_swap() {
        let x = [1.2, 3.4, 0.5, 2.2, 1.9];
        let y = [4.1, 5.0, 3.3, 4.8];
        let a = welch_t(&x, &y).unwrap();
        let b = welch_t(&y, &x).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.statistic, -b.statistic);
        assert!((0.0..=1.0).contains(&a.p_value));

        let a = wilcoxon_rank_sum(&x, &y, false).unwrap();
        let b = wilcoxon_rank_sum(&y, &x, false).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert!((0.0..=1.0).contains(&a.p_value));

        let a = pooled_t(&x, &y).unwrap();
        let b = pooled_t(&y, &x).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.statistic, -b.statistic);
    }
}
