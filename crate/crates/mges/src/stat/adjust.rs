//! Multiple-testing p-value adjustment. Adjusted values are reported in
//! the input order, clamped to [0, 1], with the step-up/step-down
//! monotonicity constraints enforced.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdjustMethod {
    None,
    Bonferroni,
    Holm,
    Bh,
    By,
}

impl AdjustMethod {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "none" => AdjustMethod::None,
            "bonferroni" => AdjustMethod::Bonferroni,
            "holm" => AdjustMethod::Holm,
            "BH" | "bh" => AdjustMethod::Bh,
            "BY" | "by" => AdjustMethod::By,
            other => return Err(Error::Usage(format!("unknown adjust method `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdjustMethod::None => "none",
            AdjustMethod::Bonferroni => "bonferroni",
            AdjustMethod::Holm => "holm",
            AdjustMethod::Bh => "BH",
            AdjustMethod::By => "BY",
        }
    }
}

/// Adjust a vector of p-values; the output is aligned with the input.
pub fn adjust_pvalues(p: &[f64], method: AdjustMethod) -> Result<Vec<f64>> {
    for (i, &v) in p.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::PValueRange { value: v, index: i });
        }
    }
    let m = p.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mf = m as f64;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));

    let mut adjusted = vec![0.0; m];
    match method {
        AdjustMethod::None => adjusted.copy_from_slice(p),
        AdjustMethod::Bonferroni => {
            for i in 0..m {
                adjusted[i] = (p[i] * mf).min(1.0);
            }
        }
        AdjustMethod::Holm => {
            // step-down: running max of (m - rank) * p
            let mut running = 0.0f64;
            for (rank, &idx) in order.iter().enumerate() {
                let v = ((mf - rank as f64) * p[idx]).min(1.0);
                running = running.max(v);
                adjusted[idx] = running;
            }
        }
        AdjustMethod::Bh | AdjustMethod::By => {
            let c = if method == AdjustMethod::By {
                (1..=m).map(|i| 1.0 / i as f64).sum::<f64>()
            } else {
                1.0
            };
            // step-up: running min of c * m / rank * p, from the largest down
            let mut running = 1.0f64;
            for (rank, &idx) in order.iter().enumerate().rev() {
                let v = (c * mf / (rank as f64 + 1.0) * p[idx]).min(1.0);
                running = running.min(v);
                adjusted[idx] = running;
            }
        }
    }
    Ok(adjusted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bh_step_up_by_hand() {
        // 0.01*3/1, 0.02*3/2, 0.03*3/3 -> 0.03, 0.03, 0.03
        let adj = adjust_pvalues(&[0.01, 0.02, 0.03], AdjustMethod::Bh).unwrap();
        assert_eq!(adj, vec![0.03, 0.03, 0.03]);
    }

    #[test]
    fn bonferroni_multiplies_and_clamps() {
        let adj =
            adjust_pvalues(&[0.01, 0.2, 0.3, 0.4, 0.5], AdjustMethod::Bonferroni).unwrap();
        assert_eq!(adj[0], 0.05);
        let adj = adjust_pvalues(&[0.6, 0.9], AdjustMethod::Bonferroni).unwrap();
        assert_eq!(adj, vec![1.0, 1.0]);
    }

    #[test]
    fn single_p_is_unchanged_by_bonferroni() {
        let adj = adjust_pvalues(&[0.01], AdjustMethod::Bonferroni).unwrap();
        assert_eq!(adj, vec![0.01]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(adjust_pvalues(&[0.5, 1.2], AdjustMethod::Bh).is_err());
        assert!(adjust_pvalues(&[-0.1], AdjustMethod::None).is_err());
        assert!(adjust_pvalues(&[f64::NAN], AdjustMethod::Holm).is_err());
    }

    #[test]
    fn adjustment_is_permutation_equivariant() {
        let p = [0.04, 0.001, 0.77, 0.3, 0.019, 0.5];
        let adj = adjust_pvalues(&p, AdjustMethod::Bh).unwrap();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let permuted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let adj_perm = adjust_pvalues(&permuted, AdjustMethod::Bh).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(adj[i], adj_perm[k]);
        }
    }

    proptest! {
        #[test]
        fn bh_dominates_raw_and_is_dominated_by_bonferroni(
            p in proptest::collection::vec(0.0f64..=1.0, 1..40)
        ) {
            let bh = adjust_pvalues(&p, AdjustMethod::Bh).unwrap();
            let bf = adjust_pvalues(&p, AdjustMethod::Bonferroni).unwrap();
            let holm = adjust_pvalues(&p, AdjustMethod::Holm).unwrap();
            for i in 0..p.len() {
                prop_assert!(bh[i] >= p[i] - 1e-15);
                prop_assert!(bh[i] <= bf[i] + 1e-15);
                prop_assert!(holm[i] <= bf[i] + 1e-15);
                prop_assert!((0.0..=1.0).contains(&bh[i]));
            }
        }
    }
}
