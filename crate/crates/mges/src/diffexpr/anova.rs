//! Gene-wise ANOVA through design and contrast matrices: treatment-coded
//! designs built from sample labels, ordinary least squares per gene, and
//! either the joint F test or per-contrast t tests.

use super::{DeResult, StatFamily};
use crate::linalg::least_squares;
use crate::matrix::{finite_mean, Matrix};
use crate::normalize::NormalizedDataset;
use crate::report::fmt_f64;
use crate::stat::dist::{f_cdf, t_cdf};
use crate::stat::{adjust_pvalues, AdjustMethod};
use crate::{Error, Result};
use rayon::prelude::*;

/// Design and contrast matrices over the samples that carry a value for
/// every factor.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaDesign {
    /// retained samples x coefficients, row-major
    pub design: Matrix,
    pub coef_names: Vec<String>,
    /// coefficients x contrasts
    pub contrasts: Matrix,
    pub contrast_names: Vec<String>,
    pub factor_labels: Vec<String>,
    /// chip indices of the retained samples
    pub sample_indices: Vec<usize>,
    /// combined factor level per retained sample
    pub condition_of_sample: Vec<String>,
    /// distinct conditions, lexicographic
    pub condition_names: Vec<String>,
}

/// Build a treatment-coded design (intercept plus per-factor level
/// indicators against the lexicographically first level) and all pairwise
/// level-difference contrasts.
pub fn design_anova(ds: &NormalizedDataset, factors: &[&str]) -> Result<AnovaDesign> {
    if factors.is_empty() {
        return Err(Error::Usage("designANOVA needs at least one factor".into()));
    }
    let mut factor_values: Vec<Vec<String>> = Vec::new();
    for f in factors {
        factor_values.push(ds.samples.labels.values(f)?.to_vec());
    }
    let retained: Vec<usize> = (0..ds.chips())
        .filter(|&c| factor_values.iter().all(|v| !v[c].is_empty()))
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptySelection);
    }

    let mut coef_names = vec!["(intercept)".to_string()];
    // per factor: sorted levels and the coefficient index of each
    // non-baseline level
    let mut level_sets: Vec<Vec<String>> = Vec::new();
    for (fi, f) in factors.iter().enumerate() {
        let mut levels: Vec<String> =
            retained.iter().map(|&c| factor_values[fi][c].clone()).collect();
        levels.sort();
        levels.dedup();
        if levels.len() < 2 {
            return Err(Error::LabelArity { label: f.to_string(), levels: levels.len() });
        }
        for level in &levels[1..] {
            coef_names.push(format!("{f}:{level}"));
        }
        level_sets.push(levels);
    }
    let p = coef_names.len();
    let mut design = Matrix::filled(retained.len(), p, 0.0);
    for (row, &c) in retained.iter().enumerate() {
        design.set(row, 0, 1.0);
        let mut offset = 1;
        for (fi, levels) in level_sets.iter().enumerate() {
            let value = &factor_values[fi][c];
            if let Some(pos) = levels.iter().position(|l| l == value) {
                if pos > 0 {
                    design.set(row, offset + pos - 1, 1.0);
                }
            }
            offset += levels.len() - 1;
        }
    }

    // full-rank check on the Gram matrix
    {
        let mut xtx = vec![0.0; p * p];
        for r in 0..retained.len() {
            let row = design.row(r);
            for i in 0..p {
                for j in 0..p {
                    xtx[i * p + j] += row[i] * row[j];
                }
            }
        }
        if crate::linalg::cholesky(&xtx, p).is_none() {
            return Err(Error::RankDeficient);
        }
    }

    // all pairwise level differences, per factor
    let mut contrast_cols: Vec<Vec<f64>> = Vec::new();
    let mut contrast_names = Vec::new();
    let mut offset = 1usize;
    for (fi, levels) in level_sets.iter().enumerate() {
        let coef_of = |idx: usize| -> Option<usize> {
            if idx == 0 {
                None
            } else {
                Some(offset + idx - 1)
            }
        };
        for a in 0..levels.len() {
            for b in a + 1..levels.len() {
                let mut col = vec![0.0; p];
                if let Some(ca) = coef_of(a) {
                    col[ca] = -1.0;
                }
                if let Some(cb) = coef_of(b) {
                    col[cb] = 1.0;
                }
                contrast_cols.push(col);
                contrast_names.push(format!("{}:{}-{}", factors[fi], levels[b], levels[a]));
            }
        }
        offset += levels.len() - 1;
    }
    let mut contrasts = Matrix::filled(p, contrast_cols.len(), 0.0);
    for (j, col) in contrast_cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            contrasts.set(i, j, v);
        }
    }

    let condition_of_sample: Vec<String> = retained
        .iter()
        .map(|&c| {
            factors
                .iter()
                .enumerate()
                .map(|(fi, _)| factor_values[fi][c].clone())
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect();
    let mut condition_names = condition_of_sample.clone();
    condition_names.sort();
    condition_names.dedup();

    Ok(AnovaDesign {
        design,
        coef_names,
        contrasts,
        contrast_names,
        factor_labels: factors.iter().map(|s| s.to_string()).collect(),
        sample_indices: retained,
        condition_of_sample,
        condition_names,
    })
}

/// Fit the design gene by gene. `return_f = true` tests the joint null
/// that every non-intercept coefficient is zero; otherwise each contrast
/// gets its own t statistic. P-values are adjusted per statistic family.
pub fn fit_anova(
    ds: &NormalizedDataset,
    design: &AnovaDesign,
    return_f: bool,
    adjust: AdjustMethod,
) -> Result<DeResult> {
    let p = design.coef_names.len();
    let n_samples = design.sample_indices.len();
    if n_samples < p + 1 {
        return Err(Error::ZeroResidualDf);
    }
    let gene_ids = ds.gene_ids();
    let n_contrasts = design.contrasts.cols();

    struct GeneFit {
        idx: usize,
        f_stat: f64,
        f_p: f64,
        contrast_est: Vec<f64>,
        contrast_t: Vec<f64>,
        contrast_p: Vec<f64>,
        cond_means: Vec<f64>,
    }

    let fits: Vec<std::result::Result<GeneFit, (usize, String)>> = (0..ds.genes())
        .into_par_iter()
        .map(|g| {
            // samples with data for this gene
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for (row, &c) in design.sample_indices.iter().enumerate() {
                let v = ds.w.at(g, c);
                if v.is_finite() {
                    rows.push(row);
                    y.push(v);
                }
            }
            let n = rows.len();
            if n < p + 1 {
                return Err((g, format!("residual df would be {} (need >= 1)", n as i64 - p as i64)));
            }
            let mut x = Vec::with_capacity(n * p);
            for &r in &rows {
                x.extend_from_slice(design.design.row(r));
            }
            let fit = match least_squares(&x, n, p, &y) {
                Ok(f) => f,
                Err(_) => return Err((g, "design rank deficient on available samples".into())),
            };
            let df_res = (n - p) as f64;
            let sigma2 = fit.rss / df_res;

            // intercept-only residual sum of squares
            let mean_y = y.iter().sum::<f64>() / n as f64;
            let rss0: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
            let q = (p - 1) as f64;
            let num = ((rss0 - fit.rss) / q).max(0.0);
            let (f_stat, f_p) = if num == 0.0 {
                (0.0, 1.0)
            } else if fit.rss == 0.0 {
                (f64::INFINITY, 0.0)
            } else {
                let f = num / sigma2;
                (f, 1.0 - f_cdf(f, q, df_res).map_err(|e| (g, e.to_string()))?)
            };

            let mut contrast_est = Vec::with_capacity(n_contrasts);
            let mut contrast_t = Vec::with_capacity(n_contrasts);
            let mut contrast_p = Vec::with_capacity(n_contrasts);
            for j in 0..n_contrasts {
                let c: Vec<f64> = (0..p).map(|i| design.contrasts.at(i, j)).collect();
                let est: f64 = c.iter().zip(&fit.coef).map(|(a, b)| a * b).sum();
                let vf = fit.contrast_variance_factor(&c);
                let se = (sigma2 * vf).sqrt();
                let (t, pv) = if se > 0.0 {
                    let t = est / se;
                    (t, (2.0 * (1.0 - t_cdf(t.abs(), df_res).map_err(|e| (g, e.to_string()))?))
                        .clamp(0.0, 1.0))
                } else if est == 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY * est.signum(), 0.0)
                };
                contrast_est.push(est);
                contrast_t.push(t);
                contrast_p.push(pv);
            }

            // per-condition means over available samples
            let cond_means: Vec<f64> = design
                .condition_names
                .iter()
                .map(|cond| {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|&&r| &design.condition_of_sample[r] == cond)
                        .map(|&r| ds.w.at(g, design.sample_indices[r]))
                        .collect();
                    finite_mean(&vals)
                })
                .collect();

            Ok(GeneFit { idx: g, f_stat, f_p, contrast_est, contrast_t, contrast_p, cond_means })
        })
        .collect();

    let mut tested = Vec::new();
    let mut skipped = Vec::new();
    for fit in fits {
        match fit {
            Ok(f) => tested.push(f),
            Err((g, reason)) => skipped.push((gene_ids[g].clone(), reason)),
        }
    }

    let mut families = Vec::new();
    if return_f {
        let raw_p: Vec<f64> = tested.iter().map(|t| t.f_p).collect();
        let adj_p = adjust_pvalues(&raw_p, adjust)?;
        // effect for the joint test: spread of the condition means
        let effect: Vec<f64> = tested
            .iter()
            .map(|t| {
                let finite: Vec<f64> =
                    t.cond_means.iter().copied().filter(|v| v.is_finite()).collect();
                if finite.is_empty() {
                    f64::NAN
                } else {
                    finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                        - finite.iter().copied().fold(f64::INFINITY, f64::min)
                }
            })
            .collect();
        families.push(StatFamily {
            name: "F".to_string(),
            effect,
            statistic: tested.iter().map(|t| t.f_stat).collect(),
            raw_p,
            adj_p,
        });
    } else {
        for j in 0..n_contrasts {
            let raw_p: Vec<f64> = tested.iter().map(|t| t.contrast_p[j]).collect();
            let adj_p = adjust_pvalues(&raw_p, adjust)?;
            families.push(StatFamily {
                name: design.contrast_names[j].clone(),
                effect: tested.iter().map(|t| t.contrast_est[j]).collect(),
                statistic: tested.iter().map(|t| t.contrast_t[j]).collect(),
                raw_p,
                adj_p,
            });
        }
    }

    let rows: Vec<usize> = tested.iter().map(|t| t.idx).collect();
    let mut group_means = Matrix::nan(tested.len(), design.condition_names.len());
    for (i, t) in tested.iter().enumerate() {
        for (j, &m) in t.cond_means.iter().enumerate() {
            group_means.set(i, j, m);
        }
    }
    let fold_change = families[0].effect.clone();
    Ok(DeResult {
        gene_ids: rows.iter().map(|&g| gene_ids[g].clone()).collect(),
        gene_labels: ds.gene_map.select_rows(&rows),
        families,
        group_means,
        level_names: design.condition_names.clone(),
        fold_change,
        test_method: if return_f { "ANOVA-F".to_string() } else { "ANOVA-contrasts".to_string() },
        sample_label_id: design.factor_labels.join("+"),
        adjust_method: adjust,
        w: ds.w.select_rows(&rows).select_cols(&design.sample_indices),
        sample_names: design
            .sample_indices
            .iter()
            .map(|&c| ds.samples.file_names[c].clone())
            .collect(),
        sample_level: design.condition_of_sample.clone(),
        skipped,
    })
}

/// Boxplot-style per-condition values of one gene, for the plot emitters.
pub fn gene_condition_values(
    ds: &NormalizedDataset,
    gene_label: &str,
    gene_name: &str,
    s_label: &str,
) -> Result<Vec<(String, Vec<f64>)>> {
    let gene_values = ds.gene_map.values(gene_label)?;
    let rows: Vec<usize> = (0..ds.genes()).filter(|&g| gene_values[g] == gene_name).collect();
    if rows.is_empty() {
        return Err(Error::UnknownCondition {
            condition: gene_name.to_string(),
            label: gene_label.to_string(),
        });
    }
    let sample_values = ds.samples.labels.values(s_label)?;
    let mut levels: Vec<String> =
        sample_values.iter().filter(|v| !v.is_empty()).cloned().collect();
    levels.sort();
    levels.dedup();
    let mut out = Vec::new();
    for level in levels {
        let mut vals = Vec::new();
        for (c, v) in sample_values.iter().enumerate() {
            if *v == level {
                for &g in &rows {
                    let w = ds.w.at(g, c);
                    if w.is_finite() {
                        vals.push(w);
                    }
                }
            }
        }
        out.push((level, vals));
    }
    Ok(out)
}

/// Formatted one-line description used by the CLI report.
pub fn describe_fit(res: &DeResult) -> String {
    format!(
        "Classifying {} genes as differentially expressed in {} test(s); method {}; top raw p {}",
        res.genes(),
        res.families.len(),
        res.test_method,
        res.families
            .first()
            .and_then(|f| f.raw_p.iter().copied().reduce(f64::min))
            .map(fmt_f64)
            .unwrap_or_else(|| "NA".into())
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffexpr::{de_genes_two_groups, DeOptions, DeTest};
    use crate::normalize::test_fixtures::from_w;
    use crate::rng::{standard_normal, stream};

    fn four_level_ds(genes: usize, seed: u64) -> NormalizedDataset {
        // 20 samples over 4 tissue levels
        let levels = ["Aeso", "Aest", "Neso", "Nest"];
        let labels: Vec<&str> = (0..20).map(|c| levels[c % 4]).collect();
        let mut rng = stream(seed, &[50]);
        let mut w = Matrix::nan(genes, 20);
        for g in 0..genes {
            for c in 0..20 {
                w.set(g, c, standard_normal(&mut rng));
            }
        }
        from_w(w, "Tissue", &labels)
    }

    #[test]
    fn four_level_design_has_expected_shape() {
        let ds = four_level_ds(10, 1);
        let design = design_anova(&ds, &["Tissue"]).unwrap();
        assert_eq!(design.design.rows(), 20);
        assert_eq!(design.design.cols(), 4); // intercept + 3 indicators
        assert_eq!(design.contrasts.rows(), 4);
        assert_eq!(design.contrasts.cols(), 6); // C(4,2) pairwise
        assert_eq!(design.condition_names.len(), 4);
    }

    #[test]
    fn two_level_contrast_is_the_mean_difference() {
        let w = Matrix::from_vec(
            1,
            6,
            vec![1.0, 2.0, 3.0, 5.0, 6.0, 7.0],
        );
        let ds = from_w(w, "Type", &["A", "A", "A", "B", "B", "B"]);
        let design = design_anova(&ds, &["Type"]).unwrap();
        assert_eq!(design.contrasts.cols(), 1);
        let res = fit_anova(&ds, &design, false, AdjustMethod::None).unwrap();
        // contrast B - A = 6 - 2 = 4
        assert!((res.families[0].effect[0] - 4.0).abs() < 1e-10);
    }

    #[test]
    fn aliased_factors_are_rank_deficient() {
        let w = Matrix::filled(3, 6, 0.0);
        let mut ds = from_w(w, "Type", &["A", "A", "A", "B", "B", "B"]);
        // second label perfectly aliased with the first
        let names = vec!["Type".to_string(), "Copy".to_string()];
        let col: Vec<String> =
            ds.samples.labels.values("Type").unwrap().to_vec();
        ds.samples.labels =
            crate::ingest::LabelTable::new(names, vec![col.clone(), col]);
        assert!(matches!(
            design_anova(&ds, &["Type", "Copy"]),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn identical_means_give_f_zero_p_one() {
        // every condition sees the same values, noise free
        let w = Matrix::from_vec(1, 8, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let ds = from_w(w, "Tissue", &["A", "A", "B", "B", "C", "C", "D", "D"]);
        let design = design_anova(&ds, &["Tissue"]).unwrap();
        let res = fit_anova(&ds, &design, true, AdjustMethod::None).unwrap();
        assert_eq!(res.families[0].statistic[0], 0.0);
        assert_eq!(res.families[0].raw_p[0], 1.0);
    }

    #[test]
    fn two_level_f_equals_pooled_t_squared() {
        let ds = {
            let mut rng = stream(77, &[2]);
            let mut w = Matrix::nan(40, 12);
            for g in 0..40 {
                for c in 0..12 {
                    w.set(g, c, standard_normal(&mut rng) + if c >= 6 { 0.3 } else { 0.0 });
                }
            }
            from_w(
                w,
                "Type",
                &["A", "A", "A", "A", "A", "A", "B", "B", "B", "B", "B", "B"],
            )
        };
        let design = design_anova(&ds, &["Type"]).unwrap();
        let f_res = fit_anova(&ds, &design, true, AdjustMethod::None).unwrap();
        let t_res = de_genes_two_groups(
            &ds,
            "Type",
            &DeOptions { test: DeTest::T { pooled: true }, adjust: AdjustMethod::None, seed: 0 },
        )
        .unwrap();
        let c_res = fit_anova(&ds, &design, false, AdjustMethod::None).unwrap();
        for g in 0..40 {
            let f = f_res.families[0].statistic[g];
            let t = t_res.families[0].statistic[g];
            assert!((f - t * t).abs() < 1e-9, "gene {g}: F = {f}, t^2 = {}", t * t);
            assert!((f_res.families[0].raw_p[g] - t_res.families[0].raw_p[g]).abs() < 1e-9);
            // the single contrast t matches the pooled two-group t
            let ct = c_res.families[0].statistic[g];
            assert!((ct - t).abs() < 1e-9);
        }
    }

    #[test]
    fn planted_level_shift_ranks_first() {
        let mut ds = four_level_ds(50, 9);
        // shift gene 7 in level Nest by 5 sigma
        let labels = ds.samples.labels.values("Tissue").unwrap().to_vec();
        for (c, l) in labels.iter().enumerate() {
            if l == "Nest" {
                let v = ds.w.at(7, c) + 5.0;
                ds.w.set(7, c, v);
            }
        }
        let design = design_anova(&ds, &["Tissue"]).unwrap();
        let res = fit_anova(&ds, &design, true, AdjustMethod::Bh).unwrap();
        let fam = &res.families[0];
        let best = (0..50)
            .min_by(|&a, &b| fam.adj_p[a].partial_cmp(&fam.adj_p[b]).unwrap())
            .unwrap();
        assert_eq!(res.gene_ids[best], "G007");
    }

    #[test]
    fn zero_residual_df_errors() {
        let w = Matrix::filled(2, 4, 0.0);
        let ds = from_w(w, "Tissue", &["A", "B", "C", "D"]);
        let design = design_anova(&ds, &["Tissue"]).unwrap();
        assert!(matches!(
            fit_anova(&ds, &design, true, AdjustMethod::None),
            Err(Error::ZeroResidualDf)
        ));
    }

    #[test]
    fn missing_cells_reduce_per_gene_df_and_skip() {
        let mut ds = four_level_ds(5, 33);
        // gene 2: leave only 4 finite values -> residual df 0 -> skipped
        for c in 4..20 {
            ds.w.set(2, c, f64::NAN);
        }
        let design = design_anova(&ds, &["Tissue"]).unwrap();
        let res = fit_anova(&ds, &design, true, AdjustMethod::None).unwrap();
        assert_eq!(res.genes(), 4);
        assert_eq!(res.skipped.len(), 1);
        assert_eq!(res.skipped[0].0, "G002");
    }

    #[test]
    fn gene_condition_values_split_by_level() {
        let w = Matrix::from_vec(2, 4, vec![1.0, 2.0, 3.0, 4.0, 9.0, 9.0, 9.0, 9.0]);
        let ds = from_w(w, "Tissue", &["X", "X", "Y", "Y"]);
        let groups = gene_condition_values(&ds, "Name", "G000", "Tissue").unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].0, "X");
        assert_eq!(groups[0].1, vec![1.0, 2.0]);
        assert_eq!(groups[1].1, vec![3.0, 4.0]);
        assert!(gene_condition_values(&ds, "Name", "NOPE", "Tissue").is_err());
    }
}
