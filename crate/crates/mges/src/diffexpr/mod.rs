//! Gene-wise differential expression between two sample classes, plus the
//! ANOVA path for multi-level designs (see [`anova`]).
//!
//! Genes without at least two finite values per group are skipped and
//! reported, never fabricated. The per-gene statistic is oriented so its
//! sign agrees with the fold change (second lexicographic level minus the
//! first).

pub mod anova;

pub use anova::{design_anova, fit_anova, AnovaDesign};

use crate::ingest::LabelTable;
use crate::matrix::{finite_mean, Matrix};
use crate::normalize::NormalizedDataset;
use crate::report::{fmt_f64, render_csv, render_html, TableFormat};
use crate::rng::derive_seed;
use crate::stat::{
    adjust_pvalues, bootstrap_t, pooled_t, welch_t, wilcoxon_rank_sum, AdjustMethod,
    ResampleMode,
};
use crate::{Error, Result};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeTest {
    /// Welch by default; pooled variance matches the 2-level ANOVA F.
    T { pooled: bool },
    Wilcoxon,
    BootT { b: usize },
}

impl DeTest {
    pub fn name(&self) -> &'static str {
        match self {
            DeTest::T { pooled: false } => "t",
            DeTest::T { pooled: true } => "t-pooled",
            DeTest::Wilcoxon => "wilcox",
            DeTest::BootT { .. } => "bootT",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeOptions {
    pub test: DeTest,
    pub adjust: AdjustMethod,
    pub seed: u64,
}

/// One statistic family: a named column set over the tested genes.
#[derive(Debug, Clone, PartialEq)]
pub struct StatFamily {
    pub name: String,
    /// Estimated effect in log2 units (fold change / contrast estimate).
    pub effect: Vec<f64>,
    pub statistic: Vec<f64>,
    pub raw_p: Vec<f64>,
    pub adj_p: Vec<f64>,
}

/// Differential-expression result. `w` retains the tested genes' data for
/// downstream clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub gene_ids: Vec<String>,
    pub gene_labels: LabelTable,
    pub families: Vec<StatFamily>,
    pub group_means: Matrix,
    pub level_names: Vec<String>,
    pub fold_change: Vec<f64>,
    pub test_method: String,
    pub sample_label_id: String,
    pub adjust_method: AdjustMethod,
    pub w: Matrix,
    pub sample_names: Vec<String>,
    pub sample_level: Vec<String>,
    /// (gene id, reason) for genes that could not be tested.
    pub skipped: Vec<(String, String)>,
}

impl DeResult {
    pub fn genes(&self) -> usize {
        self.gene_ids.len()
    }
}

/// The two distinct label levels, lexicographic, over nonempty values.
fn two_levels(values: &[String], label: &str) -> Result<(String, String)> {
    let mut levels: Vec<&String> = values.iter().filter(|v| !v.is_empty()).collect();
    levels.sort();
    levels.dedup();
    if levels.len() != 2 {
        return Err(Error::LabelArity { label: label.to_string(), levels: levels.len() });
    }
    Ok((levels[0].clone(), levels[1].clone()))
}

/// Test every gene for a mean difference between the two levels of
/// `s_label`. Fold change is `mean(level2) - mean(level1)` with levels in
/// lexicographic order; the statistic is oriented the same way.
pub fn de_genes_two_groups(
    ds: &NormalizedDataset,
    s_label: &str,
    opts: &DeOptions,
) -> Result<DeResult> {
    let values = ds.samples.labels.values(s_label)?.to_vec();
    let (level1, level2) = two_levels(&values, s_label)?;
    let retained: Vec<usize> =
        (0..ds.chips()).filter(|&c| !values[c].is_empty()).collect();
    let gene_ids = ds.gene_ids();

    struct GeneOutcome {
        idx: usize,
        statistic: f64,
        raw_p: f64,
        mean1: f64,
        mean2: f64,
    }

    let outcomes: Vec<std::result::Result<GeneOutcome, (usize, String)>> = (0..ds.genes())
        .into_par_iter()
        .map(|g| {
            let mut x1 = Vec::new();
            let mut x2 = Vec::new();
            for &c in &retained {
                let v = ds.w.at(g, c);
                if !v.is_finite() {
                    continue;
                }
                if values[c] == level1 {
                    x1.push(v);
                } else {
                    x2.push(v);
                }
            }
            if x1.len() < 2 || x2.len() < 2 {
                return Err((
                    g,
                    format!(
                        "needs >= 2 finite values per group, found {} vs {}",
                        x1.len(),
                        x2.len()
                    ),
                ));
            }
            // statistic oriented as level2 vs level1
            let test = match opts.test {
                DeTest::T { pooled: false } => welch_t(&x2, &x1),
                DeTest::T { pooled: true } => pooled_t(&x2, &x1),
                DeTest::Wilcoxon => wilcoxon_rank_sum(&x2, &x1, false),
                DeTest::BootT { b } => bootstrap_t(
                    &x2,
                    &x1,
                    b,
                    derive_seed(opts.seed, &[g as u64]),
                    ResampleMode::Permutation,
                ),
            };
            match test {
                Ok(r) => Ok(GeneOutcome {
                    idx: g,
                    statistic: r.statistic,
                    raw_p: r.p_value,
                    mean1: finite_mean(&x1),
                    mean2: finite_mean(&x2),
                }),
                Err(e) => Err((g, e.to_string())),
            }
        })
        .collect();

    let mut tested = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(o) => tested.push(o),
            Err((g, reason)) => skipped.push((gene_ids[g].clone(), reason)),
        }
    }

    let raw_p: Vec<f64> = tested.iter().map(|o| o.raw_p).collect();
    let adj_p = adjust_pvalues(&raw_p, opts.adjust)?;
    let effect: Vec<f64> = tested.iter().map(|o| o.mean2 - o.mean1).collect();
    let rows: Vec<usize> = tested.iter().map(|o| o.idx).collect();
    let mut group_means = Matrix::nan(tested.len(), 2);
    for (i, o) in tested.iter().enumerate() {
        group_means.set(i, 0, o.mean1);
        group_means.set(i, 1, o.mean2);
    }

    let family = StatFamily {
        name: opts.test.name().to_string(),
        effect: effect.clone(),
        statistic: tested.iter().map(|o| o.statistic).collect(),
        raw_p,
        adj_p,
    };
    Ok(DeResult {
        gene_ids: rows.iter().map(|&g| gene_ids[g].clone()).collect(),
        gene_labels: ds.gene_map.select_rows(&rows),
        families: vec![family],
        group_means,
        level_names: vec![level1, level2],
        fold_change: effect,
        test_method: opts.test.name().to_string(),
        sample_label_id: s_label.to_string(),
        adjust_method: opts.adjust,
        w: ds.w.select_rows(&rows).select_cols(&retained),
        sample_names: retained.iter().map(|&c| ds.samples.file_names[c].clone()).collect(),
        sample_level: retained.iter().map(|&c| values[c].clone()).collect(),
        skipped,
    })
}

/// Volcano plot coordinates for one statistic family: per tested gene,
/// `(effect, -log10 raw p)`. A raw p of zero maps to one more than the
/// largest finite ordinate.
pub fn volcano_data(res: &DeResult, family: usize) -> Vec<(f64, f64)> {
    let fam = &res.families[family];
    let ys: Vec<f64> = fam.raw_p.iter().map(|&p| -p.log10()).collect();
    let max_finite = ys.iter().copied().filter(|y| y.is_finite()).fold(0.0f64, f64::max);
    fam.effect
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (x, if y.is_finite() { y } else { max_finite + 1.0 }))
        .collect()
}

/// Tabulate one family of a DE result, sorted by adjusted then raw
/// p-value then gene id. Deterministic for identical input.
pub fn de_table(
    res: &DeResult,
    family: usize,
    format: TableFormat,
    top_n: Option<usize>,
) -> String {
    let fam = &res.families[family];
    let mut order: Vec<usize> = (0..res.genes()).collect();
    order.sort_by(|&a, &b| {
        fam.adj_p[a]
            .partial_cmp(&fam.adj_p[b])
            .unwrap()
            .then(fam.raw_p[a].partial_cmp(&fam.raw_p[b]).unwrap())
            .then(res.gene_ids[a].cmp(&res.gene_ids[b]))
    });
    if let Some(n) = top_n {
        order.truncate(n);
    }
    let mut headers: Vec<String> = vec!["geneId".into()];
    headers.extend(res.gene_labels.names().iter().cloned());
    for level in &res.level_names {
        headers.push(format!("mean:{level}"));
    }
    headers.extend(
        ["foldChange", "statistic", "rawP", "adjP"].iter().map(|s| s.to_string()),
    );
    let rows: Vec<Vec<String>> = order
        .iter()
        .map(|&i| {
            let mut row = vec![res.gene_ids[i].clone()];
            row.extend(res.gene_labels.row(i));
            for level_idx in 0..res.level_names.len() {
                row.push(fmt_f64(res.group_means.at(i, level_idx)));
            }
            row.push(fmt_f64(fam.effect[i]));
            row.push(fmt_f64(fam.statistic[i]));
            row.push(fmt_f64(fam.raw_p[i]));
            row.push(fmt_f64(fam.adj_p[i]));
            row
        })
        .collect();
    match format {
        TableFormat::Csv => render_csv(&headers, &rows),
        TableFormat::Html => render_html(
            &format!("Differential expression ({} by {})", fam.name, res.sample_label_id),
            &headers,
            &rows,
        ),
    }
}
