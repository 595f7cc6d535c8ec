//! Small-subset classifier search: every gene pair/trio/quartet from a
//! pool is scored by leave-one-out cross-validation under Fisher LDA or
//! kNN, exhaustively or with the search-and-choose shortcut that first
//! ranks single genes.

use crate::ingest::GeneGroup;
use crate::linalg::{cholesky, cholesky_solve};
use crate::matrix::Matrix;
use crate::normalize::NormalizedDataset;
use crate::report::{fmt_f64, render_csv, render_html, TableFormat};
use crate::stat::welch_t;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassMethod {
    Lda,
    Knn { k: usize },
}

impl ClassMethod {
    pub fn name(&self) -> String {
        match self {
            ClassMethod::Lda => "lda".to_string(),
            ClassMethod::Knn { k } => format!("knn{k}"),
        }
    }
}

/// Leave-one-out Fisher LDA accuracy over `x` (samples x features) with
/// binary labels. The pooled within-class covariance is ridge-regularized
/// with `1e-6 * trace / dim` so collinear features stay solvable.
pub fn lda_loocv(x: &Matrix, labels: &[u8]) -> Result<(f64, Vec<u8>)> {
    let n = x.rows();
    let dim = x.cols();
    if labels.len() != n {
        return Err(Error::InvalidParam("label count must match sample count".into()));
    }
    // a singleton class would leave an empty training class in its fold
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones < 2 || n - ones < 2 {
        return Err(Error::EmptyClass);
    }
    let mut predictions = vec![0u8; n];
    let mut correct = 0usize;
    for held in 0..n {
        let mut mean0 = vec![0.0; dim];
        let mut mean1 = vec![0.0; dim];
        let (mut n0, mut n1) = (0usize, 0usize);
        for i in 0..n {
            if i == held {
                continue;
            }
            let row = x.row(i);
            if labels[i] == 0 {
                n0 += 1;
                for (m, &v) in mean0.iter_mut().zip(row) {
                    *m += v;
                }
            } else {
                n1 += 1;
                for (m, &v) in mean1.iter_mut().zip(row) {
                    *m += v;
                }
            }
        }
        if n0 == 0 || n1 == 0 {
            return Err(Error::EmptyClass);
        }
        for m in mean0.iter_mut() {
            *m /= n0 as f64;
        }
        for m in mean1.iter_mut() {
            *m /= n1 as f64;
        }
        // pooled within-class covariance
        let mut cov = vec![0.0; dim * dim];
        for i in 0..n {
            if i == held {
                continue;
            }
            let row = x.row(i);
            let mean = if labels[i] == 0 { &mean0 } else { &mean1 };
            for a in 0..dim {
                let da = row[a] - mean[a];
                for b in 0..dim {
                    cov[a * dim + b] += da * (row[b] - mean[b]);
                }
            }
        }
        let denom = (n0 + n1).saturating_sub(2).max(1) as f64;
        let mut trace = 0.0;
        for v in cov.iter_mut() {
            *v /= denom;
        }
        for a in 0..dim {
            trace += cov[a * dim + a];
        }
        let ridge = 1e-6 * trace / dim as f64;
        for a in 0..dim {
            cov[a * dim + a] += ridge;
        }
        let chol = cholesky(&cov, dim).ok_or(Error::RankDeficient)?;
        let diff: Vec<f64> = mean0.iter().zip(&mean1).map(|(a, b)| a - b).collect();
        let w = cholesky_solve(&chol, dim, &diff);
        let mid: Vec<f64> =
            mean0.iter().zip(&mean1).map(|(a, b)| (a + b) / 2.0).collect();
        let threshold: f64 = w.iter().zip(&mid).map(|(a, b)| a * b).sum();
        let score: f64 = w.iter().zip(x.row(held)).map(|(a, &b)| a * b).sum();
        // w points from class 1 toward class 0
        let predicted = if score > threshold { 0u8 } else { 1u8 };
        predictions[held] = predicted;
        if predicted == labels[held] {
            correct += 1;
        }
    }
    Ok((correct as f64 / n as f64, predictions))
}

/// Leave-one-out kNN accuracy with Euclidean distance and majority vote.
/// Vote ties go to the class with the smaller summed distance, then to
/// the smaller class index.
pub fn knn_loocv(x: &Matrix, labels: &[u8], k: usize) -> Result<(f64, Vec<u8>)> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let mut predictions = vec![0u8; n];
    let mut correct = 0usize;
    for held in 0..n {
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&i| i != held)
            .map(|i| {
                let d: f64 = x
                    .row(i)
                    .iter()
                    .zip(x.row(held))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d, i)
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let neighbors = &dists[..k];
        let (mut votes0, mut votes1) = (0usize, 0usize);
        let (mut dist0, mut dist1) = (0.0f64, 0.0f64);
        for &(d, i) in neighbors {
            if labels[i] == 0 {
                votes0 += 1;
                dist0 += d.sqrt();
            } else {
                votes1 += 1;
                dist1 += d.sqrt();
            }
        }
        let predicted = match votes0.cmp(&votes1) {
            std::cmp::Ordering::Greater => 0u8,
            std::cmp::Ordering::Less => 1u8,
            std::cmp::Ordering::Equal => match dist0.partial_cmp(&dist1).unwrap() {
                std::cmp::Ordering::Less => 0u8,
                std::cmp::Ordering::Greater => 1u8,
                std::cmp::Ordering::Equal => 0u8, // lexicographically first class
            },
        };
        predictions[held] = predicted;
        if predicted == labels[held] {
            correct += 1;
        }
    }
    Ok((correct as f64 / n as f64, predictions))
}

/// Where the candidate genes come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GenePool {
    /// A registered gene group, by name or 1-based index.
    Group(String),
    /// The node set of a registered network, by name or 1-based index.
    Network(String),
    /// Every gene with complete data.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSubset {
    pub gene_rows: Vec<usize>,
    pub gene_names: Vec<String>,
    pub cv_accuracy: f64,
    /// predicted class level per sample, in sample order
    pub predictions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierResult {
    pub subsets: Vec<ClassifierSubset>,
    pub method: ClassMethod,
    pub n_genes: usize,
    pub search_space_size: u64,
    pub sample_label_id: String,
    pub class_levels: [String; 2],
    pub sample_names: Vec<String>,
    /// search-and-choose only: size of the reduced pool actually searched
    pub heuristic_pool: Option<Vec<String>>,
    /// genes dropped from the pool for missing data
    pub dropped: Vec<String>,
}

pub struct SearchInputs {
    x_by_gene: Vec<Vec<f64>>, // per pool gene: values over retained samples
    labels: Vec<u8>,
    pool_rows: Vec<usize>,
    pool_names: Vec<String>,
    levels: [String; 2],
    sample_names: Vec<String>,
    dropped: Vec<String>,
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out = 1u128;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(out).unwrap_or(u64::MAX)
}

fn resolve_pool(ds: &NormalizedDataset, pool: &GenePool) -> Result<Vec<usize>> {
    match pool {
        GenePool::All => Ok((0..ds.genes()).collect()),
        GenePool::Group(key) => {
            let group = find_group(&ds.gene_groups, key)?;
            let (rows, _) = group.resolve(&ds.gene_map)?;
            Ok(rows)
        }
        GenePool::Network(key) => {
            let idx = find_index(ds.gene_networks.iter().map(|n| n.name.as_str()), key)
                .ok_or_else(|| Error::UnknownLabel { label: key.clone() })?;
            let net = &ds.gene_networks[idx];
            let group = GeneGroup {
                name: net.name.clone(),
                label_id: net.label_id.clone(),
                members: net.nodes(),
            };
            let (rows, _) = group.resolve(&ds.gene_map)?;
            Ok(rows)
        }
    }
}

/// Accepts a name or a 1-based index into the registered list.
fn find_index<'a>(names: impl Iterator<Item = &'a str>, key: &str) -> Option<usize> {
    let names: Vec<&str> = names.collect();
    if let Some(pos) = names.iter().position(|n| *n == key) {
        return Some(pos);
    }
    key.parse::<usize>().ok().filter(|&i| i >= 1 && i <= names.len()).map(|i| i - 1)
}

pub(crate) fn find_group<'a>(groups: &'a [GeneGroup], key: &str) -> Result<&'a GeneGroup> {
    find_index(groups.iter().map(|g| g.name.as_str()), key)
        .map(|i| &groups[i])
        .ok_or_else(|| Error::UnknownLabel { label: key.to_string() })
}

fn prepare(ds: &NormalizedDataset, s_label: &str, pool: &GenePool) -> Result<SearchInputs> {
    let values = ds.samples.labels.values(s_label)?.to_vec();
    let mut levels: Vec<String> = values.iter().filter(|v| !v.is_empty()).cloned().collect();
    levels.sort();
    levels.dedup();
    if levels.len() != 2 {
        return Err(Error::LabelArity { label: s_label.to_string(), levels: levels.len() });
    }
    let retained: Vec<usize> = (0..ds.chips()).filter(|&c| !values[c].is_empty()).collect();
    let labels: Vec<u8> =
        retained.iter().map(|&c| if values[c] == levels[0] { 0u8 } else { 1u8 }).collect();

    let candidate_rows = resolve_pool(ds, pool)?;
    let gene_ids = ds.gene_ids();
    let mut x_by_gene = Vec::new();
    let mut pool_rows = Vec::new();
    let mut pool_names = Vec::new();
    let mut dropped = Vec::new();
    for &g in &candidate_rows {
        let vals: Vec<f64> = retained.iter().map(|&c| ds.w.at(g, c)).collect();
        if vals.iter().all(|v| v.is_finite()) {
            x_by_gene.push(vals);
            pool_rows.push(g);
            pool_names.push(gene_ids[g].clone());
        } else {
            dropped.push(gene_ids[g].clone());
        }
    }
    Ok(SearchInputs {
        x_by_gene,
        labels,
        pool_rows,
        pool_names,
        levels: [levels[0].clone(), levels[1].clone()],
        sample_names: retained.iter().map(|&c| ds.samples.file_names[c].clone()).collect(),
        dropped,
    })
}

fn evaluate_subset(
    inputs: &SearchInputs,
    subset: &[usize],
    method: ClassMethod,
) -> Result<(f64, Vec<u8>)> {
    let n = inputs.labels.len();
    let mut x = Matrix::filled(n, subset.len(), 0.0);
    for (j, &gi) in subset.iter().enumerate() {
        for i in 0..n {
            x.set(i, j, inputs.x_by_gene[gi][i]);
        }
    }
    match method {
        ClassMethod::Lda => lda_loocv(&x, &inputs.labels),
        ClassMethod::Knn { k } => knn_loocv(&x, &inputs.labels, k),
    }
}

/// Lexicographic k-subsets of 0..n.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(current.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

fn search(
    inputs: &SearchInputs,
    pool_subset: Option<&[usize]>, // indices into inputs pool
    method: ClassMethod,
    n_genes: usize,
    top_k: usize,
) -> Result<Vec<ClassifierSubset>> {
    let pool: Vec<usize> = match pool_subset {
        Some(sub) => sub.to_vec(),
        None => (0..inputs.x_by_gene.len()).collect(),
    };
    if pool.len() < n_genes {
        return Err(Error::PoolTooSmall { pool: pool.len(), needed: n_genes });
    }
    let combos = combinations(pool.len(), n_genes);
    let scored: Vec<Result<(Vec<usize>, f64, Vec<u8>)>> = combos
        .par_iter()
        .map(|combo| {
            // canonical ascending order so a reduced (ranked) pool yields
            // the same evaluation and tie-breaks as the full search
            let mut subset: Vec<usize> = combo.iter().map(|&i| pool[i]).collect();
            subset.sort_unstable();
            let (acc, preds) = evaluate_subset(inputs, &subset, method)?;
            Ok((subset, acc, preds))
        })
        .collect();
    let mut scored_ok = Vec::with_capacity(scored.len());
    for s in scored {
        scored_ok.push(s?);
    }
    // rank: accuracy desc, then smaller summed dataset row indices, then
    // lexicographic subset
    scored_ok.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| {
                let sa: usize = a.0.iter().map(|&i| inputs.pool_rows[i]).sum();
                let sb: usize = b.0.iter().map(|&i| inputs.pool_rows[i]).sum();
                sa.cmp(&sb)
            })
            .then_with(|| a.0.cmp(&b.0))
    });
    scored_ok.truncate(top_k);
    Ok(scored_ok
        .into_iter()
        .map(|(subset, acc, preds)| ClassifierSubset {
            gene_rows: subset.iter().map(|&i| inputs.pool_rows[i]).collect(),
            gene_names: subset.iter().map(|&i| inputs.pool_names[i].clone()).collect(),
            cv_accuracy: acc,
            predictions: preds
                .iter()
                .map(|&p| inputs.levels[p as usize].clone())
                .collect(),
        })
        .collect())
}

/// Score every `n_genes`-subset of the pool by LOOCV and keep the best
/// `top_k`, ranked by accuracy with deterministic tie-breaks.
pub fn exhaustive_search(
    ds: &NormalizedDataset,
    s_label: &str,
    pool: &GenePool,
    method: ClassMethod,
    n_genes: usize,
    top_k: usize,
) -> Result<ClassifierResult> {
    if !(2..=4).contains(&n_genes) {
        return Err(Error::Usage(format!("nGenes = {n_genes} must be 2, 3, or 4")));
    }
    let inputs = prepare(ds, s_label, pool)?;
    let subsets = search(&inputs, None, method, n_genes, top_k)?;
    Ok(ClassifierResult {
        subsets,
        method,
        n_genes,
        search_space_size: binomial(inputs.x_by_gene.len() as u64, n_genes as u64),
        sample_label_id: s_label.to_string(),
        class_levels: inputs.levels.clone(),
        sample_names: inputs.sample_names.clone(),
        heuristic_pool: None,
        dropped: inputs.dropped.clone(),
    })
}

/// How search-and-choose pre-ranks single genes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    /// 1-gene LOOCV accuracy, ties by |Welch t| then row index.
    SingleGeneCv,
    /// |Welch t| alone.
    DeStatistic,
}

/// Search-and-choose: rank single genes, keep the best `pool_size`, and
/// search exhaustively inside that reduced pool.
#[allow(clippy::too_many_arguments)]
pub fn search_and_choose(
    ds: &NormalizedDataset,
    s_label: &str,
    pool: &GenePool,
    method: ClassMethod,
    n_genes: usize,
    pool_size: usize,
    rank_by: RankBy,
    top_k: usize,
) -> Result<ClassifierResult> {
    if !(2..=4).contains(&n_genes) {
        return Err(Error::Usage(format!("nGenes = {n_genes} must be 2, 3, or 4")));
    }
    if pool_size < n_genes {
        return Err(Error::PoolTooSmall { pool: pool_size, needed: n_genes });
    }
    let inputs = prepare(ds, s_label, pool)?;
    let total = inputs.x_by_gene.len();
    if total < n_genes {
        return Err(Error::PoolTooSmall { pool: total, needed: n_genes });
    }

    // per-gene |t| between the classes, for ranking and tie-breaks
    let t_abs: Vec<f64> = (0..total)
        .map(|gi| {
            let xs: Vec<f64> = inputs.x_by_gene[gi]
                .iter()
                .zip(&inputs.labels)
                .filter(|(_, &l)| l == 0)
                .map(|(&v, _)| v)
                .collect();
            let ys: Vec<f64> = inputs.x_by_gene[gi]
                .iter()
                .zip(&inputs.labels)
                .filter(|(_, &l)| l == 1)
                .map(|(&v, _)| v)
                .collect();
            welch_t(&xs, &ys).map(|r| r.statistic.abs()).unwrap_or(0.0)
        })
        .collect();

    let mut ranked: Vec<usize> = (0..total).collect();
    match rank_by {
        RankBy::SingleGeneCv => {
            let single_cv: Vec<f64> = (0..total)
                .into_par_iter()
                .map(|gi| {
                    evaluate_subset(&inputs, &[gi], method).map(|(acc, _)| acc).unwrap_or(0.0)
                })
                .collect();
            ranked.sort_by(|&a, &b| {
                single_cv[b]
                    .partial_cmp(&single_cv[a])
                    .unwrap()
                    .then(t_abs[b].partial_cmp(&t_abs[a]).unwrap())
                    .then(a.cmp(&b))
            });
        }
        RankBy::DeStatistic => {
            ranked.sort_by(|&a, &b| t_abs[b].partial_cmp(&t_abs[a]).unwrap().then(a.cmp(&b)));
        }
    }
    let reduced: Vec<usize> = ranked.into_iter().take(pool_size.min(total)).collect();
    let subsets = search(&inputs, Some(&reduced), method, n_genes, top_k)?;
    Ok(ClassifierResult {
        subsets,
        method,
        n_genes,
        search_space_size: binomial(reduced.len() as u64, n_genes as u64),
        sample_label_id: s_label.to_string(),
        class_levels: inputs.levels.clone(),
        sample_names: inputs.sample_names.clone(),
        heuristic_pool: Some(
            reduced.iter().map(|&i| inputs.pool_names[i].clone()).collect(),
        ),
        dropped: inputs.dropped.clone(),
    })
}

/// Tabulate ranked classifier subsets.
pub fn class_table(res: &ClassifierResult, format: TableFormat) -> String {
    let headers: Vec<String> =
        ["rank", "genes", "cvAccuracy", "method"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = res
        .subsets
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                (i + 1).to_string(),
                s.gene_names.join(" + "),
                fmt_f64(s.cv_accuracy),
                res.method.name(),
            ]
        })
        .collect();
    match format {
        TableFormat::Csv => render_csv(&headers, &rows),
        TableFormat::Html => render_html(
            &format!("{} classifiers of {} genes", res.subsets.len(), res.n_genes),
            &headers,
            &rows,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::test_fixtures::from_w;
    use crate::rng::{standard_normal, stream};
    use rand::Rng;

    fn two_cloud_matrix(n_per: usize, sep: f64, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = stream(seed, &[77]);
        let n = 2 * n_per;
        let mut x = Matrix::filled(n, 2, 0.0);
        let mut labels = vec![0u8; n];
        for i in 0..n_per {
            x.set(i, 0, standard_normal(&mut rng));
            x.set(i, 1, standard_normal(&mut rng));
            x.set(n_per + i, 0, sep + standard_normal(&mut rng));
            x.set(n_per + i, 1, sep + standard_normal(&mut rng));
            labels[n_per + i] = 1;
        }
        (x, labels)
    }

    #[test]
    fn lda_separable_clouds_are_perfect() {
        let (x, labels) = two_cloud_matrix(10, 12.0, 1);
        let (acc, preds) = lda_loocv(&x, &labels).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(preds, labels);
    }

    #[test]
    fn lda_null_labels_hover_near_chance() {
        // random labels on isotropic noise: accuracy must stay well away
        // from 1 for nearly all seeds
        let mut inside = 0;
        for seed in 0..20 {
            let mut rng = stream(seed, &[5]);
            let n = 50;
            let x = Matrix::from_fn(n, 2, |_, _| standard_normal(&mut rng));
            let labels: Vec<u8> = (0..n).map(|_| (rng.gen::<f64>() < 0.5) as u8).collect();
            if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
                continue;
            }
            let (acc, _) = lda_loocv(&x, &labels).unwrap();
            if (0.3..=0.7).contains(&acc) {
                inside += 1;
            }
        }
        assert!(inside >= 18, "null accuracy in [0.3, 0.7] for {inside}/20 seeds");
    }

    #[test]
    fn ridge_makes_duplicated_features_match_single_feature() {
        let (x1, labels) = two_cloud_matrix(8, 3.0, 9);
        // single feature
        let single = x1.select_cols(&[0]);
        let (acc1, preds1) = lda_loocv(&single, &labels).unwrap();
        // identical duplicated feature
        let dup = Matrix::from_fn(single.rows(), 2, |r, _| single.at(r, 0));
        let (acc2, preds2) = lda_loocv(&dup, &labels).unwrap();
        assert_eq!(acc1, acc2);
        assert_eq!(preds1, preds2);
    }

    #[test]
    fn lda_errors_on_empty_training_class() {
        let x = Matrix::filled(3, 1, 0.0);
        // class 1 has a single sample: held-out fold leaves it empty
        assert!(matches!(lda_loocv(&x, &[0, 0, 1]), Err(Error::EmptyClass)));
    }

    #[test]
    fn knn_rules() {
        // k=1 where each point's nearest neighbor shares its class
        let (x, labels) = two_cloud_matrix(6, 10.0, 3);
        let (acc, _) = knn_loocv(&x, &labels, 1).unwrap();
        assert_eq!(acc, 1.0);
        // k = n-1: every prediction is the majority of the rest
        let mut labels_74 = vec![0u8; 7];
        for l in labels_74.iter_mut().skip(4) {
            *l = 1;
        }
        let mut rng = stream(8, &[2]);
        let xr = Matrix::from_fn(7, 2, |_, _| standard_normal(&mut rng));
        let (_, preds) = knn_loocv(&xr, &labels_74, 6).unwrap();
        // holding out a 0 leaves 3 vs 3: tie broken by distance; holding
        // out a 1 leaves 4 vs 2 -> predict 0
        for (i, &p) in preds.iter().enumerate() {
            if labels_74[i] == 1 {
                assert_eq!(p, 0, "majority of the rest is class 0 at {i}");
            }
        }
        assert!(knn_loocv(&xr, &labels_74, 7).is_err());
    }

    #[test]
    fn knn_xor_fixture_scores_zero() {
        // 4-point XOR: each point's nearest neighbor has the opposite class
        let x = Matrix::from_vec(4, 2, vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.1, 1.0, -0.1]);
        let labels = [0u8, 0, 1, 1];
        let (acc, _) = knn_loocv(&x, &labels, 1).unwrap();
        assert_eq!(acc, 0.0);
    }

    fn classify_ds(pool: usize, planted: usize, seed: u64) -> NormalizedDataset {
        // genes 0..planted separate Col from Sq strongly; the rest are noise
        let mut rng = stream(seed, &[6]);
        let chips = 12;
        let mut w = Matrix::nan(pool, chips);
        for g in 0..pool {
            for c in 0..chips {
                let mut v = 0.4 * standard_normal(&mut rng);
                if g < planted && c >= 6 {
                    v += 3.0;
                }
                w.set(g, c, v);
            }
        }
        let labels: Vec<&str> =
            (0..chips).map(|c| if c < 6 { "Col" } else { "Sq" }).collect();
        let mut ds = from_w(w, "Type", &labels);
        let members: Vec<String> = (0..pool).map(|g| format!("G{g:03}")).collect();
        let (ds2, _) = ds.add_gene_groups_for_test("pool", &members);
        ds = ds2;
        ds
    }

    impl NormalizedDataset {
        fn add_gene_groups_for_test(
            mut self,
            name: &str,
            members: &[String],
        ) -> (Self, ()) {
            self.gene_groups.push(GeneGroup {
                name: name.to_string(),
                label_id: "Name".to_string(),
                members: members.to_vec(),
            });
            (self, ())
        }
    }

    #[test]
    fn eight_gene_pool_trios_search_space_is_56() {
        let ds = classify_ds(8, 3, 4);
        let res = exhaustive_search(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Lda,
            3,
            50,
        )
        .unwrap();
        assert_eq!(res.search_space_size, 56);
        assert_eq!(res.subsets.len(), 50);
    }

    #[test]
    fn pool_of_exactly_n_genes_evaluates_one_subset() {
        let ds = classify_ds(3, 2, 5);
        let res = exhaustive_search(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Lda,
            3,
            10,
        )
        .unwrap();
        assert_eq!(res.search_space_size, 1);
        assert_eq!(res.subsets.len(), 1);
    }

    #[test]
    fn planted_trio_ranks_first() {
        let ds = classify_ds(10, 3, 8);
        let res = exhaustive_search(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Lda,
            3,
            120,
        )
        .unwrap();
        let top = &res.subsets[0];
        assert_eq!(top.gene_rows, vec![0, 1, 2], "planted trio first: {:?}", top.gene_names);
        assert_eq!(top.cv_accuracy, 1.0);
        // ranking is non-increasing
        for w in res.subsets.windows(2) {
            assert!(w[0].cv_accuracy >= w[1].cv_accuracy);
        }
    }

    #[test]
    fn search_and_choose_with_full_pool_matches_exhaustive() {
        let ds = classify_ds(9, 3, 12);
        let full = exhaustive_search(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Lda,
            2,
            20,
        )
        .unwrap();
        let snc = search_and_choose(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Lda,
            2,
            9,
            RankBy::SingleGeneCv,
            20,
        )
        .unwrap();
        assert_eq!(full.search_space_size, snc.search_space_size);
        let a: Vec<_> = full.subsets.iter().map(|s| (&s.gene_rows, s.cv_accuracy)).collect();
        let b: Vec<_> = snc.subsets.iter().map(|s| (&s.gene_rows, s.cv_accuracy)).collect();
        assert_eq!(a, b);
        assert!(snc.heuristic_pool.is_some());
    }

    #[test]
    fn search_and_choose_shrinks_the_space_and_keeps_the_winner() {
        let ds = classify_ds(30, 3, 3);
        let snc = search_and_choose(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Lda,
            3,
            6,
            RankBy::SingleGeneCv,
            5,
        )
        .unwrap();
        assert_eq!(snc.search_space_size, binomial(6, 3));
        // the planted, individually strong genes survive the pre-ranking
        assert_eq!(snc.subsets[0].gene_rows, vec![0, 1, 2]);
        // never better than the exhaustive optimum on the same pool
        let full = exhaustive_search(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Lda,
            3,
            1,
        )
        .unwrap();
        assert!(snc.subsets[0].cv_accuracy <= full.subsets[0].cv_accuracy + 1e-12);
    }

    #[test]
    fn accuracy_is_invariant_under_sample_reorder_and_relabel() {
        let ds = classify_ds(6, 2, 21);
        let res = exhaustive_search(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Knn { k: 3 },
            2,
            3,
        )
        .unwrap();
        // reorder samples
        let perm: Vec<usize> = (0..12).rev().collect();
        let mut reordered = ds.clone();
        reordered.w = ds.w.select_cols(&perm);
        let names = ds.samples.labels.names().to_vec();
        let cols: Vec<Vec<String>> = names
            .iter()
            .map(|n| {
                let v = ds.samples.labels.values(n).unwrap();
                perm.iter().map(|&c| v[c].clone()).collect()
            })
            .collect();
        reordered.samples.labels = crate::ingest::LabelTable::new(names, cols);
        reordered.samples.file_names =
            perm.iter().map(|&c| ds.samples.file_names[c].clone()).collect();
        let res2 = exhaustive_search(
            &reordered,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Knn { k: 3 },
            2,
            3,
        )
        .unwrap();
        assert_eq!(res.subsets[0].cv_accuracy, res2.subsets[0].cv_accuracy);
        assert!((0.0..=1.0).contains(&res.subsets[0].cv_accuracy));
    }

    #[test]
    fn class_table_emits_ranked_rows() {
        let ds = classify_ds(5, 2, 2);
        let res = exhaustive_search(
            &ds,
            "Type",
            &GenePool::Group("pool".into()),
            ClassMethod::Lda,
            2,
            4,
        )
        .unwrap();
        let csv = class_table(&res, TableFormat::Csv);
        assert_eq!(csv.lines().count(), 5);
        let first_data = csv.lines().nth(1).unwrap();
        assert!(first_data.starts_with("1,"));
        // round-trip the accuracy column
        let acc: f64 = first_data.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(acc.to_bits(), res.subsets[0].cv_accuracy.to_bits());
        let html = class_table(&res, TableFormat::Html);
        assert!(html.contains("classifiers of 2 genes"));
    }
}
