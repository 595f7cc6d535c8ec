//! Relevance networks over gene groups (single condition and the
//! two-condition difference via Fisher Z), functional classification of
//! gene groups against the hypergeometric null, and a chi-square
//! combination score for gene networks.
//!
//! The network score combines per-edge zero-correlation p-values with
//! Fisher's method, `S = sum(-2 ln p) ~ chi-square(2m)`. That null
//! assumes independent edges, which co-expression networks only
//! approximate; treat small network p-values as a ranking device rather
//! than calibrated probabilities.

use crate::classify::find_group;
use crate::matrix::{finite_mean, Matrix};
use crate::normalize::NormalizedDataset;
use crate::rng;
use crate::stat::dist::{chi_sq_cdf, hypergeom_tail};
use crate::stat::{
    adjust_pvalues, fisher_z_compare, kraskov_mi, pearson, robust_cor, AdjustMethod,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MIN_CONDITION_SAMPLES: usize = 4;
const MI_PERMUTATIONS: usize = 999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorKind {
    Pearson,
    Robust,
    /// Kraskov mutual information with a seeded permutation p-value.
    Mi { k: usize },
}

impl CorKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "pearson" => CorKind::Pearson,
            "robust" => CorKind::Robust,
            "mi" => CorKind::Mi { k: 3 },
            other => return Err(Error::Usage(format!("unknown correlation kind `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorKind::Pearson => "pearson",
            CorKind::Robust => "robust",
            CorKind::Mi { .. } => "mi",
        }
    }
}

/// Sample data of one condition: W restricted to the pool genes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSlice {
    pub name: String,
    pub sample_names: Vec<String>,
    /// gene x sample, aligned with the parent net's gene order
    pub w: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelNetMode {
    /// One condition: association values with zero-association p-values.
    Single { condition: String, cor: Matrix, p: Matrix },
    /// Two conditions compared by Fisher Z: per-condition correlations,
    /// the Z difference, and its p-value.
    Difference { r_a: Matrix, r_b: Matrix, delta_z: Matrix, p: Matrix },
}

/// Relevance network over a gene group.
#[derive(Debug, Clone, PartialEq)]
pub struct RelNet {
    pub gene_ids: Vec<String>,
    pub mode: RelNetMode,
    /// (i, j, p) for retained pairs, i < j, p <= cut_pval
    pub edges: Vec<(usize, usize, f64)>,
    pub cut_pval: f64,
    pub cor_kind: CorKind,
    pub sample_label_id: String,
    pub conditions: Vec<ConditionSlice>,
    /// pool members skipped for ambiguity or missing data
    pub notes: Vec<String>,
}

/// Resolve a gene group to one dataset row per distinct member label.
/// Replicate rows are reported, not averaged; summarize first if that
/// matters.
fn pool_rows(
    ds: &NormalizedDataset,
    group_key: &str,
) -> Result<(Vec<usize>, Vec<String>, Vec<String>)> {
    let group = find_group(&ds.gene_groups, group_key)?;
    let values = ds.gene_map.values(&group.label_id)?;
    let mut rows = Vec::new();
    let mut names = Vec::new();
    let mut notes = Vec::new();
    let mut seen = Vec::new();
    for member in &group.members {
        if seen.contains(member) {
            continue;
        }
        seen.push(member.clone());
        let hits: Vec<usize> =
            (0..ds.genes()).filter(|&g| &values[g] == member).collect();
        match hits.len() {
            0 => notes.push(format!("unresolved member `{member}`")),
            1 => {
                rows.push(hits[0]);
                names.push(member.clone());
            }
            n => {
                rows.push(hits[0]);
                names.push(member.clone());
                notes.push(format!("member `{member}` matches {n} rows; using the first"));
            }
        }
    }
    Ok((rows, names, notes))
}

fn condition_samples(
    ds: &NormalizedDataset,
    s_label: &str,
    condition: &str,
) -> Result<Vec<usize>> {
    let values = ds.samples.labels.values(s_label)?;
    let cols: Vec<usize> =
        (0..ds.chips()).filter(|&c| values[c] == condition).collect();
    if cols.is_empty() {
        return Err(Error::UnknownCondition {
            condition: condition.to_string(),
            label: s_label.to_string(),
        });
    }
    if cols.len() < MIN_CONDITION_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_CONDITION_SAMPLES, found: cols.len() });
    }
    Ok(cols)
}

fn slice_condition(
    ds: &NormalizedDataset,
    rows: &[usize],
    cols: &[usize],
    name: &str,
) -> ConditionSlice {
    ConditionSlice {
        name: name.to_string(),
        sample_names: cols.iter().map(|&c| ds.samples.file_names[c].clone()).collect(),
        w: ds.w.select_rows(rows).select_cols(cols),
    }
}

/// Complete (finite in both) paired values of two genes.
fn paired(w: &Matrix, gi: usize, gj: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in 0..w.cols() {
        let a = w.at(gi, c);
        let b = w.at(gj, c);
        if a.is_finite() && b.is_finite() {
            xs.push(a);
            ys.push(b);
        }
    }
    (xs, ys)
}

fn check_constant_genes(slice: &ConditionSlice, names: &[String]) -> Result<()> {
    for (g, name) in names.iter().enumerate() {
        let finite: Vec<f64> =
            slice.w.row(g).iter().copied().filter(|v| v.is_finite()).collect();
        if finite.len() >= 2 && finite.iter().all(|&v| v == finite[0]) {
            return Err(Error::ConstantGene { gene: name.clone() });
        }
    }
    Ok(())
}

/// Permutation p-value for mutual information: permute one margin within
/// the condition, `p = (#{MI* >= MI} + 1) / (perms + 1)`.
fn mi_permutation_p(
    xs: &[f64],
    ys: &[f64],
    k: usize,
    seed: u64,
    pair: (usize, usize),
) -> Result<(f64, f64)> {
    let mi = kraskov_mi(xs, ys, k, rng::derive_seed(seed, &[pair.0 as u64, pair.1 as u64, 0]))?;
    let mut shuffled = ys.to_vec();
    let mut stream = rng::stream(seed, &[pair.0 as u64, pair.1 as u64, 1]);
    let mut hits = 0usize;
    for perm in 0..MI_PERMUTATIONS {
        rng::shuffle(&mut shuffled, &mut stream);
        let mi_star = kraskov_mi(
            xs,
            &shuffled,
            k,
            rng::derive_seed(seed, &[pair.0 as u64, pair.1 as u64, 2 + perm as u64]),
        )?;
        if mi_star >= mi - 1e-12 {
            hits += 1;
        }
    }
    Ok((mi, (hits as f64 + 1.0) / (MI_PERMUTATIONS as f64 + 1.0)))
}

/// Single-condition relevance network: all-pairs association over the
/// condition's samples, edges kept at `p <= cut_pval`.
pub fn rel_network_b(
    ds: &NormalizedDataset,
    s_label: &str,
    condition: &str,
    group_key: &str,
    kind: CorKind,
    cut_pval: f64,
    seed: u64,
) -> Result<RelNet> {
    let (rows, names, mut notes) = pool_rows(ds, group_key)?;
    if rows.len() < 2 {
        return Err(Error::PoolTooSmall { pool: rows.len(), needed: 2 });
    }
    let cols = condition_samples(ds, s_label, condition)?;
    let slice = slice_condition(ds, &rows, &cols, condition);
    check_constant_genes(&slice, &names)?;

    let n = rows.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let computed: Vec<Result<(f64, f64)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (xs, ys) = paired(&slice.w, i, j);
            if xs.len() < MIN_CONDITION_SAMPLES {
                return Ok((f64::NAN, f64::NAN)); // excluded, reported below
            }
            match kind {
                CorKind::Pearson => {
                    let est = pearson(&xs, &ys)?;
                    Ok((est.r, est.p_zero))
                }
                CorKind::Robust => {
                    let est = robust_cor(&xs, &ys)?;
                    Ok((est.r, est.p_zero))
                }
                CorKind::Mi { k } => mi_permutation_p(&xs, &ys, k, seed, (i, j)),
            }
        })
        .collect();

    let diag = if matches!(kind, CorKind::Mi { .. }) { f64::NAN } else { 1.0 };
    let mut cor = Matrix::from_fn(n, n, |i, j| if i == j { diag } else { f64::NAN });
    let mut p = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { f64::NAN });
    let mut edges = Vec::new();
    for (&(i, j), v) in pairs.iter().zip(computed) {
        let (r, pv) = v?;
        cor.set(i, j, r);
        cor.set(j, i, r);
        p.set(i, j, pv);
        p.set(j, i, pv);
        if pv.is_nan() {
            notes.push(format!(
                "pair {} - {} has fewer than {MIN_CONDITION_SAMPLES} complete samples",
                names[i], names[j]
            ));
        } else if pv <= cut_pval {
            edges.push((i, j, pv));
        }
    }
    Ok(RelNet {
        gene_ids: names,
        mode: RelNetMode::Single { condition: condition.to_string(), cor, p },
        edges,
        cut_pval,
        cor_kind: kind,
        sample_label_id: s_label.to_string(),
        conditions: vec![slice],
        notes,
    })
}

/// Two-condition relevance network: pairs whose Pearson correlation
/// differs between the conditions by the Fisher Z test.
pub fn rel_network_m(
    ds: &NormalizedDataset,
    s_label: &str,
    condition_a: &str,
    condition_b: &str,
    group_key: &str,
    cut_pval: f64,
) -> Result<RelNet> {
    let (rows, names, mut notes) = pool_rows(ds, group_key)?;
    if rows.len() < 2 {
        return Err(Error::PoolTooSmall { pool: rows.len(), needed: 2 });
    }
    let cols_a = condition_samples(ds, s_label, condition_a)?;
    let cols_b = condition_samples(ds, s_label, condition_b)?;
    let slice_a = slice_condition(ds, &rows, &cols_a, condition_a);
    let slice_b = slice_condition(ds, &rows, &cols_b, condition_b);
    check_constant_genes(&slice_a, &names)?;
    check_constant_genes(&slice_b, &names)?;

    let n = rows.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let computed: Vec<Result<(f64, f64, f64, f64)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (xa, ya) = paired(&slice_a.w, i, j);
            let (xb, yb) = paired(&slice_b.w, i, j);
            if xa.len() < MIN_CONDITION_SAMPLES || xb.len() < MIN_CONDITION_SAMPLES {
                return Ok((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
            }
            let ra = pearson(&xa, &ya)?.r;
            let rb = pearson(&xb, &yb)?.r;
            if ra.abs() >= 1.0 || rb.abs() >= 1.0 {
                // degenerate perfect correlation: the Z difference is
                // undefined, report instead of fabricating
                return Ok((ra, rb, f64::NAN, f64::NAN));
            }
            let test = fisher_z_compare(ra, xa.len(), rb, xb.len())?;
            Ok((ra, rb, test.statistic, test.p_value))
        })
        .collect();

    let mut r_a = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { f64::NAN });
    let mut r_b = r_a.clone();
    let mut delta_z = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { f64::NAN });
    let mut p = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { f64::NAN });
    let mut edges = Vec::new();
    for (&(i, j), v) in pairs.iter().zip(computed) {
        let (ra, rb, z, pv) = v?;
        r_a.set(i, j, ra);
        r_a.set(j, i, ra);
        r_b.set(i, j, rb);
        r_b.set(j, i, rb);
        delta_z.set(i, j, z);
        delta_z.set(j, i, z);
        p.set(i, j, pv);
        p.set(j, i, pv);
        if pv.is_nan() {
            notes.push(format!("pair {} - {} skipped (degenerate or sparse)", names[i], names[j]));
        } else if pv <= cut_pval {
            edges.push((i, j, pv));
        }
    }
    Ok(RelNet {
        gene_ids: names,
        mode: RelNetMode::Difference { r_a, r_b, delta_z, p },
        edges,
        cut_pval,
        cor_kind: CorKind::Pearson,
        sample_label_id: s_label.to_string(),
        conditions: vec![slice_a, slice_b],
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModuleMode {
    ByCondition,
    BySample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModState {
    Induced,
    Repressed,
    Inactive,
}

impl ModState {
    pub fn name(&self) -> &'static str {
        match self {
            ModState::Induced => "induced",
            ModState::Repressed => "repressed",
            ModState::Inactive => "inactive",
        }
    }
}

/// Activation states of every gene group per condition (or per sample):
/// the group is induced/repressed when its overlap with the genes beyond
/// `cut_exp` beats the hypergeometric null at `cut_phiper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleResult {
    pub group_names: Vec<String>,
    /// condition levels or sample names, depending on mode
    pub column_names: Vec<String>,
    pub states: Vec<Vec<ModState>>,
    /// group x column p-value of the winning direction
    pub p_values: Matrix,
    /// signed concordance score: -log10 p, positive for induced,
    /// negative for repressed, zero when inactive
    pub scores: Matrix,
    pub mode: ModuleMode,
    pub cut_exp: f64,
    pub cut_phiper: f64,
    pub adjust: AdjustMethod,
    pub sample_label_id: String,
}

/// Functional classification of gene groups.
pub fn active_mod(
    ds: &NormalizedDataset,
    s_label: &str,
    cut_exp: f64,
    cut_phiper: f64,
    mode: ModuleMode,
    adjust: AdjustMethod,
) -> Result<ModuleResult> {
    if !(cut_exp > 0.0) {
        return Err(Error::InvalidParam(format!("cutExp = {cut_exp} must be > 0")));
    }
    if ds.gene_groups.is_empty() {
        return Err(Error::EmptySelection);
    }
    let values = ds.samples.labels.values(s_label)?.to_vec();
    // column definitions: sample lists per condition, or singletons
    let columns: Vec<(String, Vec<usize>)> = match mode {
        ModuleMode::ByCondition => {
            let mut levels: Vec<String> =
                values.iter().filter(|v| !v.is_empty()).cloned().collect();
            levels.sort();
            levels.dedup();
            levels
                .into_iter()
                .map(|level| {
                    let cols: Vec<usize> =
                        (0..ds.chips()).filter(|&c| values[c] == level).collect();
                    (level, cols)
                })
                .collect()
        }
        ModuleMode::BySample => (0..ds.chips())
            .map(|c| (ds.samples.file_names[c].clone(), vec![c]))
            .collect(),
    };

    // per column: universe (genes with data) and direction sets
    struct ColumnSets {
        universe: Vec<usize>,
        induced: Vec<bool>,
        repressed: Vec<bool>,
    }
    let col_sets: Vec<ColumnSets> = columns
        .iter()
        .map(|(_, cols)| {
            let mut universe = Vec::new();
            let mut induced = vec![false; ds.genes()];
            let mut repressed = vec![false; ds.genes()];
            for g in 0..ds.genes() {
                let vals: Vec<f64> = cols.iter().map(|&c| ds.w.at(g, c)).collect();
                let m = finite_mean(&vals);
                if m.is_nan() {
                    continue;
                }
                universe.push(g);
                if m >= cut_exp {
                    induced[g] = true;
                } else if m <= -cut_exp {
                    repressed[g] = true;
                }
            }
            ColumnSets { universe, induced, repressed }
        })
        .collect();

    // hypergeometric tail per group x column x direction
    let n_groups = ds.gene_groups.len();
    let n_cols = columns.len();
    let mut p_induced = Matrix::filled(n_groups, n_cols, 1.0);
    let mut p_repressed = Matrix::filled(n_groups, n_cols, 1.0);
    for (gi, group) in ds.gene_groups.iter().enumerate() {
        let (rows, _) = group.resolve(&ds.gene_map)?;
        for (ci, sets) in col_sets.iter().enumerate() {
            let universe = &sets.universe;
            let group_in: Vec<usize> =
                rows.iter().copied().filter(|g| universe.contains(g)).collect();
            if group_in.is_empty() {
                return Err(Error::EmptyGroup { name: group.name.clone() });
            }
            let n_universe = universe.len() as u64;
            let draws = group_in.len() as u64;
            for (direction, target) in
                [(&sets.induced, &mut p_induced), (&sets.repressed, &mut p_repressed)]
            {
                let marked = universe.iter().filter(|&&g| direction[g]).count() as u64;
                let overlap = group_in.iter().filter(|&&g| direction[g]).count() as u64;
                let p = hypergeom_tail(overlap, n_universe, marked, draws)?;
                target.set(gi, ci, p);
            }
        }
    }

    // optional adjustment across the whole family
    // (groups x columns x directions)
    if adjust != AdjustMethod::None {
        let mut flat = Vec::with_capacity(2 * n_groups * n_cols);
        flat.extend_from_slice(p_induced.data());
        flat.extend_from_slice(p_repressed.data());
        let adjusted = adjust_pvalues(&flat, adjust)?;
        let (a, b) = adjusted.split_at(n_groups * n_cols);
        p_induced = Matrix::from_vec(n_groups, n_cols, a.to_vec());
        p_repressed = Matrix::from_vec(n_groups, n_cols, b.to_vec());
    }

    let mut states = vec![vec![ModState::Inactive; n_cols]; n_groups];
    let mut p_values = Matrix::filled(n_groups, n_cols, 1.0);
    let mut scores = Matrix::filled(n_groups, n_cols, 0.0);
    for gi in 0..n_groups {
        for ci in 0..n_cols {
            let pi = p_induced.at(gi, ci);
            let pr = p_repressed.at(gi, ci);
            // ties prefer induced; deterministic
            let (winner, p) =
                if pi <= pr { (ModState::Induced, pi) } else { (ModState::Repressed, pr) };
            if p <= cut_phiper {
                states[gi][ci] = winner;
                p_values.set(gi, ci, p);
                let magnitude = -p.log10();
                scores.set(
                    gi,
                    ci,
                    match winner {
                        ModState::Induced => magnitude,
                        ModState::Repressed => -magnitude,
                        ModState::Inactive => 0.0,
                    },
                );
            } else {
                p_values.set(gi, ci, p);
            }
        }
    }

    Ok(ModuleResult {
        group_names: ds.gene_groups.iter().map(|g| g.name.clone()).collect(),
        column_names: columns.into_iter().map(|(n, _)| n).collect(),
        states,
        p_values,
        scores,
        mode,
        cut_exp,
        cut_phiper,
        adjust,
        sample_label_id: s_label.to_string(),
    })
}

/// Per-network, per-condition chi-square combination of edge
/// zero-correlation p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct NetScore {
    pub network_names: Vec<String>,
    pub condition_names: Vec<String>,
    /// network x condition statistic `S = sum(-2 ln p)`
    pub s: Matrix,
    /// edge count per network x condition
    pub edge_counts: Vec<Vec<usize>>,
    /// upper-tail chi-square(2m) p-value
    pub p_values: Matrix,
    pub sample_label_id: String,
    pub notes: Vec<String>,
}

/// Score every registered gene network in every condition of `s_label`.
pub fn active_net(ds: &NormalizedDataset, s_label: &str) -> Result<NetScore> {
    if ds.gene_networks.is_empty() {
        return Err(Error::EmptySelection);
    }
    let values = ds.samples.labels.values(s_label)?.to_vec();
    let mut levels: Vec<String> = values.iter().filter(|v| !v.is_empty()).cloned().collect();
    levels.sort();
    levels.dedup();
    let mut notes = Vec::new();

    let n_nets = ds.gene_networks.len();
    let n_conds = levels.len();
    let mut s = Matrix::filled(n_nets, n_conds, 0.0);
    let mut p_values = Matrix::filled(n_nets, n_conds, 1.0);
    let mut edge_counts = vec![vec![0usize; n_conds]; n_nets];

    for (ni, net) in ds.gene_networks.iter().enumerate() {
        let label_values = ds.gene_map.values(&net.label_id)?;
        let row_of = |label: &str| -> Option<usize> {
            (0..ds.genes()).find(|&g| label_values[g] == label)
        };
        for (ci, level) in levels.iter().enumerate() {
            let cols = condition_samples(ds, s_label, level)?;
            let mut stat = 0.0;
            let mut m = 0usize;
            for (a, b) in &net.edges {
                let (Some(ga), Some(gb)) = (row_of(a), row_of(b)) else {
                    notes.push(format!(
                        "{}: edge {a} - {b} unresolved in condition {level}",
                        net.name
                    ));
                    continue;
                };
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for &c in &cols {
                    let va = ds.w.at(ga, c);
                    let vb = ds.w.at(gb, c);
                    if va.is_finite() && vb.is_finite() {
                        xs.push(va);
                        ys.push(vb);
                    }
                }
                if xs.len() < MIN_CONDITION_SAMPLES {
                    notes.push(format!(
                        "{}: edge {a} - {b} has too few complete samples in {level}",
                        net.name
                    ));
                    continue;
                }
                let est = pearson(&xs, &ys)?;
                stat += -2.0 * est.p_zero.max(f64::MIN_POSITIVE).ln();
                m += 1;
            }
            if m == 0 {
                return Err(Error::NoEdges { name: net.name.clone() });
            }
            s.set(ni, ci, stat);
            edge_counts[ni][ci] = m;
            p_values.set(ni, ci, 1.0 - chi_sq_cdf(stat, 2.0 * m as f64)?);
        }
    }
    Ok(NetScore {
        network_names: ds.gene_networks.iter().map(|n| n.name.clone()).collect(),
        condition_names: levels,
        s,
        edge_counts,
        p_values,
        sample_label_id: s_label.to_string(),
        notes,
    })
}

/// Per-condition scatter of one gene pair with its least-squares line.
#[derive(Debug, Clone, PartialEq)]
pub struct GenePairCondition {
    pub condition: String,
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r: Option<f64>,
    pub degenerate: bool,
}

/// Extract a gene pair's per-condition data from a relevance network.
pub fn gene_pair_data(net: &RelNet, gene_x: &str, gene_y: &str) -> Result<Vec<GenePairCondition>> {
    let gi = net
        .gene_ids
        .iter()
        .position(|g| g == gene_x)
        .ok_or_else(|| Error::UnknownLabel { label: gene_x.to_string() })?;
    let gj = net
        .gene_ids
        .iter()
        .position(|g| g == gene_y)
        .ok_or_else(|| Error::UnknownLabel { label: gene_y.to_string() })?;
    let mut out = Vec::new();
    for slice in &net.conditions {
        let (xs, ys) = paired(&slice.w, gi, gj);
        let n = xs.len() as f64;
        let (slope, intercept, r, degenerate) = if xs.len() < 2 {
            (0.0, 0.0, None, true)
        } else {
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let sxy: f64 =
                xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            if sxx == 0.0 {
                (0.0, my, None, true)
            } else {
                let slope = sxy / sxx;
                let r = pearson(&xs, &ys).ok().map(|e| e.r);
                (slope, my - slope * mx, r, r.is_none())
            }
        };
        out.push(GenePairCondition {
            condition: slice.name.clone(),
            points: xs.into_iter().zip(ys).collect(),
            slope,
            intercept,
            r,
            degenerate,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::GeneGroup;
    use crate::normalize::test_fixtures::from_w;
    use crate::rng::{standard_normal, stream};

    /// `genes` noise genes over two conditions of `per` samples each.
    fn net_ds(genes: usize, per: usize, seed: u64) -> NormalizedDataset {
        let chips = 2 * per;
        let mut rng = stream(seed, &[1000]);
        let mut w = Matrix::nan(genes, chips);
        for g in 0..genes {
            for c in 0..chips {
                w.set(g, c, standard_normal(&mut rng));
            }
        }
        let labels: Vec<&str> =
            (0..chips).map(|c| if c < per { "Neso" } else { "Aeso" }).collect();
        let mut ds = from_w(w, "Tissue", &labels);
        ds.gene_groups.push(GeneGroup {
            name: "grp".into(),
            label_id: "Name".into(),
            members: (0..genes).map(|g| format!("G{g:03}")).collect(),
        });
        ds
    }

    #[test]
    fn perfectly_coupled_pair_is_an_edge_at_any_cut() {
        let mut ds = net_ds(3, 6, 1);
        for c in 0..12 {
            let v = ds.w.at(0, c);
            ds.w.set(1, c, v); // gene 1 copies gene 0
        }
        let net =
            rel_network_b(&ds, "Tissue", "Neso", "grp", CorKind::Pearson, 1e-12, 0).unwrap();
        match &net.mode {
            RelNetMode::Single { cor, p, .. } => {
                assert_eq!(cor.at(0, 1), 1.0);
                assert_eq!(p.at(0, 1), 0.0);
            }
            _ => panic!("expected single mode"),
        }
        assert!(net.edges.iter().any(|&(i, j, _)| (i, j) == (0, 1)));
        // cutPval = 0 keeps only exact |r| = 1 pairs
        let strict =
            rel_network_b(&ds, "Tissue", "Neso", "grp", CorKind::Pearson, 0.0, 0).unwrap();
        assert_eq!(strict.edges.len(), 1);
    }

    #[test]
    fn null_edge_count_is_calibrated() {
        // independent noise genes: retained edges at cut 0.05 stay within
        // 3 binomial SDs of 5% of the pairs, pooled over seeds
        let mut total_edges = 0usize;
        let mut total_pairs = 0usize;
        for seed in 0..6 {
            let ds = net_ds(15, 10, 100 + seed);
            let net =
                rel_network_b(&ds, "Tissue", "Neso", "grp", CorKind::Pearson, 0.05, 0).unwrap();
            total_edges += net.edges.len();
            total_pairs += 15 * 14 / 2;
        }
        let frac = total_edges as f64 / total_pairs as f64;
        let sd = (0.05f64 * 0.95 / 105.0).sqrt(); // per-dataset pair count
        assert!((frac - 0.05).abs() < 3.0 * sd, "edge fraction {frac}");
    }

    #[test]
    fn too_few_samples_and_constant_genes_error() {
        let ds = net_ds(4, 3, 2); // 3 per condition < 4
        assert!(matches!(
            rel_network_b(&ds, "Tissue", "Neso", "grp", CorKind::Pearson, 0.05, 0),
            Err(Error::TooFewSamples { .. })
        ));
        let mut ds = net_ds(4, 6, 3);
        for c in 0..6 {
            ds.w.set(2, c, 1.5); // constant within Neso
        }
        assert!(matches!(
            rel_network_b(&ds, "Tissue", "Neso", "grp", CorKind::Pearson, 0.05, 0),
            Err(Error::ConstantGene { .. })
        ));
    }

    #[test]
    fn mi_network_is_seeded_and_deterministic() {
        let mut ds = net_ds(4, 6, 9);
        for c in 0..12 {
            let v = ds.w.at(0, c);
            ds.w.set(3, c, v * 2.0 + 0.01); // strong dependence
        }
        let a = rel_network_b(&ds, "Tissue", "Neso", "grp", CorKind::Mi { k: 3 }, 0.05, 7)
            .unwrap();
        let b = rel_network_b(&ds, "Tissue", "Neso", "grp", CorKind::Mi { k: 3 }, 0.05, 7)
            .unwrap();
        match (&a.mode, &b.mode) {
            (RelNetMode::Single { p: pa, .. }, RelNetMode::Single { p: pb, .. }) => {
                assert!(pa.bits_eq(pb));
                // the dependent pair gets the smallest achievable p
                assert_eq!(pa.at(0, 3), 1.0 / 1000.0);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn identical_conditions_give_no_difference_edges() {
        let mut ds = net_ds(5, 6, 4);
        // make Aeso identical to Neso
        for g in 0..5 {
            for c in 0..6 {
                let v = ds.w.at(g, c);
                ds.w.set(g, c + 6, v);
            }
        }
        let net = rel_network_m(&ds, "Tissue", "Neso", "Aeso", "grp", 0.05).unwrap();
        assert!(net.edges.is_empty());
        match &net.mode {
            RelNetMode::Difference { p, delta_z, .. } => {
                for i in 0..5 {
                    for j in (i + 1)..5 {
                        assert_eq!(p.at(i, j), 1.0);
                        assert_eq!(delta_z.at(i, j), 0.0);
                    }
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn planted_correlation_flip_ranks_first_and_swap_is_symmetric() {
        let mut ds = net_ds(8, 20, 5);
        // plant genes 0, 1 correlated +0.95 in Neso and -0.95 in Aeso
        let mut rng = stream(99, &[4]);
        for c in 0..20 {
            let z = standard_normal(&mut rng);
            let e = standard_normal(&mut rng);
            ds.w.set(0, c, z);
            ds.w.set(1, c, 0.95 * z + (1.0f64 - 0.95 * 0.95).sqrt() * e);
        }
        for c in 20..40 {
            let z = standard_normal(&mut rng);
            let e = standard_normal(&mut rng);
            ds.w.set(0, c, z);
            ds.w.set(1, c, -0.95 * z + (1.0f64 - 0.95 * 0.95).sqrt() * e);
        }
        let net = rel_network_m(&ds, "Tissue", "Neso", "Aeso", "grp", 0.05).unwrap();
        let best = match &net.mode {
            RelNetMode::Difference { p, .. } => {
                let mut pairs: Vec<(usize, usize, f64)> = (0..8)
                    .flat_map(|i| ((i + 1)..8).map(move |j| (i, j, 0.0)))
                    .map(|(i, j, _)| (i, j, p.at(i, j)))
                    .collect();
                pairs.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
                (pairs[0].0, pairs[0].1)
            }
            _ => panic!(),
        };
        assert_eq!(best, (0, 1));
        // swapping conditions keeps the edge set, negates delta Z
        let swapped = rel_network_m(&ds, "Tissue", "Aeso", "Neso", "grp", 0.05).unwrap();
        let edges_a: Vec<(usize, usize)> = net.edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let edges_b: Vec<(usize, usize)> =
            swapped.edges.iter().map(|&(i, j, _)| (i, j)).collect();
        assert_eq!(edges_a, edges_b);
        match (&net.mode, &swapped.mode) {
            (
                RelNetMode::Difference { delta_z: za, .. },
                RelNetMode::Difference { delta_z: zb, .. },
            ) => {
                assert!((za.at(0, 1) + zb.at(0, 1)).abs() < 1e-12);
            }
            _ => panic!(),
        }
    }

    fn module_ds() -> NormalizedDataset {
        // 10-gene universe, 2 conditions x 4 samples; genes 0..5 induced
        // in condition B exactly
        let chips = 8;
        let mut w = Matrix::filled(10, chips, 0.0);
        for g in 0..5 {
            for c in 4..8 {
                w.set(g, c, 2.0);
            }
        }
        let mut ds = from_w(
            w,
            "Tissue",
            &["A", "A", "A", "A", "B", "B", "B", "B"],
        );
        ds.gene_groups.push(GeneGroup {
            name: "five".into(),
            label_id: "Name".into(),
            members: (0..5).map(|g| format!("G{g:03}")).collect(),
        });
        ds
    }

    #[test]
    fn exact_overlap_matches_hypergeometric_oracle() {
        let ds = module_ds();
        let res = active_mod(
            &ds,
            "Tissue",
            1.0,
            0.05,
            ModuleMode::ByCondition,
            AdjustMethod::None,
        )
        .unwrap();
        assert_eq!(res.column_names, vec!["A", "B"]);
        let b = 1; // condition B column
        assert_eq!(res.states[0][b], ModState::Induced);
        // P(X >= 5) with N = 10, K = 5, n = 5 is 1/252
        assert!((res.p_values.at(0, b) - 1.0 / 252.0).abs() < 1e-12);
        assert!((res.scores.at(0, b) - (-(1.0f64 / 252.0).log10())).abs() < 1e-12);
        // condition A has nothing beyond the cut
        assert_eq!(res.states[0][0], ModState::Inactive);
        assert_eq!(res.scores.at(0, 0), 0.0);
    }

    #[test]
    fn no_gene_beyond_cut_means_all_inactive() {
        let mut ds = module_ds();
        ds.w = Matrix::filled(10, 8, 0.1);
        ds.w.set(0, 0, 0.2); // avoid all-equal degenerate data
        let res = active_mod(
            &ds,
            "Tissue",
            1.0,
            0.05,
            ModuleMode::ByCondition,
            AdjustMethod::None,
        )
        .unwrap();
        for row in &res.states {
            assert!(row.iter().all(|s| *s == ModState::Inactive));
        }
        assert!(res.scores.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repressed_direction_gets_negative_score() {
        let mut ds = module_ds();
        for g in 0..5 {
            for c in 4..8 {
                ds.w.set(g, c, -2.0);
            }
        }
        let res = active_mod(
            &ds,
            "Tissue",
            1.0,
            0.05,
            ModuleMode::ByCondition,
            AdjustMethod::None,
        )
        .unwrap();
        assert_eq!(res.states[0][1], ModState::Repressed);
        assert!(res.scores.at(0, 1) < 0.0);
    }

    #[test]
    fn enlarging_cut_exp_never_grows_the_induced_set() {
        let mut ds = module_ds();
        // graded effects
        for g in 0..10 {
            for c in 4..8 {
                ds.w.set(g, c, 0.4 * g as f64);
            }
        }
        let loose = active_mod(&ds, "Tissue", 0.5, 1.1, ModuleMode::ByCondition, AdjustMethod::None)
            .unwrap();
        let tight = active_mod(&ds, "Tissue", 2.0, 1.1, ModuleMode::ByCondition, AdjustMethod::None)
            .unwrap();
        // direction sets shrink, so the overlap p cannot get smaller for
        // the same group; verify via score magnitude
        assert!(tight.scores.at(0, 1).abs() <= loose.scores.at(0, 1).abs() + 1e-12);
    }

    #[test]
    fn by_sample_mode_uses_sample_columns() {
        let ds = module_ds();
        let res = active_mod(
            &ds,
            "Tissue",
            1.0,
            0.05,
            ModuleMode::BySample,
            AdjustMethod::Bh,
        )
        .unwrap();
        assert_eq!(res.column_names.len(), 8);
    }

    #[test]
    fn bh_adjustment_only_shrinks_significance() {
        let ds = module_ds();
        let raw = active_mod(&ds, "Tissue", 1.0, 0.05, ModuleMode::ByCondition, AdjustMethod::None)
            .unwrap();
        let adj = active_mod(&ds, "Tissue", 1.0, 0.05, ModuleMode::ByCondition, AdjustMethod::Bh)
            .unwrap();
        for gi in 0..raw.group_names.len() {
            for ci in 0..raw.column_names.len() {
                assert!(adj.p_values.at(gi, ci) >= raw.p_values.at(gi, ci) - 1e-15);
            }
        }
    }

    fn scored_net_ds(seed: u64) -> NormalizedDataset {
        let mut ds = net_ds(6, 8, seed);
        ds.gene_networks.push(crate::ingest::GeneNetwork {
            name: "net1".into(),
            label_id: "Name".into(),
            edges: vec![
                ("G000".into(), "G001".into()),
                ("G002".into(), "G003".into()),
                ("G004".into(), "G005".into()),
            ],
        });
        ds
    }

    #[test]
    fn network_statistic_is_additive_and_chi_square_referenced() {
        let ds = scored_net_ds(11);
        let scores = active_net(&ds, "Tissue").unwrap();
        assert_eq!(scores.network_names, vec!["net1"]);
        assert_eq!(scores.condition_names, vec!["Aeso", "Neso"]);
        assert_eq!(scores.edge_counts[0], vec![3, 3]);
        // recompute S from per-edge p-values directly (Neso = chips 0..8)
        let cols: Vec<usize> = (0..8).collect();
        let mut s_manual = 0.0;
        for (a, b) in [(0usize, 1usize), (2, 3), (4, 5)] {
            let xs: Vec<f64> = cols.iter().map(|&c| ds.w.at(a, c)).collect();
            let ys: Vec<f64> = cols.iter().map(|&c| ds.w.at(b, c)).collect();
            s_manual += -2.0 * pearson(&xs, &ys).unwrap().p_zero.ln();
        }
        let ci = scores.condition_names.iter().position(|c| c == "Neso").unwrap();
        assert!((scores.s.at(0, ci) - s_manual).abs() < 1e-10);
        // p from the chi-square oracle with 2m degrees of freedom
        let want = 1.0 - chi_sq_cdf(s_manual, 6.0).unwrap();
        assert!((scores.p_values.at(0, ci) - want).abs() < 1e-12);
        // additivity over disjoint edge sets: recompute the first edge
        // alone plus the other two
        let s_single = {
            let xs: Vec<f64> = cols.iter().map(|&c| ds.w.at(0, c)).collect();
            let ys: Vec<f64> = cols.iter().map(|&c| ds.w.at(1, c)).collect();
            -2.0 * pearson(&xs, &ys).unwrap().p_zero.ln()
        };
        let s_rest = s_manual - s_single;
        assert_eq!(s_single + s_rest, s_manual);
    }

    #[test]
    fn single_strong_edge_example() {
        // one edge with p = e^-5 gives S = 10 and p = 1 - chi2cdf(10, 2)
        let s = 10.0;
        let want = 1.0 - chi_sq_cdf(s, 2.0).unwrap();
        assert!((want - (-5.0f64).exp()).abs() < 1e-12); // chi2(2) tail is exp(-s/2)
    }

    #[test]
    fn null_network_statistic_has_chi_square_mean() {
        // mean of S over independent-noise edges approaches 2m
        let mut total = 0.0;
        let runs = 60;
        for seed in 0..runs {
            let ds = scored_net_ds(300 + seed);
            let scores = active_net(&ds, "Tissue").unwrap();
            total += scores.s.at(0, 0);
        }
        let mean = total / runs as f64;
        // S ~ chi2(6): mean 6, var 12; allow 3 standard errors
        let se = (12.0f64 / runs as f64).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * se, "mean S = {mean}");
    }

    #[test]
    fn unresolved_edges_are_reported_and_all_unresolved_errors() {
        let mut ds = scored_net_ds(13);
        ds.gene_networks[0].edges.push(("G000".into(), "MISSING".into()));
        let scores = active_net(&ds, "Tissue").unwrap();
        assert!(scores.notes.iter().any(|n| n.contains("MISSING")));
        assert_eq!(scores.edge_counts[0], vec![3, 3]);
        ds.gene_networks[0].edges =
            vec![("NOPE".into(), "MISSING".into())];
        assert!(matches!(active_net(&ds, "Tissue"), Err(Error::NoEdges { .. })));
    }

    #[test]
    fn gene_pair_regression_lines() {
        let mut ds = net_ds(3, 6, 21);
        // y = 2x exactly in both conditions
        for c in 0..12 {
            let x = 0.1 * c as f64 + 0.3;
            ds.w.set(0, c, x);
            ds.w.set(1, c, 2.0 * x);
        }
        let net = rel_network_m(&ds, "Tissue", "Neso", "Aeso", "grp", 0.05).unwrap();
        let pair = gene_pair_data(&net, "G000", "G001").unwrap();
        assert_eq!(pair.len(), 2);
        for cond in &pair {
            assert!((cond.slope - 2.0).abs() < 1e-9);
            assert!(cond.intercept.abs() < 1e-9);
            assert_eq!(cond.r, Some(1.0));
            assert!(!cond.degenerate);
        }
        // constant y: flagged degenerate with slope 0
        let mut ds2 = net_ds(3, 6, 22);
        for c in 0..12 {
            ds2.w.set(1, c, 3.3);
        }
        let net2 =
            rel_network_b(&ds2, "Tissue", "Neso", "grp", CorKind::Pearson, 0.05, 0);
        // constant gene errors at network level; build the pair view from
        // a manual net over genes 0 and 2 instead
        assert!(net2.is_err());
        let net3 = rel_network_b(
            &{
                let mut d = ds2.clone();
                d.gene_groups[0].members = vec!["G000".into(), "G002".into()];
                d
            },
            "Tissue",
            "Neso",
            "grp",
            CorKind::Pearson,
            1.0,
            0,
        )
        .unwrap();
        assert_eq!(net3.gene_ids.len(), 2);
    }

    #[test]
    fn opposite_planted_slopes_differ_in_sign() {
        let mut ds = net_ds(2, 10, 23);
        let mut rng = stream(44, &[9]);
        for c in 0..10 {
            let x = standard_normal(&mut rng);
            ds.w.set(0, c, x);
            ds.w.set(1, c, 1.5 * x + 0.05 * standard_normal(&mut rng));
        }
        for c in 10..20 {
            let x = standard_normal(&mut rng);
            ds.w.set(0, c, x);
            ds.w.set(1, c, -1.5 * x + 0.05 * standard_normal(&mut rng));
        }
        let net = rel_network_m(&ds, "Tissue", "Neso", "Aeso", "grp", 1.0).unwrap();
        let pair = gene_pair_data(&net, "G000", "G001").unwrap();
        assert!(pair[0].slope > 0.0);
        assert!(pair[1].slope < 0.0);
    }
}
