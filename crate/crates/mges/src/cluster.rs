//! Distance matrices and clustering: agglomerative hierarchical with
//! Lance-Williams updates, k-means with k-means++ seeding, and an online
//! self-organizing map. `cluster_de` runs any of them on the most
//! differentially expressed genes of a [`DeResult`].

use crate::diffexpr::DeResult;
use crate::matrix::{finite_mean, Matrix};
use crate::rng;
use crate::stat::pearson;
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceKind {
    Euclidean,
    OneMinusCor,
    OneMinusAbsCor,
}

impl DistanceKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "euclidean" => DistanceKind::Euclidean,
            "cor" | "oneMinusCor" => DistanceKind::OneMinusCor,
            "abscor" | "oneMinusAbsCor" => DistanceKind::OneMinusAbsCor,
            other => return Err(Error::Usage(format!("unknown distance `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::OneMinusCor => "oneMinusCor",
            DistanceKind::OneMinusAbsCor => "oneMinusAbsCor",
        }
    }
}

/// Pairwise distances between the rows of `m`, pairwise-complete over
/// missing features. Correlation distances need at least 3 shared finite
/// features per pair.
pub fn distance_matrix(m: &Matrix, kind: DistanceKind) -> Result<Matrix> {
    let n = m.rows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let rows: Vec<&[f64]> = (0..n).map(|i| m.row(i)).collect();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let computed: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (a, b) in rows[i].iter().zip(rows[j]) {
                if a.is_finite() && b.is_finite() {
                    xs.push(*a);
                    ys.push(*b);
                }
            }
            match kind {
                DistanceKind::Euclidean => {
                    if xs.is_empty() {
                        return Err(Error::TooFewPoints {
                            unit: format!("rows {i} and {j}"),
                            needed: 1,
                            found: 0,
                        });
                    }
                    Ok(xs
                        .iter()
                        .zip(&ys)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt())
                }
                DistanceKind::OneMinusCor | DistanceKind::OneMinusAbsCor => {
                    if xs.len() < 3 {
                        return Err(Error::TooFewPoints {
                            unit: format!("rows {i} and {j}"),
                            needed: 3,
                            found: xs.len(),
                        });
                    }
                    let r = pearson(&xs, &ys)?.r;
                    Ok(match kind {
                        DistanceKind::OneMinusCor => 1.0 - r,
                        _ => 1.0 - r.abs(),
                    })
                }
            }
        })
        .collect();
    let mut d = Matrix::filled(n, n, 0.0);
    for (&(i, j), v) in pairs.iter().zip(computed) {
        let v = v?;
        d.set(i, j, v);
        d.set(j, i, v);
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

impl Linkage {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "single" => Linkage::Single,
            "complete" => Linkage::Complete,
            "average" => Linkage::Average,
            other => return Err(Error::Usage(format!("unknown linkage `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        }
    }
}

/// One agglomeration step joining nodes `a` and `b` (leaves are
/// `0..n`, internal nodes continue upward in merge order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaf_labels: Vec<String>,
    pub linkage: Linkage,
    pub distance_kind: Option<DistanceKind>,
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.leaf_labels.len()
    }

    /// Canonical left-to-right leaf order: at every internal node the
    /// subtree containing the smaller minimum leaf index comes first.
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.leaves();
        // children per internal node
        let mut order = Vec::with_capacity(n);
        if n == 0 {
            return order;
        }
        if self.merges.is_empty() {
            return (0..n).collect();
        }
        fn emit(node: usize, n: usize, merges: &[Merge], out: &mut Vec<usize>) -> usize {
            if node < n {
                out.push(node);
                return node;
            }
            let m = &merges[node - n];
            let mut first = Vec::new();
            let min_a = emit(m.a, n, merges, &mut first);
            let mut second = Vec::new();
            let min_b = emit(m.b, n, merges, &mut second);
            if min_a <= min_b {
                out.extend(first);
                out.extend(second);
                min_a
            } else {
                out.extend(second);
                out.extend(first);
                min_b
            }
        }
        let root = n + self.merges.len() - 1;
        emit(root, n, &self.merges, &mut order);
        order
    }
}

/// Agglomerative clustering over a symmetric distance matrix. Ties merge
/// the lowest index pair, so the output is deterministic.
pub fn hier_cluster(d: &Matrix, linkage: Linkage, leaf_labels: Vec<String>) -> Result<Dendrogram> {
    let n = d.rows();
    if n != d.cols() || n < 2 {
        return Err(Error::InvalidParam("distance matrix must be square with n >= 2".into()));
    }
    if leaf_labels.len() != n {
        return Err(Error::InvalidParam("leaf label count must match the matrix".into()));
    }
    // working copy of active distances; active[i] = current node id
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| d.row(i).to_vec()).collect();
    let mut active: Vec<usize> = (0..n).collect(); // positions into dist
    let mut node_id: Vec<usize> = (0..n).collect();
    let mut size: Vec<f64> = vec![1.0; n];
    let mut merges = Vec::with_capacity(n - 1);
    let mut next_id = n;

    while active.len() > 1 {
        // nearest active pair, lowest indices on ties
        let mut best = (f64::INFINITY, 0usize, 1usize);
        for ai in 0..active.len() {
            for aj in ai + 1..active.len() {
                let v = dist[active[ai]][active[aj]];
                if v < best.0 {
                    best = (v, ai, aj);
                }
            }
        }
        let (height, ai, aj) = best;
        let (pi, pj) = (active[ai], active[aj]);
        let (ida, idb) = (node_id[pi].min(node_id[pj]), node_id[pi].max(node_id[pj]));
        merges.push(Merge { a: ida, b: idb, height });

        // Lance-Williams update into position pi
        let (si, sj) = (size[pi], size[pj]);
        for &pk in &active {
            if pk == pi || pk == pj {
                continue;
            }
            let dik = dist[pi][pk];
            let djk = dist[pj][pk];
            let updated = match linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (si * dik + sj * djk) / (si + sj),
            };
            dist[pi][pk] = updated;
            dist[pk][pi] = updated;
        }
        size[pi] = si + sj;
        node_id[pi] = next_id;
        next_id += 1;
        active.remove(aj);
    }
    Ok(Dendrogram { merges, leaf_labels, linkage, distance_kind: None })
}

/// Flat clustering result. `centers` is the codebook for SOM.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub centers: Matrix,
    /// total within-cluster sum of squares (quantization error for SOM)
    pub inertia: f64,
    pub warnings: Vec<String>,
}

impl Partition {
    /// True when the two partitions group items identically up to cluster
    /// relabeling.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        if self.assignment.len() != other.assignment.len() {
            return false;
        }
        let mut fwd = std::collections::BTreeMap::new();
        let mut back = std::collections::BTreeMap::new();
        for (&a, &b) in self.assignment.iter().zip(&other.assignment) {
            if *fwd.entry(a).or_insert(b) != b || *back.entry(b).or_insert(a) != a {
                return false;
            }
        }
        true
    }
}

/// Feature-mean imputation for rows with missing features; warn once.
fn impute(m: &Matrix) -> (Matrix, Vec<String>) {
    let missing = m.missing_count();
    if missing == 0 {
        return (m.clone(), Vec::new());
    }
    let mut out = m.clone();
    for c in 0..m.cols() {
        let col = m.col(c);
        let mean = finite_mean(&col);
        for r in 0..m.rows() {
            if out.at(r, c).is_nan() {
                out.set(r, c, if mean.is_nan() { 0.0 } else { mean });
            }
        }
    }
    (out, vec![format!("imputed {missing} missing cells with feature means")])
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lloyd(m: &Matrix, k: usize, seed: u64) -> (Vec<usize>, Matrix, f64) {
    let n = m.rows();
    let dim = m.cols();
    let mut rng = rng::stream(seed, &[0x6b6d]);

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(m.row(rng.gen_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(m.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(m.row(next).to_vec());
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(m.row(i), centers.last().unwrap()));
        }
    }

    let mut assignment = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    let mut first = true;
    for _iter in 0..300 {
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let mut best = (f64::INFINITY, 0usize);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(m.row(i), center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            inertia += best.0;
            if assignment[i] != best.1 {
                assignment[i] = best.1;
                changed = true;
            }
        }
        debug_assert!(
            inertia <= prev_inertia + 1e-9 * prev_inertia.abs().max(1.0),
            "k-means inertia must not increase: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;
        // centers must be refreshed at least once even if the seeded
        // assignment is already a fixpoint
        if !changed && !first {
            break;
        }
        first = false;
        // recompute centers; empty clusters keep their previous position
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            for (f, slot) in center.iter_mut().enumerate() {
                *slot = members.iter().map(|&i| m.at(i, f)).sum::<f64>() / members.len() as f64;
            }
        }
    }
    let mut flat = Vec::with_capacity(k * dim);
    for c in centers {
        flat.extend(c);
    }
    (assignment, Matrix::from_vec(k, dim, flat), prev_inertia)
}

/// Lloyd's k-means with k-means++ seeding; the best inertia over
/// `restarts` seeded runs wins (ties keep the earliest restart).
pub fn k_means(m: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<Partition> {
    if k == 0 || k > m.rows() {
        return Err(Error::InvalidParam(format!(
            "k = {k} must be in 1..={} (item count)",
            m.rows()
        )));
    }
    let (filled, warnings) = impute(m);
    let runs: Vec<(Vec<usize>, Matrix, f64)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| lloyd(&filled, k, rng::derive_seed(seed, &[r as u64])))
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.2.partial_cmp(&b.2).unwrap().then(ia.cmp(ib)))
        .map(|(_, run)| run)
        .unwrap();
    Ok(Partition { assignment: best.0, centers: best.1, inertia: best.2, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SomTopology {
    Rect,
    Hex,
}

impl SomTopology {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "rect" => SomTopology::Rect,
            "hex" => SomTopology::Hex,
            other => return Err(Error::Usage(format!("unknown SOM topology `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SomParams {
    pub xdim: usize,
    pub ydim: usize,
    pub topology: SomTopology,
    pub epochs: usize,
    pub alpha0: f64,
    pub radius0: f64,
}

impl SomParams {
    /// Conventional defaults: alpha 0.05, radius half the larger grid
    /// side, 100 passes over the data.
    pub fn defaults(xdim: usize, ydim: usize) -> SomParams {
        SomParams {
            xdim,
            ydim,
            topology: SomTopology::Rect,
            epochs: 100,
            alpha0: 0.05,
            radius0: xdim.max(ydim) as f64 / 2.0,
        }
    }
}

fn grid_coords(params: &SomParams) -> Vec<(f64, f64)> {
    let mut coords = Vec::with_capacity(params.xdim * params.ydim);
    for y in 0..params.ydim {
        for x in 0..params.xdim {
            match params.topology {
                SomTopology::Rect => coords.push((x as f64, y as f64)),
                SomTopology::Hex => {
                    // odd rows shift half a cell; rows pack at sqrt(3)/2
                    let xs = x as f64 + if y % 2 == 1 { 0.5 } else { 0.0 };
                    coords.push((xs, y as f64 * 3f64.sqrt() / 2.0));
                }
            }
        }
    }
    coords
}

/// Online SOM: unit learning rate decays linearly `alpha0 -> 0.01` and the
/// neighborhood radius `radius0 -> 0` over the training steps; items are
/// then assigned to their best-matching unit.
pub fn som(m: &Matrix, params: &SomParams, seed: u64) -> Result<Partition> {
    if params.xdim * params.ydim == 0 {
        return Err(Error::InvalidParam("SOM grid must have at least one unit".into()));
    }
    let (filled, warnings) = impute(m);
    let n = filled.rows();
    let dim = filled.cols();
    let units = params.xdim * params.ydim;
    let coords = grid_coords(params);
    let mut rng = rng::stream(seed, &[0x736f6d]);

    // codebook seeded from random data rows
    let mut codebook: Vec<Vec<f64>> =
        (0..units).map(|_| filled.row(rng.gen_range(0..n)).to_vec()).collect();

    let total_steps = (params.epochs * n).max(1) as f64;
    let mut step = 0f64;
    let mut order: Vec<usize> = (0..n).collect();
    for _epoch in 0..params.epochs {
        rng::shuffle(&mut order, &mut rng);
        for &i in &order {
            let frac = step / total_steps;
            let alpha = params.alpha0 + (0.01 - params.alpha0) * frac;
            let radius = params.radius0 * (1.0 - frac);
            let item = filled.row(i);
            let bmu = (0..units)
                .min_by(|&a, &b| {
                    sq_dist(item, &codebook[a]).partial_cmp(&sq_dist(item, &codebook[b])).unwrap()
                })
                .unwrap();
            for u in 0..units {
                let dx = coords[u].0 - coords[bmu].0;
                let dy = coords[u].1 - coords[bmu].1;
                if (dx * dx + dy * dy).sqrt() <= radius {
                    for (w, &x) in codebook[u].iter_mut().zip(item) {
                        *w += alpha * (x - *w);
                    }
                }
            }
            step += 1.0;
        }
    }

    let mut assignment = vec![0usize; n];
    let mut inertia = 0.0;
    for i in 0..n {
        let item = filled.row(i);
        let mut best = (f64::INFINITY, 0usize);
        for (u, code) in codebook.iter().enumerate() {
            let d = sq_dist(item, code);
            if d < best.0 {
                best = (d, u);
            }
        }
        assignment[i] = best.1;
        inertia += best.0;
    }
    let mut flat = Vec::with_capacity(units * dim);
    for c in codebook {
        flat.extend(c);
    }
    Ok(Partition { assignment, centers: Matrix::from_vec(units, dim, flat), inertia, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeSelection {
    /// Keep the n smallest adjusted p-values.
    TopN(usize),
    /// Keep everything at or below the cutoff.
    PCut(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterOn {
    Genes,
    Samples,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterAlg {
    Hier { linkage: Linkage, distance: DistanceKind },
    KMeans { k: usize, restarts: usize },
    Som(SomParams),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterOutcome {
    Tree(Dendrogram),
    Flat(Partition),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDeResult {
    pub outcome: ClusterOutcome,
    /// the gene x sample sub-matrix that was clustered
    pub sub: Matrix,
    pub gene_ids: Vec<String>,
    pub sample_names: Vec<String>,
    pub warnings: Vec<String>,
}

/// Cluster the most differentially expressed genes (or the samples over
/// them). Selection is by adjusted then raw p-value of the given family.
pub fn cluster_de(
    res: &DeResult,
    family: usize,
    selection: DeSelection,
    alg: &ClusterAlg,
    on: ClusterOn,
    seed: u64,
) -> Result<ClusterDeResult> {
    let fam = &res.families[family];
    let mut order: Vec<usize> = (0..res.genes()).collect();
    order.sort_by(|&a, &b| {
        fam.adj_p[a]
            .partial_cmp(&fam.adj_p[b])
            .unwrap()
            .then(fam.raw_p[a].partial_cmp(&fam.raw_p[b]).unwrap())
            .then(a.cmp(&b))
    });
    let mut warnings = Vec::new();
    let picked: Vec<usize> = match selection {
        DeSelection::TopN(n) => {
            if n > order.len() {
                warnings.push(format!(
                    "requested {n} genes but only {} are available",
                    order.len()
                ));
            }
            order.iter().copied().take(n.min(order.len())).collect()
        }
        DeSelection::PCut(cut) => {
            order.iter().copied().filter(|&g| fam.adj_p[g] <= cut).collect()
        }
    };
    if picked.len() < 2 {
        return Err(Error::EmptySelection);
    }
    let sub = res.w.select_rows(&picked);
    let gene_ids: Vec<String> = picked.iter().map(|&g| res.gene_ids[g].clone()).collect();

    let (matrix, labels) = match on {
        ClusterOn::Genes => (sub.clone(), gene_ids.clone()),
        ClusterOn::Samples => (sub.transpose(), res.sample_names.clone()),
    };
    let outcome = match alg {
        ClusterAlg::Hier { linkage, distance } => {
            let d = distance_matrix(&matrix, *distance)?;
            let mut tree = hier_cluster(&d, *linkage, labels)?;
            tree.distance_kind = Some(*distance);
            ClusterOutcome::Tree(tree)
        }
        ClusterAlg::KMeans { k, restarts } => {
            ClusterOutcome::Flat(k_means(&matrix, *k, *restarts, seed)?)
        }
        ClusterAlg::Som(params) => ClusterOutcome::Flat(som(&matrix, params, seed)?),
    };
    Ok(ClusterDeResult {
        outcome,
        sub,
        gene_ids,
        sample_names: res.sample_names.clone(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, stream};

    fn blobs(per: usize, seed: u64) -> Matrix {
        let mut rng = stream(seed, &[42]);
        let mut m = Matrix::filled(2 * per, 2, 0.0);
        for i in 0..per {
            m.set(i, 0, 0.1 * standard_normal(&mut rng));
            m.set(i, 1, 0.1 * standard_normal(&mut rng));
            m.set(per + i, 0, 10.0 + 0.1 * standard_normal(&mut rng));
            m.set(per + i, 1, 10.0 + 0.1 * standard_normal(&mut rng));
        }
        m
    }

    #[test]
    fn distances_match_brute_force() {
        let m = Matrix::from_vec(3, 4, vec![
            1.0, 2.0, 3.0, 4.0,
            2.0, 4.0, 6.0, 8.0,
            4.0, 3.0, 2.0, 1.0,
        ]);
        let d = distance_matrix(&m, DistanceKind::Euclidean).unwrap();
        // hand computation for rows 0 and 1: sqrt(1 + 4 + 9 + 16)
        assert!((d.at(0, 1) - 30f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.at(0, 0), 0.0);
        assert_eq!(d.at(1, 0), d.at(0, 1));
        let c = distance_matrix(&m, DistanceKind::OneMinusCor).unwrap();
        assert!(c.at(0, 1).abs() < 1e-12, "perfectly correlated rows at distance 0");
        assert!((c.at(0, 2) - 2.0).abs() < 1e-12, "anti-correlated rows at distance 2");
        let a = distance_matrix(&m, DistanceKind::OneMinusAbsCor).unwrap();
        assert!(a.at(0, 2).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_are_at_distance_zero_under_all_kinds() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 5.0, 2.0, 1.0, 5.0, 2.0]);
        for kind in [DistanceKind::Euclidean, DistanceKind::OneMinusCor, DistanceKind::OneMinusAbsCor] {
            let d = distance_matrix(&m, kind).unwrap();
            assert!(d.at(0, 1).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn correlation_distance_needs_three_shared_features() {
        let m = Matrix::from_vec(2, 4, vec![
            1.0, 2.0, f64::NAN, f64::NAN,
            1.0, f64::NAN, 2.0, 3.0,
        ]);
        assert!(matches!(
            distance_matrix(&m, DistanceKind::OneMinusCor),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn correlation_distance_is_affine_invariant() {
        let mut rng = stream(9, &[3]);
        let m = Matrix::from_fn(4, 6, |_, _| standard_normal(&mut rng));
        let d1 = distance_matrix(&m, DistanceKind::OneMinusCor).unwrap();
        let scaled = Matrix::from_fn(4, 6, |r, c| 3.0 * m.at(r, c) + 7.0);
        let d2 = distance_matrix(&scaled, DistanceKind::OneMinusCor).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((d1.at(i, j) - d2.at(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hierarchical_on_a_line_merges_nearest_first() {
        // points at 1, 2, 10: single linkage joins {1,2} at 1, then at 8
        let mut d = Matrix::filled(3, 3, 0.0);
        let pts: [f64; 3] = [1.0, 2.0, 10.0];
        for i in 0..3 {
            for j in 0..3 {
                d.set(i, j, (pts[i] - pts[j]).abs());
            }
        }
        let tree = hier_cluster(
            &d,
            Linkage::Single,
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        assert_eq!(tree.merges.len(), 2);
        assert_eq!((tree.merges[0].a, tree.merges[0].b), (0, 1));
        assert_eq!(tree.merges[0].height, 1.0);
        assert_eq!(tree.merges[1].height, 8.0);
        assert_eq!(tree.leaf_order(), vec![0, 1, 2]);
    }

    #[test]
    fn identical_items_merge_at_height_zero() {
        let m = Matrix::from_vec(2, 2, vec![3.0, 4.0, 3.0, 4.0]);
        let d = distance_matrix(&m, DistanceKind::Euclidean).unwrap();
        let tree = hier_cluster(&d, Linkage::Complete, vec!["x".into(), "y".into()]).unwrap();
        assert_eq!(tree.merges[0].height, 0.0);
    }

    #[test]
    fn complete_heights_dominate_single_merge_wise() {
        // chain fixture: brute-force both runs and compare heights
        let mut rng = stream(4, &[8]);
        let m = Matrix::from_fn(8, 3, |_, _| standard_normal(&mut rng));
        let d = distance_matrix(&m, DistanceKind::Euclidean).unwrap();
        let labels: Vec<String> = (0..8).map(|i| i.to_string()).collect();
        let single = hier_cluster(&d, Linkage::Single, labels.clone()).unwrap();
        let complete = hier_cluster(&d, Linkage::Complete, labels).unwrap();
        for (s, c) in single.merges.iter().zip(&complete.merges) {
            assert!(c.height >= s.height - 1e-12);
        }
        // heights are monotone non-decreasing for both
        for tree in [&single, &complete] {
            for w in tree.merges.windows(2) {
                assert!(w[1].height >= w[0].height - 1e-12);
            }
        }
    }

    #[test]
    fn relabeling_items_permutes_the_canonical_leaf_order() {
        let mut rng = stream(21, &[5]);
        let m = Matrix::from_fn(7, 4, |_, _| standard_normal(&mut rng));
        let d = distance_matrix(&m, DistanceKind::Euclidean).unwrap();
        let labels: Vec<String> = (0..7).map(|i| format!("L{i}")).collect();
        let base = hier_cluster(&d, Linkage::Average, labels.clone()).unwrap();
        // reverse the item order and recluster
        let perm: Vec<usize> = (0..7).rev().collect();
        let mp = m.select_rows(&perm);
        let dp = distance_matrix(&mp, DistanceKind::Euclidean).unwrap();
        let permuted_labels: Vec<String> = perm.iter().map(|&i| labels[i].clone()).collect();
        let permuted = hier_cluster(&dp, Linkage::Average, permuted_labels).unwrap();
        let names_base: Vec<&String> =
            base.leaf_order().into_iter().map(|i| &base.leaf_labels[i]).collect();
        let names_perm: Vec<&String> =
            permuted.leaf_order().into_iter().map(|i| &permuted.leaf_labels[i]).collect();
        assert_eq!(names_base, names_perm, "canonical order is label-stable");
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let m = blobs(20, 7);
        let p = k_means(&m, 2, 3, 11).unwrap();
        let first = p.assignment[0];
        assert!(p.assignment[..20].iter().all(|&a| a == first));
        assert!(p.assignment[20..].iter().all(|&a| a != first));
        // determinism
        let q = k_means(&m, 2, 3, 11).unwrap();
        assert_eq!(p.assignment, q.assignment);
    }

    #[test]
    fn kmeans_k1_gives_feature_means_and_total_ss() {
        let m = Matrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 6.0]);
        let p = k_means(&m, 1, 1, 0).unwrap();
        assert!((p.centers.at(0, 0) - 3.0).abs() < 1e-12);
        let ss: f64 = [1.0, 2.0, 3.0, 6.0].iter().map(|v| (v - 3.0f64).powi(2)).sum();
        assert!((p.inertia - ss).abs() < 1e-12);
        assert!(matches!(k_means(&m, 5, 1, 0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn kmeans_imputes_missing_with_warning() {
        let mut m = blobs(10, 3);
        m.set(0, 1, f64::NAN);
        let p = k_means(&m, 2, 2, 5).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("imputed"));
    }

    #[test]
    fn som_two_by_one_matches_kmeans_on_blobs() {
        let m = blobs(20, 19);
        let km = k_means(&m, 2, 3, 23).unwrap();
        let sm = som(&m, &SomParams::defaults(2, 1), 23).unwrap();
        assert!(sm.same_grouping(&km), "SOM 2x1 should split the blobs like k = 2");
        // quantization error close to k-means inertia on this easy fixture
        assert!(sm.inertia <= km.inertia * 1.05 + 1e-9);
    }

    #[test]
    fn som_single_unit_and_zero_epochs() {
        let m = blobs(5, 2);
        let p = som(&m, &SomParams { epochs: 7, ..SomParams::defaults(1, 1) }, 3).unwrap();
        assert!(p.assignment.iter().all(|&a| a == 0));
        // epochs = 0: assignment fixed by the seeded initial codebook
        let a = som(&m, &SomParams { epochs: 0, ..SomParams::defaults(2, 1) }, 5).unwrap();
        let b = som(&m, &SomParams { epochs: 0, ..SomParams::defaults(2, 1) }, 5).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.centers, b.centers);
    }

    #[test]
    fn hex_topology_runs() {
        let m = blobs(10, 31);
        let p = som(
            &m,
            &SomParams { topology: SomTopology::Hex, ..SomParams::defaults(2, 2) },
            9,
        )
        .unwrap();
        assert_eq!(p.assignment.len(), 20);
    }
}
