//! Data ingest: declarative load config, strict quantification-table
//! loading, gene groups and networks, and pre-normalization spot
//! selection.
//!
//! A [`RawDataset`] is immutable once built; the "mutating" operations
//! consume it and return a new value, so a dataset can be shared
//! read-only across threads.

pub mod config;
pub mod load;

pub use config::{parse_config, parse_config_file, LoadConfig};
pub use load::{load_dataset, read_group_file, read_network_file, LoadReport};

use crate::matrix::{BoolMatrix, IntMatrix, Matrix};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Chip geometry: a meta-grid of `grid_r x grid_c` print-tip blocks, each
/// `tip_r x tip_c` spots. Spot indices run in scan order: meta-grid rows,
/// then meta-grid columns, then rows and columns within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub grid_r: usize,
    pub grid_c: usize,
    pub tip_r: usize,
    pub tip_c: usize,
}

impl GridGeometry {
    pub fn spots(&self) -> usize {
        self.grid_r * self.grid_c * self.tip_r * self.tip_c
    }

    pub fn block_count(&self) -> usize {
        self.grid_r * self.grid_c
    }

    pub fn spots_per_block(&self) -> usize {
        self.tip_r * self.tip_c
    }

    pub fn spot_index(&self, gr: usize, gc: usize, tr: usize, tc: usize) -> usize {
        ((gr * self.grid_c + gc) * self.tip_r + tr) * self.tip_c + tc
    }

    pub fn position(&self, index: usize) -> (usize, usize, usize, usize) {
        let tc = index % self.tip_c;
        let rest = index / self.tip_c;
        let tr = rest % self.tip_r;
        let rest = rest / self.tip_r;
        let gc = rest % self.grid_c;
        let gr = rest / self.grid_c;
        (gr, gc, tr, tc)
    }

    /// Print-tip block of a spot, row-major over the meta-grid.
    pub fn block_of(&self, index: usize) -> usize {
        let (gr, gc, _, _) = self.position(index);
        gr * self.grid_c + gc
    }

    /// Physical (row, column) of a spot on the full chip lattice of
    /// `grid_r * tip_r` rows by `grid_c * tip_c` columns.
    pub fn chip_position(&self, index: usize) -> (usize, usize) {
        let (gr, gc, tr, tc) = self.position(index);
        (gr * self.tip_r + tr, gc * self.tip_c + tc)
    }
}

/// Named columns of text values; used for both gene labels (one row per
/// spot) and sample labels (one row per chip).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTable {
    names: Vec<String>,
    columns: Vec<Vec<String>>,
}

impl LabelTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<String>>) -> Self {
        assert_eq!(names.len(), columns.len());
        if let Some(first) = columns.first() {
            assert!(columns.iter().all(|c| c.len() == first.len()));
        }
        LabelTable { names, columns }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn values(&self, name: &str) -> Result<&[String]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownLabel { label: name.to_string() })
    }

    pub fn get(&self, name: &str, row: usize) -> Result<&str> {
        Ok(&self.values(name)?[row])
    }

    /// Row values in declared column order.
    pub fn row(&self, row: usize) -> Vec<String> {
        self.columns.iter().map(|c| c[row].clone()).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> LabelTable {
        LabelTable {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r].clone()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Ch1,
    Ch2,
}

impl Channel {
    pub fn parse(text: &str) -> Result<Channel> {
        match text {
            "ch1" => Ok(Channel::Ch1),
            "ch2" => Ok(Channel::Ch2),
            other => Err(Error::InvalidParam(format!(
                "interestChannel must be ch1 or ch2, got `{other}`"
            ))),
        }
    }

    pub fn flipped(self) -> Channel {
        match self {
            Channel::Ch1 => Channel::Ch2,
            Channel::Ch2 => Channel::Ch1,
        }
    }
}

/// One row per chip: quantification file, which channel carries the
/// interest sample (the dye-swap encoding), and the sample labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSheet {
    pub file_names: Vec<String>,
    pub interest: Vec<Channel>,
    pub labels: LabelTable,
}

impl SampleSheet {
    pub fn chips(&self) -> usize {
        self.file_names.len()
    }
}

/// Named list of gene labels. Membership is resolved against the gene map
/// at use time, so groups survive replicate summarization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneGroup {
    pub name: String,
    pub label_id: String,
    pub members: Vec<String>,
}

impl GeneGroup {
    /// Spot/gene rows whose `label_id` value is a member, plus the members
    /// that resolve to nothing.
    pub fn resolve(&self, map: &LabelTable) -> Result<(Vec<usize>, Vec<String>)> {
        let values = map.values(&self.label_id)?;
        let mut rows = Vec::new();
        let mut unresolved = Vec::new();
        for member in &self.members {
            let mut hit = false;
            for (i, v) in values.iter().enumerate() {
                if v == member {
                    rows.push(i);
                    hit = true;
                }
            }
            if !hit {
                unresolved.push(member.clone());
            }
        }
        rows.sort_unstable();
        rows.dedup();
        Ok((rows, unresolved))
    }
}

/// Undirected edge list over gene labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneNetwork {
    pub name: String,
    pub label_id: String,
    pub edges: Vec<(String, String)>,
}

impl GeneNetwork {
    /// Distinct node labels in first-appearance order.
    pub fn nodes(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for (a, b) in &self.edges {
            if !seen.contains(a) {
                seen.push(a.clone());
            }
            if !seen.contains(b) {
                seen.push(b.clone());
            }
        }
        seen
    }
}

/// Raw two-channel dataset: four intensity matrices (spot x chip), the
/// scanner flags, the spot-selection mask, and all annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub ch1_fg: Matrix,
    pub ch1_bg: Matrix,
    pub ch2_fg: Matrix,
    pub ch2_bg: Matrix,
    pub flags: IntMatrix,
    pub use_spot: BoolMatrix,
    pub bad_spot: Vec<bool>,
    pub gene_map: LabelTable,
    pub samples: SampleSheet,
    pub gene_groups: Vec<GeneGroup>,
    pub gene_networks: Vec<GeneNetwork>,
    pub grid: GridGeometry,
    pub dataset_id: String,
    pub notes: String,
}

/// Outcome of resolving a group or network against the gene map.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolveReport {
    pub name: String,
    pub resolved: usize,
    pub unresolved: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectParams {
    /// Keep a spot only when fg/bg >= sig_noise on both channels
    /// (bg = 0 counts as an infinite ratio).
    pub sig_noise: f64,
    pub rm_flags: Vec<i64>,
    pub remove_names: Vec<String>,
    pub label_id: Option<String>,
}

impl RawDataset {
    pub fn spots(&self) -> usize {
        self.ch1_fg.rows()
    }

    pub fn chips(&self) -> usize {
        self.ch1_fg.cols()
    }

    /// Register a gene group. Unresolved members are kept and reported,
    /// never dropped.
    pub fn add_gene_group(
        mut self,
        name: &str,
        members: &[String],
        label_id: &str,
    ) -> Result<(Self, ResolveReport)> {
        if members.is_empty() {
            return Err(Error::EmptyMembers { name: name.to_string() });
        }
        if self.gene_groups.iter().any(|g| g.name == name) {
            return Err(Error::DuplicateName { name: name.to_string() });
        }
        let group = GeneGroup {
            name: name.to_string(),
            label_id: label_id.to_string(),
            members: members.to_vec(),
        };
        let (rows, unresolved) = group.resolve(&self.gene_map)?;
        let report = ResolveReport { name: name.to_string(), resolved: rows.len(), unresolved };
        self.gene_groups.push(group);
        Ok((self, report))
    }

    /// Register a gene network. Self edges are rejected and duplicate
    /// undirected edges collapse to one.
    pub fn add_network(
        mut self,
        name: &str,
        edges: &[(String, String)],
        label_id: &str,
    ) -> Result<(Self, ResolveReport)> {
        if edges.is_empty() {
            return Err(Error::EmptyMembers { name: name.to_string() });
        }
        if self.gene_networks.iter().any(|n| n.name == name) {
            return Err(Error::DuplicateName { name: name.to_string() });
        }
        let mut canon: Vec<(String, String)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::SelfEdge { gene: a.clone() });
            }
            let e = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            if !canon.contains(&e) {
                canon.push(e);
            }
        }
        let network =
            GeneNetwork { name: name.to_string(), label_id: label_id.to_string(), edges: canon };
        let values = self.gene_map.values(label_id)?;
        let mut unresolved = Vec::new();
        let mut resolved = 0usize;
        for node in network.nodes() {
            if values.iter().any(|v| *v == node) {
                resolved += 1;
            } else {
                unresolved.push(node);
            }
        }
        let report = ResolveReport { name: name.to_string(), resolved, unresolved };
        self.gene_networks.push(network);
        Ok((self, report))
    }

    /// Recompute the spot-selection mask. Selection is per chip column:
    /// a spot is kept when both channels clear the signal-to-noise ratio,
    /// its flag is not excluded, its gene label is not removed, and it is
    /// not marked bad.
    pub fn select_spots(mut self, params: &SelectParams) -> Result<Self> {
        if params.sig_noise < 0.0 {
            return Err(Error::InvalidParam(format!(
                "sigNoise = {} must be >= 0",
                params.sig_noise
            )));
        }
        if !params.remove_names.is_empty() && params.label_id.is_none() {
            return Err(Error::RemoveWithoutLabel);
        }
        let removed_rows: Vec<bool> = match &params.label_id {
            Some(label) => {
                let values = self.gene_map.values(label)?;
                values.iter().map(|v| params.remove_names.contains(v)).collect()
            }
            None => vec![false; self.spots()],
        };
        let ratio_ok = |fg: f64, bg: f64| -> bool {
            if bg == 0.0 {
                true // treated as +inf
            } else {
                fg / bg >= params.sig_noise
            }
        };
        let spots = self.spots();
        let chips = self.chips();
        let mut mask = BoolMatrix::filled(spots, chips, false);
        for s in 0..spots {
            for c in 0..chips {
                let keep = ratio_ok(self.ch1_fg.at(s, c), self.ch1_bg.at(s, c))
                    && ratio_ok(self.ch2_fg.at(s, c), self.ch2_bg.at(s, c))
                    && !params.rm_flags.contains(self.flags.get(s, c))
                    && !removed_rows[s]
                    && !self.bad_spot[s];
                mask.set(s, c, keep);
            }
        }
        self.use_spot = mask;
        Ok(self)
    }

    /// Mark spots as bad; subsequent `select_spots` calls exclude them.
    pub fn mark_bad_spots(mut self, spot_indices: &[usize]) -> Result<Self> {
        for &i in spot_indices {
            if i >= self.spots() {
                return Err(Error::IndexOutOfRange { index: i, len: self.spots() });
            }
            self.bad_spot[i] = true;
        }
        Ok(self)
    }
}


#[cfg(test)]
mod tests {
    use super::test_fixtures::tiny_raw;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sig_noise_threshold_is_inclusive() {
        let mut ds = tiny_raw(2, 1);
        ds.ch1_fg.set(0, 0, 150.0);
        ds.ch1_bg.set(0, 0, 100.0);
        ds.ch2_fg.set(0, 0, 150.0);
        ds.ch2_bg.set(0, 0, 100.0);
        let ds =
            ds.select_spots(&SelectParams { sig_noise: 1.5, ..Default::default() }).unwrap();
        assert!(*ds.use_spot.get(0, 0), "ratio exactly 1.5 must be kept");
        assert!(*ds.use_spot.get(1, 0), "ratio 2.0 kept");
    }

    #[test]
    fn zero_background_counts_as_infinite_ratio() {
        let mut ds = tiny_raw(1, 1);
        ds.ch1_bg.set(0, 0, 0.0);
        ds.ch2_bg.set(0, 0, 0.0);
        let ds =
            ds.select_spots(&SelectParams { sig_noise: 1e9, ..Default::default() }).unwrap();
        assert!(*ds.use_spot.get(0, 0));
    }

    #[test]
    fn select_with_defaults_keeps_everything() {
        let ds = tiny_raw(4, 2).select_spots(&SelectParams::default()).unwrap();
        assert!(ds.use_spot.data().iter().all(|&b| b));
    }

    #[test]
    fn remove_names_excludes_whole_rows() {
        let mut ds = tiny_raw(4, 2);
        ds.gene_map = LabelTable::new(
            vec!["Name".into()],
            vec![vec!["BLANK".into(), "DAP".into(), "KLK13".into(), "EVPL".into()]],
        );
        let ds = ds
            .select_spots(&SelectParams {
                sig_noise: 1.0,
                remove_names: vec!["BLANK".into(), "DAP".into()],
                label_id: Some("Name".into()),
                ..Default::default()
            })
            .unwrap();
        for c in 0..2 {
            assert!(!*ds.use_spot.get(0, c));
            assert!(!*ds.use_spot.get(1, c));
            assert!(*ds.use_spot.get(2, c));
            assert!(*ds.use_spot.get(3, c));
        }
    }

    #[test]
    fn remove_names_without_label_errors() {
        let err = tiny_raw(2, 1)
            .select_spots(&SelectParams {
                remove_names: vec!["BLANK".into()],
                ..Default::default()
            })
            .unwrap_err();
        assert!(matches!(err, Error::RemoveWithoutLabel));
    }

    #[test]
    fn flags_exclude_per_cell() {
        let mut ds = tiny_raw(2, 2);
        ds.flags.set(1, 0, -50);
        let ds =
            ds.select_spots(&SelectParams { rm_flags: vec![-50], ..Default::default() }).unwrap();
        assert!(!*ds.use_spot.get(1, 0));
        assert!(*ds.use_spot.get(1, 1));
    }

    #[test]
    fn select_is_idempotent_and_monotone() {
        let mut ds = tiny_raw(3, 2);
        ds.flags.set(0, 0, 4);
        ds.flags.set(2, 1, 1);
        let p1 = SelectParams { rm_flags: vec![4], ..Default::default() };
        let once = ds.clone().select_spots(&p1).unwrap();
        let twice = once.clone().select_spots(&p1).unwrap();
        assert_eq!(once.use_spot, twice.use_spot);
        // enlarging rm_flags never re-enables
        let p2 = SelectParams { rm_flags: vec![4, 1], ..Default::default() };
        let bigger = once.clone().select_spots(&p2).unwrap();
        for (a, b) in bigger.use_spot.data().iter().zip(once.use_spot.data()) {
            assert!(!*a || *b);
        }
    }

    #[test]
    fn bad_spots_flow_into_selection() {
        let ds = tiny_raw(3, 2).mark_bad_spots(&[1]).unwrap();
        assert!(ds.bad_spot[1]);
        let ds = ds.select_spots(&SelectParams::default()).unwrap();
        assert!(!*ds.use_spot.get(1, 0) && !*ds.use_spot.get(1, 1));
        // marking everything then selecting turns the mask all-false
        let all = tiny_raw(3, 1)
            .mark_bad_spots(&[0, 1, 2])
            .unwrap()
            .select_spots(&SelectParams::default())
            .unwrap();
        assert!(all.use_spot.data().iter().all(|&b| !b));
        // marking none changes nothing
        let same = tiny_raw(3, 1).mark_bad_spots(&[]).unwrap();
        assert_eq!(same.bad_spot, vec![false; 3]);
        assert!(matches!(tiny_raw(2, 1).mark_bad_spots(&[5]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn groups_resolve_and_report_unresolved() {
        let ds = tiny_raw(8, 1);
        let members: Vec<String> = (0..8).map(|i| format!("G{i:03}")).collect();
        let (ds, report) = ds.add_gene_group("all", &members, "Name").unwrap();
        assert_eq!(report.resolved, 8);
        assert!(report.unresolved.is_empty());
        let (ds, report) =
            ds.add_gene_group("partial", &["G001".into(), "NOPE".into()], "Name").unwrap();
        assert_eq!(report.resolved, 1);
        assert_eq!(report.unresolved, vec!["NOPE".to_string()]);
        // groups are kept with their unresolved members intact
        assert_eq!(ds.gene_groups[1].members.len(), 2);
        let err = ds.add_gene_group("all", &["G000".into()], "Name").unwrap_err();
        assert!(matches!(err, Error::DuplicateName { .. }));
    }

    #[test]
    fn networks_collapse_duplicate_edges_and_reject_self_edges() {
        let ds = tiny_raw(4, 1);
        let tri = vec![
            ("G000".to_string(), "G001".to_string()),
            ("G001".to_string(), "G002".to_string()),
            ("G002".to_string(), "G000".to_string()),
        ];
        let (ds, report) = ds.add_network("tri", &tri, "Name").unwrap();
        assert_eq!(ds.gene_networks[0].edges.len(), 3);
        assert_eq!(report.resolved, 3);
        let dup = vec![
            ("G000".to_string(), "G001".to_string()),
            ("G001".to_string(), "G000".to_string()),
        ];
        let (ds, _) = ds.add_network("dup", &dup, "Name").unwrap();
        assert_eq!(ds.gene_networks[1].edges.len(), 1);
        let selfie = vec![("G000".to_string(), "G000".to_string())];
        assert!(matches!(ds.add_network("selfie", &selfie, "Name"), Err(Error::SelfEdge { .. })));
    }

    proptest! {
        #[test]
        fn geometry_mapping_is_a_bijection(
            gr in 1usize..5, gc in 1usize..5, tr in 1usize..6, tc in 1usize..6
        ) {
            let g = GridGeometry { grid_r: gr, grid_c: gc, tip_r: tr, tip_c: tc };
            let mut seen = vec![false; g.spots()];
            for a in 0..gr {
                for b in 0..gc {
                    for c in 0..tr {
                        for d in 0..tc {
                            let idx = g.spot_index(a, b, c, d);
                            prop_assert!(idx < g.spots());
                            prop_assert!(!seen[idx]);
                            seen[idx] = true;
                            prop_assert_eq!(g.position(idx), (a, b, c, d));
                        }
                    }
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }
}
