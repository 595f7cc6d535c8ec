//! Normalization: background correction, W/A computation, loess and MAD
//! scale adjustment, per-spot uncertainty from repeated loess, and
//! replicate summarization.
//!
//! `W = log2(interest) - log2(reference)` per cell, with the interest
//! channel taken from the sample sheet, so dye swaps negate nothing but
//! the underlying channels. Cells whose corrected intensity is
//! nonpositive become `NaN` and stay missing through the pipeline.

mod loess;
mod scale;

pub use loess::{normalize_loess, normalize_repeated_loess, LoessScope};
pub use scale::{normalize_scale_mad, ScaleScope};

use crate::ingest::{
    Channel, GeneGroup, GeneNetwork, GridGeometry, LabelTable, RawDataset, SampleSheet,
};
use crate::matrix::{finite_mean, finite_median, BoolMatrix, Matrix};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Background {
    None,
    Subtract,
    MinimumPositive,
}

impl Background {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "none" => Background::None,
            "subtract" => Background::Subtract,
            "minimum" | "minimumPositive" => Background::MinimumPositive,
            other => return Err(Error::Usage(format!("unknown background method `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Background::None => "none",
            Background::Subtract => "subtract",
            Background::MinimumPositive => "minimumPositive",
        }
    }
}

/// One normalization step, for the dataset's audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub op: String,
    pub params: BTreeMap<String, String>,
}

/// Normalized dataset: W and A (spot x chip), optional per-spot SD and
/// confidence bounds from repeated loess, and the annotations carried
/// over from the raw dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDataset {
    pub w: Matrix,
    pub a: Matrix,
    pub sw: Option<Matrix>,
    pub w_lo: Option<Matrix>,
    pub w_hi: Option<Matrix>,
    pub use_spot: BoolMatrix,
    pub bad_spot: Vec<bool>,
    pub gene_map: LabelTable,
    pub samples: SampleSheet,
    pub gene_groups: Vec<GeneGroup>,
    pub gene_networks: Vec<GeneNetwork>,
    /// Chip geometry; cleared once rows no longer correspond to spots.
    pub grid: Option<GridGeometry>,
    /// Label whose values identify rows after summarization.
    pub primary_gene_label: Option<String>,
    pub dataset_id: String,
    pub notes: String,
    pub log: Vec<LogRecord>,
}

impl NormalizedDataset {
    pub fn genes(&self) -> usize {
        self.w.rows()
    }

    pub fn chips(&self) -> usize {
        self.w.cols()
    }

    /// Row identifiers: the summarization label when set, else the first
    /// gene-map column, else synthesized row numbers.
    pub fn gene_ids(&self) -> Vec<String> {
        if let Some(label) = &self.primary_gene_label {
            if let Ok(values) = self.gene_map.values(label) {
                return values.to_vec();
            }
        }
        if let Some(first) = self.gene_map.names().first() {
            if let Ok(values) = self.gene_map.values(first) {
                return values.to_vec();
            }
        }
        (0..self.genes()).map(|i| format!("row{i}")).collect()
    }

    pub(crate) fn push_log(&mut self, op: &str, params: &[(&str, String)]) {
        self.log.push(LogRecord {
            op: op.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        });
    }
}

/// Background-corrected channel intensities (ch1, ch2). Nonpositive
/// corrected values become `NaN` except under `MinimumPositive`, which
/// floors them at half the smallest positive corrected value of the same
/// chip and channel.
pub fn background_correct(raw: &RawDataset, method: Background) -> (Matrix, Matrix) {
    let correct = |fg: &Matrix, bg: &Matrix| -> Matrix {
        match method {
            Background::None => fg.map(|v| if v > 0.0 { v } else { f64::NAN }),
            Background::Subtract => Matrix::from_fn(fg.rows(), fg.cols(), |r, c| {
                let v = fg.at(r, c) - bg.at(r, c);
                if v > 0.0 {
                    v
                } else {
                    f64::NAN
                }
            }),
            Background::MinimumPositive => {
                let mut out = Matrix::from_fn(fg.rows(), fg.cols(), |r, c| {
                    fg.at(r, c) - bg.at(r, c)
                });
                for c in 0..out.cols() {
                    let mut min_pos = f64::INFINITY;
                    for r in 0..out.rows() {
                        let v = out.at(r, c);
                        if v > 0.0 && v < min_pos {
                            min_pos = v;
                        }
                    }
                    let floor =
                        if min_pos.is_finite() { min_pos / 2.0 } else { f64::NAN };
                    for r in 0..out.rows() {
                        if !(out.at(r, c) > 0.0) {
                            out.set(r, c, floor);
                        }
                    }
                }
                out
            }
        }
    };
    (correct(&raw.ch1_fg, &raw.ch1_bg), correct(&raw.ch2_fg, &raw.ch2_bg))
}

/// Compute the unnormalized W/A dataset from corrected intensities.
pub fn compute_wa(raw: &RawDataset, method: Background) -> NormalizedDataset {
    let (ch1, ch2) = background_correct(raw, method);
    let spots = raw.spots();
    let chips = raw.chips();
    let mut w = Matrix::nan(spots, chips);
    let mut a = Matrix::nan(spots, chips);
    for c in 0..chips {
        let interest_is_ch1 = raw.samples.interest[c] == Channel::Ch1;
        for s in 0..spots {
            let (i_val, c_val) = if interest_is_ch1 {
                (ch1.at(s, c), ch2.at(s, c))
            } else {
                (ch2.at(s, c), ch1.at(s, c))
            };
            if i_val.is_nan() || c_val.is_nan() {
                continue;
            }
            let li = i_val.log2();
            let lc = c_val.log2();
            w.set(s, c, li - lc);
            a.set(s, c, (li + lc) / 2.0);
        }
    }
    let mut ds = NormalizedDataset {
        w,
        a,
        sw: None,
        w_lo: None,
        w_hi: None,
        use_spot: raw.use_spot.clone(),
        bad_spot: raw.bad_spot.clone(),
        gene_map: raw.gene_map.clone(),
        samples: raw.samples.clone(),
        gene_groups: raw.gene_groups.clone(),
        gene_networks: raw.gene_networks.clone(),
        grid: Some(raw.grid),
        primary_gene_label: None,
        dataset_id: raw.dataset_id.clone(),
        notes: raw.notes.clone(),
        log: Vec::new(),
    };
    ds.push_log("computeWA", &[("bkg", method.name().to_string())]);
    ds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SummaryFn {
    Mean,
    Median,
    None,
}

impl SummaryFn {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "mean" => SummaryFn::Mean,
            "median" => SummaryFn::Median,
            "none" => SummaryFn::None,
            other => return Err(Error::Usage(format!("unknown summary function `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SummaryFn::Mean => "mean",
            SummaryFn::Median => "median",
            SummaryFn::None => "none",
        }
    }

    fn apply(&self, values: &[f64]) -> f64 {
        match self {
            SummaryFn::Mean => finite_mean(values),
            SummaryFn::Median => finite_median(values),
            SummaryFn::None => unreachable!("None never aggregates"),
        }
    }
}

fn distinct_joined(values: &[&str]) -> String {
    let mut seen: Vec<&str> = Vec::new();
    for v in values {
        if !seen.contains(v) {
            seen.push(v);
        }
    }
    seen.join("/")
}

fn has_duplicates(values: &[String]) -> bool {
    let mut sorted: Vec<&String> = values.iter().collect();
    sorted.sort();
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Collapse replicate spots (rows sharing a gene label) and replicate
/// samples (chips sharing a sample label). Missing values are skipped by
/// the summary functions; SD/CI matrices are dropped because they would
/// need recomputation.
pub fn summarize_replicates(
    ds: &NormalizedDataset,
    g_label: &str,
    s_label: &str,
    func_spots: SummaryFn,
    func_samples: SummaryFn,
    keep_empty: bool,
    rm_bad: bool,
) -> Result<NormalizedDataset> {
    let gene_values = ds.gene_map.values(g_label)?.to_vec();
    let sample_values = ds.samples.labels.values(s_label)?.to_vec();

    if func_spots == SummaryFn::None && func_samples == SummaryFn::None {
        let kept: Vec<String> = gene_values
            .iter()
            .zip(&ds.bad_spot)
            .filter(|(v, &bad)| (keep_empty || !v.is_empty()) && !(rm_bad && bad))
            .map(|(v, _)| v.clone())
            .collect();
        if has_duplicates(&kept) || has_duplicates(&sample_values) {
            return Err(Error::AmbiguousSummary);
        }
    }

    // row filtering, then row grouping in first-occurrence order
    let mut kept_rows: Vec<usize> = Vec::new();
    for r in 0..ds.genes() {
        if rm_bad && ds.bad_spot[r] {
            continue;
        }
        if !keep_empty && gene_values[r].is_empty() {
            continue;
        }
        kept_rows.push(r);
    }
    let row_groups: Vec<(String, Vec<usize>)> = if func_spots == SummaryFn::None {
        kept_rows.iter().map(|&r| (gene_values[r].clone(), vec![r])).collect()
    } else {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for &r in &kept_rows {
            let key = &gene_values[r];
            match groups.iter_mut().find(|(k, _)| k == key) {
                Some((_, rows)) => rows.push(r),
                None => groups.push((key.clone(), vec![r])),
            }
        }
        groups
    };

    let col_groups: Vec<(String, Vec<usize>)> = if func_samples == SummaryFn::None {
        (0..ds.chips()).map(|c| (sample_values[c].clone(), vec![c])).collect()
    } else {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for c in 0..ds.chips() {
            let key = &sample_values[c];
            match groups.iter_mut().find(|(k, _)| k == key) {
                Some((_, cols)) => cols.push(c),
                None => groups.push((key.clone(), vec![c])),
            }
        }
        groups
    };

    let collapse = |m: &Matrix| -> Matrix {
        // rows first, then columns
        let mut rowed = Matrix::nan(row_groups.len(), ds.chips());
        for (gi, (_, rows)) in row_groups.iter().enumerate() {
            for c in 0..ds.chips() {
                let vals: Vec<f64> = rows.iter().map(|&r| m.at(r, c)).collect();
                let v = if rows.len() == 1 {
                    vals[0]
                } else {
                    func_spots.apply(&vals)
                };
                rowed.set(gi, c, v);
            }
        }
        let mut out = Matrix::nan(row_groups.len(), col_groups.len());
        for (ci, (_, cols)) in col_groups.iter().enumerate() {
            for g in 0..row_groups.len() {
                let vals: Vec<f64> = cols.iter().map(|&c| rowed.at(g, c)).collect();
                let v = if cols.len() == 1 {
                    vals[0]
                } else {
                    func_samples.apply(&vals)
                };
                out.set(g, ci, v);
            }
        }
        out
    };

    let w = collapse(&ds.w);
    let a = collapse(&ds.a);

    // masks: a collapsed cell is usable when any contributor was
    let mut use_spot = BoolMatrix::filled(row_groups.len(), col_groups.len(), false);
    for (gi, (_, rows)) in row_groups.iter().enumerate() {
        for (ci, (_, cols)) in col_groups.iter().enumerate() {
            let any = rows
                .iter()
                .any(|&r| cols.iter().any(|&c| *ds.use_spot.get(r, c)));
            use_spot.set(gi, ci, any);
        }
    }

    // gene labels: the grouping column keeps its value, others join their
    // distinct contributors
    let gene_names = ds.gene_map.names().to_vec();
    let mut gene_columns: Vec<Vec<String>> = Vec::with_capacity(gene_names.len());
    for name in &gene_names {
        let source = ds.gene_map.values(name)?;
        let column: Vec<String> = row_groups
            .iter()
            .map(|(key, rows)| {
                if name == g_label {
                    key.clone()
                } else {
                    let vals: Vec<&str> = rows.iter().map(|&r| source[r].as_str()).collect();
                    distinct_joined(&vals)
                }
            })
            .collect();
        gene_columns.push(column);
    }
    let gene_map = LabelTable::new(gene_names, gene_columns);

    let sample_names = ds.samples.labels.names().to_vec();
    let mut sample_columns: Vec<Vec<String>> = Vec::with_capacity(sample_names.len());
    for name in &sample_names {
        let source = ds.samples.labels.values(name)?;
        let column: Vec<String> = col_groups
            .iter()
            .map(|(key, cols)| {
                if name == s_label {
                    key.clone()
                } else {
                    let vals: Vec<&str> = cols.iter().map(|&c| source[c].as_str()).collect();
                    distinct_joined(&vals)
                }
            })
            .collect();
        sample_columns.push(column);
    }
    let samples = SampleSheet {
        file_names: col_groups.iter().map(|(k, _)| k.clone()).collect(),
        interest: vec![Channel::Ch1; col_groups.len()],
        labels: LabelTable::new(sample_names, sample_columns),
    };

    let rows_untouched = func_spots == SummaryFn::None && kept_rows.len() == ds.genes();
    let mut out = NormalizedDataset {
        w,
        a,
        sw: None,
        w_lo: None,
        w_hi: None,
        use_spot,
        bad_spot: if rows_untouched {
            ds.bad_spot.clone()
        } else {
            vec![false; row_groups.len()]
        },
        gene_map,
        samples,
        gene_groups: ds.gene_groups.clone(),
        gene_networks: ds.gene_networks.clone(),
        grid: if rows_untouched { ds.grid } else { None },
        primary_gene_label: Some(g_label.to_string()),
        dataset_id: ds.dataset_id.clone(),
        notes: ds.notes.clone(),
        log: ds.log.clone(),
    };
    out.push_log(
        "summarize",
        &[
            ("geneLabel", g_label.to_string()),
            ("sampleLabel", s_label.to_string()),
            ("spots", func_spots.name().to_string()),
            ("samples", func_samples.name().to_string()),
            ("keepEmpty", keep_empty.to_string()),
            ("rmBad", rm_bad.to_string()),
        ],
    );
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_fixtures {
    use super::*;

    /// Direct W-matrix dataset for analysis tests: genes x samples with a
    /// single sample label column.
    pub fn from_w(w: Matrix, label_name: &str, label_values: &[&str]) -> NormalizedDataset {
        let genes = w.rows();
        let chips = w.cols();
        assert_eq!(chips, label_values.len());
        let gene_names: Vec<String> = (0..genes).map(|i| format!("G{i:03}")).collect();
        NormalizedDataset {
            a: Matrix::filled(genes, chips, 10.0),
            sw: None,
            w_lo: None,
            w_hi: None,
            use_spot: BoolMatrix::filled(genes, chips, true),
            bad_spot: vec![false; genes],
            gene_map: LabelTable::new(vec!["Name".into()], vec![gene_names]),
            samples: SampleSheet {
                file_names: (0..chips).map(|i| format!("S{i:02}")).collect(),
                interest: vec![Channel::Ch1; chips],
                labels: LabelTable::new(
                    vec![label_name.to_string()],
                    vec![label_values.iter().map(|s| s.to_string()).collect()],
                ),
            },
            gene_groups: Vec::new(),
            gene_networks: Vec::new(),
            grid: None,
            primary_gene_label: Some("Name".into()),
            dataset_id: "synthetic".into(),
            notes: String::new(),
            log: Vec::new(),
            w,
        }
    }
}
