//! Scale normalization by MAD ratios, anchored at the geometric mean so
//! the overall scale of the dataset is preserved.

use super::NormalizedDataset;
use crate::matrix::mad;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const MIN_VALUES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleScope {
    /// Equalize print-tip blocks within each chip.
    PrintTipMad,
    /// Equalize chips across the dataset.
    GlobalMad,
}

impl ScaleScope {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "printTipMAD" | "printtipmad" => ScaleScope::PrintTipMad,
            "globalMAD" | "globalmad" => ScaleScope::GlobalMad,
            other => return Err(Error::Usage(format!("unknown scale scope `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScaleScope::PrintTipMad => "printTipMAD",
            ScaleScope::GlobalMad => "globalMAD",
        }
    }
}

fn usable_w(ds: &NormalizedDataset, chip: usize, spots: &[usize]) -> Vec<f64> {
    spots
        .iter()
        .filter(|&&s| *ds.use_spot.get(s, chip))
        .map(|&s| ds.w.at(s, chip))
        .filter(|v| v.is_finite())
        .collect()
}

fn unit_mad(values: &[f64], unit: &str) -> Result<f64> {
    if values.len() < MIN_VALUES {
        return Err(Error::TooFewPoints {
            unit: unit.to_string(),
            needed: MIN_VALUES,
            found: values.len(),
        });
    }
    let m = mad(values);
    if !(m > 0.0) {
        return Err(Error::ZeroMad { unit: unit.to_string() });
    }
    Ok(m)
}

fn geometric_mean(values: &[f64]) -> f64 {
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

/// Divide each unit's W by its MAD relative to the geometric mean of the
/// unit MADs: chips under `GlobalMad`, blocks within each chip under
/// `PrintTipMad`. Only selected finite cells contribute to the MADs;
/// every cell of the unit is rescaled.
pub fn normalize_scale_mad(ds: &NormalizedDataset, scope: ScaleScope) -> Result<NormalizedDataset> {
    let mut out = ds.clone();
    match scope {
        ScaleScope::GlobalMad => {
            let all: Vec<usize> = (0..ds.genes()).collect();
            let mut mads = Vec::with_capacity(ds.chips());
            for c in 0..ds.chips() {
                mads.push(unit_mad(&usable_w(ds, c, &all), &format!("chip {c}"))?);
            }
            let anchor = geometric_mean(&mads);
            for c in 0..ds.chips() {
                let factor = mads[c] / anchor;
                for s in 0..ds.genes() {
                    let v = out.w.at(s, c);
                    out.w.set(s, c, v / factor);
                }
            }
        }
        ScaleScope::PrintTipMad => {
            let grid = ds.grid.ok_or_else(|| {
                Error::InvalidParam(
                    "printTipMAD needs chip geometry; this dataset has none".to_string(),
                )
            })?;
            let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); grid.block_count()];
            for s in 0..ds.genes() {
                blocks[grid.block_of(s)].push(s);
            }
            for c in 0..ds.chips() {
                let mut mads = Vec::with_capacity(blocks.len());
                for (b, spots) in blocks.iter().enumerate() {
                    mads.push(unit_mad(
                        &usable_w(ds, c, spots),
                        &format!("chip {c} block {b}"),
                    )?);
                }
                let anchor = geometric_mean(&mads);
                for (b, spots) in blocks.iter().enumerate() {
                    let factor = mads[b] / anchor;
                    for &s in spots {
                        let v = out.w.at(s, c);
                        out.w.set(s, c, v / factor);
                    }
                }
            }
        }
    }
    out.push_log("scaleMAD", &[("scope", scope.name().to_string())]);
    Ok(out)
}
