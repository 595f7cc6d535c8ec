//! Single-file binary container for analysis objects.
//!
//! Layout: magic `MGES1`, little-endian throughout; a section count, then
//! named sections. A `json` section holds canonical JSON (sorted keys,
//! UTF-8, shortest round-trip floats); a `matrix` section holds row-major
//! 64-bit IEEE floats with a dimension header, `NaN` for missing.
//!
//! The content hash of an object is the SHA-256 of its canonical
//! serialization with the provenance and tool-version metadata removed,
//! so replaying a pipeline at a later time reproduces the same hashes.

use super::provenance::ProvenanceGraph;
use crate::classify::ClassifierResult;
use crate::diffexpr::{DeResult, StatFamily};
use crate::ingest::{
    GeneGroup, GeneNetwork, GridGeometry, LabelTable, RawDataset, SampleSheet,
};
use crate::matrix::{BoolMatrix, IntMatrix, Matrix};
use crate::netmod::{
    ConditionSlice, ModState, ModuleMode, ModuleResult, NetScore, RelNet, RelNetMode,
};
use crate::normalize::{LogRecord, NormalizedDataset};
use crate::stat::AdjustMethod;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

const MAGIC: &[u8; 5] = b"MGES1";

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    Json(Vec<u8>),
    Matrix(Matrix),
}

fn encode(sections: &[(String, Payload)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (name, payload) in sections {
        let name_bytes = name.as_bytes();
        out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(name_bytes);
        match payload {
            Payload::Json(bytes) => {
                out.push(0u8);
                out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
                out.extend_from_slice(bytes);
            }
            Payload::Matrix(m) => {
                out.push(1u8);
                let len = 16 + 8 * m.rows() * m.cols();
                out.extend_from_slice(&(len as u64).to_le_bytes());
                out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
                out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
                for v in m.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Container("truncated container".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode(bytes: &[u8]) -> Result<Vec<(String, Payload)>> {
    if bytes.len() < 5 || &bytes[..5] != MAGIC {
        return Err(Error::Container(format!(
            "bad magic: expected {:?}, found {:?}",
            String::from_utf8_lossy(MAGIC),
            String::from_utf8_lossy(bytes.get(..5).unwrap_or(b"")),
        )));
    }
    let mut r = Reader { bytes, pos: 5 };
    let count = r.u32()? as usize;
    let mut sections = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Container("section name is not UTF-8".into()))?;
        let kind = r.take(1)?[0];
        let payload_len = r.u64()? as usize;
        let payload = r.take(payload_len)?;
        match kind {
            0 => sections.push((name, Payload::Json(payload.to_vec()))),
            1 => {
                if payload.len() < 16 {
                    return Err(Error::Container(format!("matrix section `{name}` truncated")));
                }
                let rows = u64::from_le_bytes(payload[..8].try_into().unwrap()) as usize;
                let cols = u64::from_le_bytes(payload[8..16].try_into().unwrap()) as usize;
                if payload.len() != 16 + 8 * rows * cols {
                    return Err(Error::Container(format!(
                        "matrix section `{name}` length mismatch"
                    )));
                }
                let mut data = Vec::with_capacity(rows * cols);
                for chunk in payload[16..].chunks_exact(8) {
                    data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
                }
                sections.push((name, Payload::Matrix(Matrix::from_vec(rows, cols, data))));
            }
            other => {
                return Err(Error::Container(format!(
                    "unknown section kind {other} for `{name}`"
                )))
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Container("trailing bytes after the section table".into()));
    }
    Ok(sections)
}

/// Canonical JSON bytes: `serde_json` with its default BTreeMap object
/// representation already sorts keys and prints shortest floats.
fn canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?.into_bytes())
}

fn bools_to_matrix(values: &[bool]) -> Matrix {
    Matrix::from_vec(values.len(), 1, values.iter().map(|&b| f64::from(u8::from(b))).collect())
}

fn matrix_to_bools(m: &Matrix) -> Vec<bool> {
    m.data().iter().map(|&v| v != 0.0).collect()
}

fn bool_grid_to_matrix(g: &BoolMatrix) -> Matrix {
    Matrix::from_vec(
        g.rows(),
        g.cols(),
        g.data().iter().map(|&b| f64::from(u8::from(b))).collect(),
    )
}

fn matrix_to_bool_grid(m: &Matrix) -> BoolMatrix {
    BoolMatrix::from_vec(m.rows(), m.cols(), m.data().iter().map(|&v| v != 0.0).collect())
}

fn int_grid_to_matrix(g: &IntMatrix) -> Matrix {
    Matrix::from_vec(g.rows(), g.cols(), g.data().iter().map(|&v| v as f64).collect())
}

fn matrix_to_int_grid(m: &Matrix) -> IntMatrix {
    IntMatrix::from_vec(m.rows(), m.cols(), m.data().iter().map(|&v| v as i64).collect())
}

/// Any analysis result the pipeline can persist and hash.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisObject {
    Raw(RawDataset),
    Norm(NormalizedDataset),
    De(DeResult),
    Class(ClassifierResult),
    Net(RelNet),
    Modules(ModuleResult),
    Scores(NetScore),
}

impl AnalysisObject {
    pub fn type_name(&self) -> &'static str {
        match self {
            AnalysisObject::Raw(_) => "raw",
            AnalysisObject::Norm(_) => "normalized",
            AnalysisObject::De(_) => "de",
            AnalysisObject::Class(_) => "classifiers",
            AnalysisObject::Net(_) => "relnet",
            AnalysisObject::Modules(_) => "modules",
            AnalysisObject::Scores(_) => "netscores",
        }
    }
}

// ---- per-type JSON-safe metadata mirrors ----

#[derive(Serialize, Deserialize)]
struct RawMeta {
    gene_map: LabelTable,
    samples: SampleSheet,
    gene_groups: Vec<GeneGroup>,
    gene_networks: Vec<GeneNetwork>,
    grid: GridGeometry,
    dataset_id: String,
    notes: String,
}

#[derive(Serialize, Deserialize)]
struct NormMeta {
    gene_map: LabelTable,
    samples: SampleSheet,
    gene_groups: Vec<GeneGroup>,
    gene_networks: Vec<GeneNetwork>,
    grid: Option<GridGeometry>,
    primary_gene_label: Option<String>,
    dataset_id: String,
    notes: String,
    log: Vec<LogRecord>,
    has_sw: bool,
}

#[derive(Serialize, Deserialize)]
struct DeMeta {
    gene_ids: Vec<String>,
    gene_labels: LabelTable,
    family_names: Vec<String>,
    level_names: Vec<String>,
    test_method: String,
    sample_label_id: String,
    adjust_method: AdjustMethod,
    sample_names: Vec<String>,
    sample_level: Vec<String>,
    skipped: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct RelNetMeta {
    gene_ids: Vec<String>,
    mode: String, // "single" or "difference"
    condition: Option<String>,
    edges: Vec<(usize, usize, f64)>,
    cut_pval: f64,
    cor_kind: crate::netmod::CorKind,
    sample_label_id: String,
    condition_names: Vec<String>,
    condition_samples: Vec<Vec<String>>,
    notes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ModulesMeta {
    group_names: Vec<String>,
    column_names: Vec<String>,
    states: Vec<Vec<ModState>>,
    mode: ModuleMode,
    cut_exp: f64,
    cut_phiper: f64,
    adjust: AdjustMethod,
    sample_label_id: String,
}

#[derive(Serialize, Deserialize)]
struct ScoresMeta {
    network_names: Vec<String>,
    condition_names: Vec<String>,
    edge_counts: Vec<Vec<usize>>,
    sample_label_id: String,
    notes: Vec<String>,
}

fn family_to_matrix(f: &StatFamily) -> Matrix {
    let n = f.effect.len();
    let mut m = Matrix::filled(n, 4, 0.0);
    for i in 0..n {
        m.set(i, 0, f.effect[i]);
        m.set(i, 1, f.statistic[i]);
        m.set(i, 2, f.raw_p[i]);
        m.set(i, 3, f.adj_p[i]);
    }
    m
}

fn matrix_to_family(name: &str, m: &Matrix) -> StatFamily {
    let n = m.rows();
    let mut f = StatFamily {
        name: name.to_string(),
        effect: Vec::with_capacity(n),
        statistic: Vec::with_capacity(n),
        raw_p: Vec::with_capacity(n),
        adj_p: Vec::with_capacity(n),
    };
    for i in 0..n {
        f.effect.push(m.at(i, 0));
        f.statistic.push(m.at(i, 1));
        f.raw_p.push(m.at(i, 2));
        f.adj_p.push(m.at(i, 3));
    }
    f
}

fn object_parts(obj: &AnalysisObject) -> Result<(Value, Vec<(String, Matrix)>)> {
    match obj {
        AnalysisObject::Raw(ds) => {
            let meta = RawMeta {
                gene_map: ds.gene_map.clone(),
                samples: ds.samples.clone(),
                gene_groups: ds.gene_groups.clone(),
                gene_networks: ds.gene_networks.clone(),
                grid: ds.grid,
                dataset_id: ds.dataset_id.clone(),
                notes: ds.notes.clone(),
            };
            Ok((
                serde_json::to_value(&meta)?,
                vec![
                    ("ch1_fg".into(), ds.ch1_fg.clone()),
                    ("ch1_bg".into(), ds.ch1_bg.clone()),
                    ("ch2_fg".into(), ds.ch2_fg.clone()),
                    ("ch2_bg".into(), ds.ch2_bg.clone()),
                    ("flags".into(), int_grid_to_matrix(&ds.flags)),
                    ("use_spot".into(), bool_grid_to_matrix(&ds.use_spot)),
                    ("bad_spot".into(), bools_to_matrix(&ds.bad_spot)),
                ],
            ))
        }
        AnalysisObject::Norm(ds) => {
            let meta = NormMeta {
                gene_map: ds.gene_map.clone(),
                samples: ds.samples.clone(),
                gene_groups: ds.gene_groups.clone(),
                gene_networks: ds.gene_networks.clone(),
                grid: ds.grid,
                primary_gene_label: ds.primary_gene_label.clone(),
                dataset_id: ds.dataset_id.clone(),
                notes: ds.notes.clone(),
                log: ds.log.clone(),
                has_sw: ds.sw.is_some(),
            };
            let mut mats = vec![
                ("w".to_string(), ds.w.clone()),
                ("a".to_string(), ds.a.clone()),
                ("use_spot".to_string(), bool_grid_to_matrix(&ds.use_spot)),
                ("bad_spot".to_string(), bools_to_matrix(&ds.bad_spot)),
            ];
            if let (Some(sw), Some(lo), Some(hi)) = (&ds.sw, &ds.w_lo, &ds.w_hi) {
                mats.push(("sw".to_string(), sw.clone()));
                mats.push(("w_lo".to_string(), lo.clone()));
                mats.push(("w_hi".to_string(), hi.clone()));
            }
            Ok((serde_json::to_value(&meta)?, mats))
        }
        AnalysisObject::De(res) => {
            let meta = DeMeta {
                gene_ids: res.gene_ids.clone(),
                gene_labels: res.gene_labels.clone(),
                family_names: res.families.iter().map(|f| f.name.clone()).collect(),
                level_names: res.level_names.clone(),
                test_method: res.test_method.clone(),
                sample_label_id: res.sample_label_id.clone(),
                adjust_method: res.adjust_method,
                sample_names: res.sample_names.clone(),
                sample_level: res.sample_level.clone(),
                skipped: res.skipped.clone(),
            };
            let mut mats = vec![
                ("group_means".to_string(), res.group_means.clone()),
                ("w".to_string(), res.w.clone()),
            ];
            for (i, fam) in res.families.iter().enumerate() {
                mats.push((format!("family{i}"), family_to_matrix(fam)));
            }
            Ok((serde_json::to_value(&meta)?, mats))
        }
        AnalysisObject::Class(res) => Ok((serde_json::to_value(res)?, Vec::new())),
        AnalysisObject::Net(net) => {
            let (mode, condition, mats): (&str, Option<String>, Vec<(String, Matrix)>) =
                match &net.mode {
                    RelNetMode::Single { condition, cor, p } => (
                        "single",
                        Some(condition.clone()),
                        vec![("cor".into(), cor.clone()), ("p".into(), p.clone())],
                    ),
                    RelNetMode::Difference { r_a, r_b, delta_z, p } => (
                        "difference",
                        None,
                        vec![
                            ("r_a".into(), r_a.clone()),
                            ("r_b".into(), r_b.clone()),
                            ("delta_z".into(), delta_z.clone()),
                            ("p".into(), p.clone()),
                        ],
                    ),
                };
            let meta = RelNetMeta {
                gene_ids: net.gene_ids.clone(),
                mode: mode.to_string(),
                condition,
                edges: net.edges.clone(),
                cut_pval: net.cut_pval,
                cor_kind: net.cor_kind,
                sample_label_id: net.sample_label_id.clone(),
                condition_names: net.conditions.iter().map(|c| c.name.clone()).collect(),
                condition_samples: net.conditions.iter().map(|c| c.sample_names.clone()).collect(),
                notes: net.notes.clone(),
            };
            let mut all = mats;
            for (i, cond) in net.conditions.iter().enumerate() {
                all.push((format!("cond{i}_w"), cond.w.clone()));
            }
            Ok((serde_json::to_value(&meta)?, all))
        }
        AnalysisObject::Modules(res) => {
            let meta = ModulesMeta {
                group_names: res.group_names.clone(),
                column_names: res.column_names.clone(),
                states: res.states.clone(),
                mode: res.mode,
                cut_exp: res.cut_exp,
                cut_phiper: res.cut_phiper,
                adjust: res.adjust,
                sample_label_id: res.sample_label_id.clone(),
            };
            Ok((
                serde_json::to_value(&meta)?,
                vec![
                    ("p_values".into(), res.p_values.clone()),
                    ("scores".into(), res.scores.clone()),
                ],
            ))
        }
        AnalysisObject::Scores(res) => {
            let meta = ScoresMeta {
                network_names: res.network_names.clone(),
                condition_names: res.condition_names.clone(),
                edge_counts: res.edge_counts.clone(),
                sample_label_id: res.sample_label_id.clone(),
                notes: res.notes.clone(),
            };
            Ok((
                serde_json::to_value(&meta)?,
                vec![("s".into(), res.s.clone()), ("p_values".into(), res.p_values.clone())],
            ))
        }
    }
}

fn object_from_parts(
    type_name: &str,
    meta: Value,
    mats: &mut BTreeMap<String, Matrix>,
) -> Result<AnalysisObject> {
    let mut take = |name: &str| -> Result<Matrix> {
        mats.remove(name)
            .ok_or_else(|| Error::Container(format!("missing matrix section `{name}`")))
    };
    match type_name {
        "raw" => {
            let meta: RawMeta = serde_json::from_value(meta)?;
            Ok(AnalysisObject::Raw(RawDataset {
                ch1_fg: take("ch1_fg")?,
                ch1_bg: take("ch1_bg")?,
                ch2_fg: take("ch2_fg")?,
                ch2_bg: take("ch2_bg")?,
                flags: matrix_to_int_grid(&take("flags")?),
                use_spot: matrix_to_bool_grid(&take("use_spot")?),
                bad_spot: matrix_to_bools(&take("bad_spot")?),
                gene_map: meta.gene_map,
                samples: meta.samples,
                gene_groups: meta.gene_groups,
                gene_networks: meta.gene_networks,
                grid: meta.grid,
                dataset_id: meta.dataset_id,
                notes: meta.notes,
            }))
        }
        "normalized" => {
            let meta: NormMeta = serde_json::from_value(meta)?;
            let (sw, w_lo, w_hi) = if meta.has_sw {
                (Some(take("sw")?), Some(take("w_lo")?), Some(take("w_hi")?))
            } else {
                (None, None, None)
            };
            Ok(AnalysisObject::Norm(NormalizedDataset {
                w: take("w")?,
                a: take("a")?,
                sw,
                w_lo,
                w_hi,
                use_spot: matrix_to_bool_grid(&take("use_spot")?),
                bad_spot: matrix_to_bools(&take("bad_spot")?),
                gene_map: meta.gene_map,
                samples: meta.samples,
                gene_groups: meta.gene_groups,
                gene_networks: meta.gene_networks,
                grid: meta.grid,
                primary_gene_label: meta.primary_gene_label,
                dataset_id: meta.dataset_id,
                notes: meta.notes,
                log: meta.log,
            }))
        }
        "de" => {
            let meta: DeMeta = serde_json::from_value(meta)?;
            let mut families = Vec::with_capacity(meta.family_names.len());
            for (i, name) in meta.family_names.iter().enumerate() {
                families.push(matrix_to_family(name, &take(&format!("family{i}"))?));
            }
            let fold_change =
                families.first().map(|f| f.effect.clone()).unwrap_or_default();
            Ok(AnalysisObject::De(DeResult {
                gene_ids: meta.gene_ids,
                gene_labels: meta.gene_labels,
                families,
                group_means: take("group_means")?,
                level_names: meta.level_names,
                fold_change,
                test_method: meta.test_method,
                sample_label_id: meta.sample_label_id,
                adjust_method: meta.adjust_method,
                w: take("w")?,
                sample_names: meta.sample_names,
                sample_level: meta.sample_level,
                skipped: meta.skipped,
            }))
        }
        "classifiers" => Ok(AnalysisObject::Class(serde_json::from_value(meta)?)),
        "relnet" => {
            let meta: RelNetMeta = serde_json::from_value(meta)?;
            let mode = match meta.mode.as_str() {
                "single" => RelNetMode::Single {
                    condition: meta.condition.clone().unwrap_or_default(),
                    cor: take("cor")?,
                    p: take("p")?,
                },
                "difference" => RelNetMode::Difference {
                    r_a: take("r_a")?,
                    r_b: take("r_b")?,
                    delta_z: take("delta_z")?,
                    p: take("p")?,
                },
                other => {
                    return Err(Error::Container(format!("unknown relnet mode `{other}`")))
                }
            };
            let mut conditions = Vec::new();
            for (i, (name, sample_names)) in meta
                .condition_names
                .iter()
                .zip(&meta.condition_samples)
                .enumerate()
            {
                conditions.push(ConditionSlice {
                    name: name.clone(),
                    sample_names: sample_names.clone(),
                    w: take(&format!("cond{i}_w"))?,
                });
            }
            Ok(AnalysisObject::Net(RelNet {
                gene_ids: meta.gene_ids,
                mode,
                edges: meta.edges,
                cut_pval: meta.cut_pval,
                cor_kind: meta.cor_kind,
                sample_label_id: meta.sample_label_id,
                conditions,
                notes: meta.notes,
            }))
        }
        "modules" => {
            let meta: ModulesMeta = serde_json::from_value(meta)?;
            Ok(AnalysisObject::Modules(ModuleResult {
                group_names: meta.group_names,
                column_names: meta.column_names,
                states: meta.states,
                p_values: take("p_values")?,
                scores: take("scores")?,
                mode: meta.mode,
                cut_exp: meta.cut_exp,
                cut_phiper: meta.cut_phiper,
                adjust: meta.adjust,
                sample_label_id: meta.sample_label_id,
            }))
        }
        "netscores" => {
            let meta: ScoresMeta = serde_json::from_value(meta)?;
            Ok(AnalysisObject::Scores(NetScore {
                network_names: meta.network_names,
                condition_names: meta.condition_names,
                s: take("s")?,
                edge_counts: meta.edge_counts,
                p_values: take("p_values")?,
                sample_label_id: meta.sample_label_id,
                notes: meta.notes,
            }))
        }
        other => Err(Error::Container(format!("unknown object type `{other}`"))),
    }
}

fn assemble(
    obj: &AnalysisObject,
    prov: Option<&ProvenanceGraph>,
) -> Result<Vec<(String, Payload)>> {
    let (object_meta, mats) = object_parts(obj)?;
    let mut meta = serde_json::Map::new();
    meta.insert("object_type".to_string(), Value::String(obj.type_name().to_string()));
    meta.insert("object".to_string(), object_meta);
    if let Some(graph) = prov {
        let mut container = serde_json::Map::new();
        container.insert("tool_version".to_string(), Value::String(env!("CARGO_PKG_VERSION").into()));
        container.insert("provenance".to_string(), serde_json::to_value(graph)?);
        meta.insert("container".to_string(), Value::Object(container));
    }
    let mut sections =
        vec![("meta".to_string(), Payload::Json(canonical_json(&Value::Object(meta))?))];
    for (name, m) in mats {
        sections.push((name, Payload::Matrix(m)));
    }
    Ok(sections)
}

/// SHA-256 of the canonical object serialization (no provenance, no tool
/// version), as lowercase hex.
pub fn object_hash(obj: &AnalysisObject) -> Result<String> {
    let bytes = encode(&assemble(obj, None)?);
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn save_container(path: &Path, obj: &AnalysisObject, prov: &ProvenanceGraph) -> Result<()> {
    let bytes = encode(&assemble(obj, Some(prov))?);
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_container(path: &Path) -> Result<(AnalysisObject, ProvenanceGraph)> {
    let bytes = std::fs::read(path)
        .map_err(|_| Error::MissingFile { path: path.display().to_string() })?;
    let sections = decode(&bytes)?;
    let mut meta_value: Option<Value> = None;
    let mut mats = BTreeMap::new();
    for (name, payload) in sections {
        match payload {
            Payload::Json(bytes) if name == "meta" => {
                meta_value = Some(serde_json::from_slice(&bytes)?);
            }
            Payload::Json(_) => {
                return Err(Error::Container(format!("unexpected json section `{name}`")))
            }
            Payload::Matrix(m) => {
                mats.insert(name, m);
            }
        }
    }
    let meta = meta_value.ok_or_else(|| Error::Container("missing meta section".into()))?;
    let type_name = meta
        .get("object_type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Container("missing object_type".into()))?
        .to_string();
    let object_meta = meta
        .get("object")
        .cloned()
        .ok_or_else(|| Error::Container("missing object metadata".into()))?;
    let prov = match meta.get("container").and_then(|c| c.get("provenance")) {
        Some(v) => serde_json::from_value(v.clone())?,
        None => ProvenanceGraph::default(),
    };
    let obj = object_from_parts(&type_name, object_meta, &mut mats)?;
    Ok((obj, prov))
}
