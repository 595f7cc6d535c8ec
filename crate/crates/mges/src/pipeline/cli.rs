//! Batch CLI. Every subcommand is a [`Step`]: the same structure is
//! parsed from the command line, recorded as canonical parameters in the
//! provenance graph, re-materialized during replay, and printed back as a
//! shell line when the graph is exported as a script.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use super::container::{load_container, object_hash, save_container, AnalysisObject};
use super::provenance::ProvenanceGraph;
use crate::classify::{
    class_table, exhaustive_search, search_and_choose, ClassMethod, GenePool, RankBy,
};
use crate::cluster::{
    cluster_de, ClusterAlg, ClusterOn, ClusterOutcome, DeSelection, DistanceKind, Linkage,
    SomParams, SomTopology,
};
use crate::diffexpr::{
    de_genes_two_groups, de_table, design_anova, fit_anova, volcano_data, DeOptions, DeTest,
};
use crate::ingest::{load_dataset, parse_config_file, read_group_file, read_network_file};
use crate::ingest::{RawDataset, SelectParams};
use crate::netmod::{
    active_mod, active_net, gene_pair_data, rel_network_b, rel_network_m, CorKind, ModuleMode,
};
use crate::normalize::{
    compute_wa, normalize_loess, normalize_repeated_loess, normalize_scale_mad, Background,
    LoessScope, NormalizedDataset, ScaleScope, SummaryFn,
};
use crate::report::{fmt_f64, render_csv, TableFormat};
use crate::stat::AdjustMethod;
use crate::svg;
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

// ---- parameter map helpers ----

type Params = BTreeMap<String, String>;

fn p_insert(params: &mut Params, key: &str, value: impl ToString) {
    params.insert(key.to_string(), value.to_string());
}

fn p_opt(params: &mut Params, key: &str, value: &Option<String>) {
    if let Some(v) = value {
        params.insert(key.to_string(), v.clone());
    }
}

fn p_list(params: &mut Params, key: &str, values: &[String]) {
    if !values.is_empty() {
        params.insert(key.to_string(), values.join(","));
    }
}

fn g_str(params: &Params, key: &str) -> Result<String> {
    params
        .get(key)
        .cloned()
        .ok_or_else(|| Error::Provenance(format!("missing parameter `{key}`")))
}

fn g_opt(params: &Params, key: &str) -> Option<String> {
    params.get(key).cloned()
}

fn g_list(params: &Params, key: &str) -> Vec<String> {
    params
        .get(key)
        .map(|v| v.split(',').map(|s| s.to_string()).collect())
        .unwrap_or_default()
}

fn g_f64(params: &Params, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Provenance(format!("parameter `{key}` = `{v}` is not a number"))),
    }
}

fn g_usize(params: &Params, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Provenance(format!("parameter `{key}` = `{v}` is not an integer"))),
    }
}

fn g_u64(params: &Params, key: &str, default: u64) -> Result<u64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Provenance(format!("parameter `{key}` = `{v}` is not an integer"))),
    }
}

fn g_bool(params: &Params, key: &str) -> bool {
    params.get(key).map(|v| v == "true").unwrap_or(false)
}

fn shell_quote(s: &str) -> String {
    if s.is_empty() || s.chars().any(|c| !(c.is_ascii_alphanumeric() || "-_./=:@%+".contains(c))) {
        format!("'{}'", s.replace('\'', "'\\''"))
    } else {
        s.to_string()
    }
}

// ---- normalization sub-parameters (the `--loess k=v` token list) ----

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeSpec {
    pub bkg: Background,
    pub loess: bool,
    pub span: f64,
    pub scope: LoessScope,
    pub iterations: usize,
    pub repeated: bool,
    pub repeats: usize,
    pub fraction: f64,
    pub alpha: f64,
    pub scale: Option<ScaleScope>,
}

impl Default for NormalizeSpec {
    fn default() -> Self {
        NormalizeSpec {
            bkg: Background::Subtract,
            loess: true,
            span: 0.4,
            scope: LoessScope::Global,
            iterations: 2,
            repeated: false,
            repeats: 30,
            fraction: 0.7,
            alpha: 0.05,
            scale: None,
        }
    }
}

fn parse_loess_tokens(tokens: &[String], spec: &mut NormalizeSpec) -> Result<()> {
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--loess expects key=value, got `{token}`")))?;
        match key {
            "span" => {
                spec.span = value
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad span `{value}`")))?
            }
            "scope" => spec.scope = LoessScope::parse(value)?,
            "iters" | "iterations" => {
                spec.iterations = value
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad iterations `{value}`")))?
            }
            "repeated" => spec.repeated = value == "true",
            "repeats" => {
                spec.repeats = value
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad repeats `{value}`")))?
            }
            "fraction" => {
                spec.fraction = value
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad fraction `{value}`")))?
            }
            "alpha" => {
                spec.alpha = value
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad alpha `{value}`")))?
            }
            other => return Err(Error::Usage(format!("unknown --loess key `{other}`"))),
        }
    }
    Ok(())
}

// ---- the step abstraction ----

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Load {
        config: String,
        out: String,
        groups: Vec<String>,
        networks: Vec<String>,
        group_label: Option<String>,
        network_label: Option<String>,
    },
    Qc {
        input: String,
        out: Option<String>,
        sig_noise: f64,
        rm_flags: Vec<String>,
        remove: Vec<String>,
        label_id: Option<String>,
        mark_bad: Vec<String>,
        bkg: Background,
        chip: usize,
        wa_svg: Option<String>,
        spatial_svg: Option<String>,
        boxplot_svg: Option<String>,
    },
    Normalize {
        input: String,
        out: String,
        spec: NormalizeSpec,
        seed: u64,
    },
    Summarize {
        input: String,
        out: String,
        gene_label: String,
        sample_label: String,
        spots: SummaryFn,
        samples: SummaryFn,
        keep_empty: bool,
        rm_bad: bool,
    },
    De {
        input: String,
        label: String,
        test: String,
        pooled: bool,
        boot_b: usize,
        adjust: String,
        out_csv: Option<String>,
        out_html: Option<String>,
        bin: Option<String>,
        volcano_svg: Option<String>,
        top_n: Option<usize>,
        seed: u64,
    },
    Anova {
        input: String,
        factors: Vec<String>,
        f_test: bool,
        adjust: String,
        out_csv: Option<String>,
        out_html: Option<String>,
        bin: Option<String>,
    },
    Cluster {
        input: String,
        alg: String,
        on: String,
        n_de: Option<usize>,
        p_cut: Option<f64>,
        family: usize,
        linkage: String,
        distance: Option<String>,
        k: usize,
        restarts: usize,
        xdim: usize,
        ydim: usize,
        topol: String,
        epochs: usize,
        svg: Option<String>,
        out_csv: Option<String>,
        seed: u64,
    },
    Classify {
        input: String,
        label: String,
        method: String,
        k: usize,
        n_genes: usize,
        pool: String,
        search: String,
        pool_size: usize,
        rank_by: String,
        top: usize,
        out_csv: Option<String>,
        out_html: Option<String>,
        bin: Option<String>,
    },
    RelNet {
        input: String,
        label: String,
        condition: String,
        group: String,
        cor: String,
        cut: f64,
        svg: Option<String>,
        out_csv: Option<String>,
        bin: Option<String>,
        pair_svg: Option<String>,
        pair: Vec<String>,
        seed: u64,
    },
    RelNetDiff {
        input: String,
        label: String,
        condition_a: String,
        condition_b: String,
        group: String,
        cut: f64,
        svg: Option<String>,
        out_csv: Option<String>,
        bin: Option<String>,
        pair_svg: Option<String>,
        pair: Vec<String>,
    },
    Modules {
        input: String,
        label: String,
        cut_exp: f64,
        cut_p: f64,
        mode: String,
        adjust: String,
        svg: Option<String>,
        out_csv: Option<String>,
        bin: Option<String>,
    },
    NetScore {
        input: String,
        label: String,
        out_csv: Option<String>,
        bin: Option<String>,
    },
}

impl Step {
    pub fn op_name(&self) -> &'static str {
        match self {
            Step::Load { .. } => "load",
            Step::Qc { .. } => "qc",
            Step::Normalize { .. } => "normalize",
            Step::Summarize { .. } => "summarize",
            Step::De { .. } => "de",
            Step::Anova { .. } => "anova",
            Step::Cluster { .. } => "cluster",
            Step::Classify { .. } => "classify",
            Step::RelNet { .. } => "relnet",
            Step::RelNetDiff { .. } => "relnet-diff",
            Step::Modules { .. } => "modules",
            Step::NetScore { .. } => "netscore",
        }
    }

    /// Canonical parameter map recorded in the provenance graph.
    pub fn to_params(&self) -> Params {
        let mut p = Params::new();
        match self {
            Step::Load { config, out, groups, networks, group_label, network_label } => {
                p_insert(&mut p, "config", config);
                p_insert(&mut p, "out", out);
                p_list(&mut p, "groups", groups);
                p_list(&mut p, "networks", networks);
                p_opt(&mut p, "groupLabel", group_label);
                p_opt(&mut p, "networkLabel", network_label);
            }
            Step::Qc {
                input,
                out,
                sig_noise,
                rm_flags,
                remove,
                label_id,
                mark_bad,
                bkg,
                chip,
                wa_svg,
                spatial_svg,
                boxplot_svg,
            } => {
                p_insert(&mut p, "in", input);
                p_opt(&mut p, "out", out);
                p_insert(&mut p, "sigNoise", fmt_f64(*sig_noise));
                p_list(&mut p, "rmFlags", rm_flags);
                p_list(&mut p, "remove", remove);
                p_opt(&mut p, "labelId", label_id);
                p_list(&mut p, "markBad", mark_bad);
                p_insert(&mut p, "bkg", bkg.name());
                p_insert(&mut p, "chip", chip);
                p_opt(&mut p, "waSvg", wa_svg);
                p_opt(&mut p, "spatialSvg", spatial_svg);
                p_opt(&mut p, "boxplotSvg", boxplot_svg);
            }
            Step::Normalize { input, out, spec, seed } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "out", out);
                p_insert(&mut p, "bkg", spec.bkg.name());
                p_insert(&mut p, "loess", spec.loess);
                p_insert(&mut p, "span", fmt_f64(spec.span));
                p_insert(&mut p, "scope", spec.scope.name());
                p_insert(&mut p, "iterations", spec.iterations);
                p_insert(&mut p, "repeated", spec.repeated);
                if spec.repeated {
                    p_insert(&mut p, "repeats", spec.repeats);
                    p_insert(&mut p, "fraction", fmt_f64(spec.fraction));
                    p_insert(&mut p, "alpha", fmt_f64(spec.alpha));
                }
                if let Some(scale) = spec.scale {
                    p_insert(&mut p, "scale", scale.name());
                }
                p_insert(&mut p, "seed", seed);
            }
            Step::Summarize {
                input,
                out,
                gene_label,
                sample_label,
                spots,
                samples,
                keep_empty,
                rm_bad,
            } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "out", out);
                p_insert(&mut p, "geneLabel", gene_label);
                p_insert(&mut p, "sampleLabel", sample_label);
                p_insert(&mut p, "spots", spots.name());
                p_insert(&mut p, "samples", samples.name());
                p_insert(&mut p, "keepEmpty", keep_empty);
                p_insert(&mut p, "rmBad", rm_bad);
            }
            Step::De {
                input,
                label,
                test,
                pooled,
                boot_b,
                adjust,
                out_csv,
                out_html,
                bin,
                volcano_svg,
                top_n,
                seed,
            } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "label", label);
                p_insert(&mut p, "test", test);
                p_insert(&mut p, "pooled", pooled);
                p_insert(&mut p, "bootB", boot_b);
                p_insert(&mut p, "adjust", adjust);
                p_opt(&mut p, "out", out_csv);
                p_opt(&mut p, "html", out_html);
                p_opt(&mut p, "bin", bin);
                p_opt(&mut p, "volcanoSvg", volcano_svg);
                if let Some(n) = top_n {
                    p_insert(&mut p, "topN", n);
                }
                p_insert(&mut p, "seed", seed);
            }
            Step::Anova { input, factors, f_test, adjust, out_csv, out_html, bin } => {
                p_insert(&mut p, "in", input);
                p_list(&mut p, "factors", factors);
                p_insert(&mut p, "fTest", f_test);
                p_insert(&mut p, "adjust", adjust);
                p_opt(&mut p, "out", out_csv);
                p_opt(&mut p, "html", out_html);
                p_opt(&mut p, "bin", bin);
            }
            Step::Cluster {
                input,
                alg,
                on,
                n_de,
                p_cut,
                family,
                linkage,
                distance,
                k,
                restarts,
                xdim,
                ydim,
                topol,
                epochs,
                svg,
                out_csv,
                seed,
            } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "alg", alg);
                p_insert(&mut p, "on", on);
                if let Some(n) = n_de {
                    p_insert(&mut p, "nDe", n);
                }
                if let Some(c) = p_cut {
                    p_insert(&mut p, "pCut", fmt_f64(*c));
                }
                p_insert(&mut p, "family", family);
                p_insert(&mut p, "linkage", linkage);
                p_opt(&mut p, "distance", distance);
                p_insert(&mut p, "k", k);
                p_insert(&mut p, "restarts", restarts);
                p_insert(&mut p, "xdim", xdim);
                p_insert(&mut p, "ydim", ydim);
                p_insert(&mut p, "topol", topol);
                p_insert(&mut p, "epochs", epochs);
                p_opt(&mut p, "svg", svg);
                p_opt(&mut p, "out", out_csv);
                p_insert(&mut p, "seed", seed);
            }
            Step::Classify {
                input,
                label,
                method,
                k,
                n_genes,
                pool,
                search,
                pool_size,
                rank_by,
                top,
                out_csv,
                out_html,
                bin,
            } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "label", label);
                p_insert(&mut p, "method", method);
                p_insert(&mut p, "k", k);
                p_insert(&mut p, "nGenes", n_genes);
                p_insert(&mut p, "pool", pool);
                p_insert(&mut p, "search", search);
                p_insert(&mut p, "poolSize", pool_size);
                p_insert(&mut p, "rankBy", rank_by);
                p_insert(&mut p, "top", top);
                p_opt(&mut p, "out", out_csv);
                p_opt(&mut p, "html", out_html);
                p_opt(&mut p, "bin", bin);
            }
            Step::RelNet {
                input,
                label,
                condition,
                group,
                cor,
                cut,
                svg,
                out_csv,
                bin,
                pair_svg,
                pair,
                seed,
            } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "label", label);
                p_insert(&mut p, "condition", condition);
                p_insert(&mut p, "group", group);
                p_insert(&mut p, "cor", cor);
                p_insert(&mut p, "cut", fmt_f64(*cut));
                p_opt(&mut p, "svg", svg);
                p_opt(&mut p, "out", out_csv);
                p_opt(&mut p, "bin", bin);
                p_opt(&mut p, "pairSvg", pair_svg);
                p_list(&mut p, "pair", pair);
                p_insert(&mut p, "seed", seed);
            }
            Step::RelNetDiff {
                input,
                label,
                condition_a,
                condition_b,
                group,
                cut,
                svg,
                out_csv,
                bin,
                pair_svg,
                pair,
            } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "label", label);
                p_insert(&mut p, "a", condition_a);
                p_insert(&mut p, "b", condition_b);
                p_insert(&mut p, "group", group);
                p_insert(&mut p, "cut", fmt_f64(*cut));
                p_opt(&mut p, "svg", svg);
                p_opt(&mut p, "out", out_csv);
                p_opt(&mut p, "bin", bin);
                p_opt(&mut p, "pairSvg", pair_svg);
                p_list(&mut p, "pair", pair);
            }
            Step::Modules { input, label, cut_exp, cut_p, mode, adjust, svg, out_csv, bin } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "label", label);
                p_insert(&mut p, "cutExp", fmt_f64(*cut_exp));
                p_insert(&mut p, "cutP", fmt_f64(*cut_p));
                p_insert(&mut p, "mode", mode);
                p_insert(&mut p, "adjust", adjust);
                p_opt(&mut p, "svg", svg);
                p_opt(&mut p, "out", out_csv);
                p_opt(&mut p, "bin", bin);
            }
            Step::NetScore { input, label, out_csv, bin } => {
                p_insert(&mut p, "in", input);
                p_insert(&mut p, "label", label);
                p_opt(&mut p, "out", out_csv);
                p_opt(&mut p, "bin", bin);
            }
        }
        p
    }

    /// Rebuild a step from recorded parameters (the replay path).
    pub fn from_params(op: &str, p: &Params) -> Result<Step> {
        let step = match op {
            "load" => Step::Load {
                config: g_str(p, "config")?,
                out: g_str(p, "out")?,
                groups: g_list(p, "groups"),
                networks: g_list(p, "networks"),
                group_label: g_opt(p, "groupLabel"),
                network_label: g_opt(p, "networkLabel"),
            },
            "qc" => Step::Qc {
                input: g_str(p, "in")?,
                out: g_opt(p, "out"),
                sig_noise: g_f64(p, "sigNoise", 0.0)?,
                rm_flags: g_list(p, "rmFlags"),
                remove: g_list(p, "remove"),
                label_id: g_opt(p, "labelId"),
                mark_bad: g_list(p, "markBad"),
                bkg: Background::parse(&g_str(p, "bkg")?)?,
                chip: g_usize(p, "chip", 1)?,
                wa_svg: g_opt(p, "waSvg"),
                spatial_svg: g_opt(p, "spatialSvg"),
                boxplot_svg: g_opt(p, "boxplotSvg"),
            },
            "normalize" => Step::Normalize {
                input: g_str(p, "in")?,
                out: g_str(p, "out")?,
                spec: NormalizeSpec {
                    bkg: Background::parse(&g_str(p, "bkg")?)?,
                    loess: g_bool(p, "loess"),
                    span: g_f64(p, "span", 0.4)?,
                    scope: LoessScope::parse(&g_str(p, "scope")?)?,
                    iterations: g_usize(p, "iterations", 2)?,
                    repeated: g_bool(p, "repeated"),
                    repeats: g_usize(p, "repeats", 30)?,
                    fraction: g_f64(p, "fraction", 0.7)?,
                    alpha: g_f64(p, "alpha", 0.05)?,
                    scale: match g_opt(p, "scale") {
                        Some(s) => Some(ScaleScope::parse(&s)?),
                        None => None,
                    },
                },
                seed: g_u64(p, "seed", 0)?,
            },
            "summarize" => Step::Summarize {
                input: g_str(p, "in")?,
                out: g_str(p, "out")?,
                gene_label: g_str(p, "geneLabel")?,
                sample_label: g_str(p, "sampleLabel")?,
                spots: SummaryFn::parse(&g_str(p, "spots")?)?,
                samples: SummaryFn::parse(&g_str(p, "samples")?)?,
                keep_empty: g_bool(p, "keepEmpty"),
                rm_bad: g_bool(p, "rmBad"),
            },
            "de" => Step::De {
                input: g_str(p, "in")?,
                label: g_str(p, "label")?,
                test: g_str(p, "test")?,
                pooled: g_bool(p, "pooled"),
                boot_b: g_usize(p, "bootB", 1000)?,
                adjust: g_str(p, "adjust")?,
                out_csv: g_opt(p, "out"),
                out_html: g_opt(p, "html"),
                bin: g_opt(p, "bin"),
                volcano_svg: g_opt(p, "volcanoSvg"),
                top_n: match g_opt(p, "topN") {
                    Some(v) => Some(v.parse().map_err(|_| {
                        Error::Provenance(format!("bad topN `{v}`"))
                    })?),
                    None => None,
                },
                seed: g_u64(p, "seed", 0)?,
            },
            "anova" => Step::Anova {
                input: g_str(p, "in")?,
                factors: g_list(p, "factors"),
                f_test: g_bool(p, "fTest"),
                adjust: g_str(p, "adjust")?,
                out_csv: g_opt(p, "out"),
                out_html: g_opt(p, "html"),
                bin: g_opt(p, "bin"),
            },
            "cluster" => Step::Cluster {
                input: g_str(p, "in")?,
                alg: g_str(p, "alg")?,
                on: g_str(p, "on")?,
                n_de: match g_opt(p, "nDe") {
                    Some(v) => {
                        Some(v.parse().map_err(|_| Error::Provenance(format!("bad nDe `{v}`")))?)
                    }
                    None => None,
                },
                p_cut: match g_opt(p, "pCut") {
                    Some(v) => {
                        Some(v.parse().map_err(|_| Error::Provenance(format!("bad pCut `{v}`")))?)
                    }
                    None => None,
                },
                family: g_usize(p, "family", 0)?,
                linkage: g_str(p, "linkage")?,
                distance: g_opt(p, "distance"),
                k: g_usize(p, "k", 2)?,
                restarts: g_usize(p, "restarts", 5)?,
                xdim: g_usize(p, "xdim", 2)?,
                ydim: g_usize(p, "ydim", 1)?,
                topol: g_str(p, "topol")?,
                epochs: g_usize(p, "epochs", 100)?,
                svg: g_opt(p, "svg"),
                out_csv: g_opt(p, "out"),
                seed: g_u64(p, "seed", 0)?,
            },
            "classify" => Step::Classify {
                input: g_str(p, "in")?,
                label: g_str(p, "label")?,
                method: g_str(p, "method")?,
                k: g_usize(p, "k", 3)?,
                n_genes: g_usize(p, "nGenes", 3)?,
                pool: g_str(p, "pool")?,
                search: g_str(p, "search")?,
                pool_size: g_usize(p, "poolSize", 30)?,
                rank_by: g_str(p, "rankBy")?,
                top: g_usize(p, "top", 50)?,
                out_csv: g_opt(p, "out"),
                out_html: g_opt(p, "html"),
                bin: g_opt(p, "bin"),
            },
            "relnet" => Step::RelNet {
                input: g_str(p, "in")?,
                label: g_str(p, "label")?,
                condition: g_str(p, "condition")?,
                group: g_str(p, "group")?,
                cor: g_str(p, "cor")?,
                cut: g_f64(p, "cut", 0.05)?,
                svg: g_opt(p, "svg"),
                out_csv: g_opt(p, "out"),
                bin: g_opt(p, "bin"),
                pair_svg: g_opt(p, "pairSvg"),
                pair: g_list(p, "pair"),
                seed: g_u64(p, "seed", 0)?,
            },
            "relnet-diff" => Step::RelNetDiff {
                input: g_str(p, "in")?,
                label: g_str(p, "label")?,
                condition_a: g_str(p, "a")?,
                condition_b: g_str(p, "b")?,
                group: g_str(p, "group")?,
                cut: g_f64(p, "cut", 0.05)?,
                svg: g_opt(p, "svg"),
                out_csv: g_opt(p, "out"),
                bin: g_opt(p, "bin"),
                pair_svg: g_opt(p, "pairSvg"),
                pair: g_list(p, "pair"),
            },
            "modules" => Step::Modules {
                input: g_str(p, "in")?,
                label: g_str(p, "label")?,
                cut_exp: g_f64(p, "cutExp", 1.0)?,
                cut_p: g_f64(p, "cutP", 0.05)?,
                mode: g_str(p, "mode")?,
                adjust: g_str(p, "adjust")?,
                svg: g_opt(p, "svg"),
                out_csv: g_opt(p, "out"),
                bin: g_opt(p, "bin"),
            },
            "netscore" => Step::NetScore {
                input: g_str(p, "in")?,
                label: g_str(p, "label")?,
                out_csv: g_opt(p, "out"),
                bin: g_opt(p, "bin"),
            },
            other => return Err(Error::Replay(format!("unknown operation `{other}`"))),
        };
        Ok(step)
    }

    /// Shell line that reproduces this step.
    pub fn command_line(&self) -> String {
        let p = self.to_params();
        let mut parts = vec!["mges".to_string(), self.op_name().to_string()];
        let flag_of = |key: &str| -> String {
            // camelCase parameter keys map to kebab-case flags
            let mut out = String::from("--");
            for c in key.chars() {
                if c.is_ascii_uppercase() {
                    out.push('-');
                    out.push(c.to_ascii_lowercase());
                } else {
                    out.push(c);
                }
            }
            out
        };
        for (key, value) in &p {
            parts.push(flag_of(key));
            parts.push(shell_quote(value));
        }
        parts.join(" ")
    }

    /// Container written by this step, if any.
    pub fn output_container(&self) -> Option<&str> {
        match self {
            Step::Load { out, .. } => Some(out),
            Step::Qc { out, .. } => out.as_deref(),
            Step::Normalize { out, .. } => Some(out),
            Step::Summarize { out, .. } => Some(out),
            Step::De { bin, .. } => bin.as_deref(),
            Step::Anova { bin, .. } => bin.as_deref(),
            Step::Cluster { .. } => None,
            Step::Classify { bin, .. } => bin.as_deref(),
            Step::RelNet { bin, .. } => bin.as_deref(),
            Step::RelNetDiff { bin, .. } => bin.as_deref(),
            Step::Modules { bin, .. } => bin.as_deref(),
            Step::NetScore { bin, .. } => bin.as_deref(),
        }
    }

    /// Rewrite file-path fields through `f(path, is_output)`.
    pub fn rewrite_paths(&mut self, f: &mut dyn FnMut(&str, bool) -> String) {
        let map_in = |f: &mut dyn FnMut(&str, bool) -> String, s: &mut String| {
            *s = f(s, false);
        };
        let map_out = |f: &mut dyn FnMut(&str, bool) -> String, s: &mut String| {
            *s = f(s, true);
        };
        let map_out_opt = |f: &mut dyn FnMut(&str, bool) -> String, s: &mut Option<String>| {
            if let Some(v) = s {
                *v = f(v, true);
            }
        };
        match self {
            Step::Load { config, out, groups, networks, .. } => {
                map_in(f, config);
                for g in groups.iter_mut().chain(networks.iter_mut()) {
                    // entries are `name=path` or bare paths
                    if let Some((name, path)) = g.split_once('=') {
                        *g = format!("{name}={}", f(path, false));
                    } else {
                        *g = f(g, false);
                    }
                }
                map_out(f, out);
            }
            Step::Qc { input, out, wa_svg, spatial_svg, boxplot_svg, .. } => {
                map_in(f, input);
                map_out_opt(f, out);
                map_out_opt(f, wa_svg);
                map_out_opt(f, spatial_svg);
                map_out_opt(f, boxplot_svg);
            }
            Step::Normalize { input, out, .. } | Step::Summarize { input, out, .. } => {
                map_in(f, input);
                map_out(f, out);
            }
            Step::De { input, out_csv, out_html, bin, volcano_svg, .. } => {
                map_in(f, input);
                map_out_opt(f, out_csv);
                map_out_opt(f, out_html);
                map_out_opt(f, bin);
                map_out_opt(f, volcano_svg);
            }
            Step::Anova { input, out_csv, out_html, bin, .. } => {
                map_in(f, input);
                map_out_opt(f, out_csv);
                map_out_opt(f, out_html);
                map_out_opt(f, bin);
            }
            Step::Cluster { input, svg, out_csv, .. } => {
                map_in(f, input);
                map_out_opt(f, svg);
                map_out_opt(f, out_csv);
            }
            Step::Classify { input, out_csv, out_html, bin, .. } => {
                map_in(f, input);
                map_out_opt(f, out_csv);
                map_out_opt(f, out_html);
                map_out_opt(f, bin);
            }
            Step::RelNet { input, svg, out_csv, bin, pair_svg, .. }
            | Step::RelNetDiff { input, svg, out_csv, bin, pair_svg, .. } => {
                map_in(f, input);
                map_out_opt(f, svg);
                map_out_opt(f, out_csv);
                map_out_opt(f, bin);
                map_out_opt(f, pair_svg);
            }
            Step::Modules { input, svg, out_csv, bin, .. } => {
                map_in(f, input);
                map_out_opt(f, svg);
                map_out_opt(f, out_csv);
                map_out_opt(f, bin);
            }
            Step::NetScore { input, out_csv, bin, .. } => {
                map_in(f, input);
                map_out_opt(f, out_csv);
                map_out_opt(f, bin);
            }
        }
    }
}

// ---- step execution ----

fn load_raw(path: &str) -> Result<(RawDataset, ProvenanceGraph)> {
    match load_container(Path::new(path))? {
        (AnalysisObject::Raw(ds), prov) => Ok((ds, prov)),
        (other, _) => Err(Error::Usage(format!(
            "`{path}` holds a {} object, expected raw data",
            other.type_name()
        ))),
    }
}

fn load_norm(path: &str) -> Result<(NormalizedDataset, ProvenanceGraph)> {
    match load_container(Path::new(path))? {
        (AnalysisObject::Norm(ds), prov) => Ok((ds, prov)),
        (other, _) => Err(Error::Usage(format!(
            "`{path}` holds a {} object, expected normalized data",
            other.type_name()
        ))),
    }
}

fn load_de(path: &str) -> Result<(crate::diffexpr::DeResult, ProvenanceGraph)> {
    match load_container(Path::new(path))? {
        (AnalysisObject::De(res), prov) => Ok((res, prov)),
        (other, _) => Err(Error::Usage(format!(
            "`{path}` holds a {} object, expected a DE result",
            other.type_name()
        ))),
    }
}

/// Record the executed step into the graph (inputs first) and save the
/// output container.
fn record_and_save(
    step: &Step,
    mut prov: ProvenanceGraph,
    input_hash: &str,
    out_path: &str,
    output: &AnalysisObject,
) -> Result<String> {
    let input_id = prov.ensure_object(input_hash);
    let output_hash = object_hash(output)?;
    prov.record(
        step.op_name(),
        step.to_params(),
        &[input_id],
        vec![input_hash.to_string()],
        &output_hash,
    )?;
    save_container(Path::new(out_path), output, &prov)?;
    Ok(output_hash)
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).map_err(|_| Error::MissingFile { path: path.display().to_string() })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_text(path: &str, content: &str) -> Result<()> {
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn parse_group_arg(raw: &str) -> (String, String) {
    // `name=path` or a bare path whose stem becomes the name
    match raw.split_once('=') {
        Some((name, path)) => (name.to_string(), path.to_string()),
        None => {
            let stem = Path::new(raw)
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| raw.to_string());
            (stem, raw.to_string())
        }
    }
}

fn de_test_of(test: &str, pooled: bool, boot_b: usize) -> Result<DeTest> {
    Ok(match test {
        "t" => DeTest::T { pooled },
        "wilcox" => DeTest::Wilcoxon,
        "bootT" => DeTest::BootT { b: boot_b },
        other => return Err(Error::Usage(format!("unknown test `{other}`"))),
    })
}

fn relnet_edges_csv(net: &crate::netmod::RelNet) -> String {
    let headers: Vec<String> =
        ["geneA", "geneB", "p"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = net
        .edges
        .iter()
        .map(|&(i, j, p)| {
            vec![net.gene_ids[i].clone(), net.gene_ids[j].clone(), fmt_f64(p)]
        })
        .collect();
    render_csv(&headers, &rows)
}

impl Step {
    /// Execute the step, returning human-readable progress lines.
    pub fn run(&self) -> Result<Vec<String>> {
        let mut messages = Vec::new();
        match self {
            Step::Load { config, out, groups, networks, group_label, network_label } => {
                let cfg = parse_config_file(Path::new(config))?;
                let (mut ds, report) = load_dataset(&cfg)?;
                for (name, rows) in &report.files {
                    messages.push(format!("read {name}: {rows} rows"));
                }
                for raw in groups {
                    let (name, path) = parse_group_arg(raw);
                    let label = group_label
                        .clone()
                        .ok_or_else(|| Error::Usage("--group needs --group-label".into()))?;
                    let members = read_group_file(Path::new(&path))?;
                    let (next, rep) = ds.add_gene_group(&name, &members, &label)?;
                    ds = next;
                    messages.push(format!(
                        "group {name}: {} resolved, {} unresolved{}",
                        rep.resolved,
                        rep.unresolved.len(),
                        if rep.unresolved.is_empty() {
                            String::new()
                        } else {
                            format!(" ({})", rep.unresolved.join(", "))
                        }
                    ));
                }
                for raw in networks {
                    let (name, path) = parse_group_arg(raw);
                    let label = network_label
                        .clone()
                        .ok_or_else(|| Error::Usage("--network needs --network-label".into()))?;
                    let edges = read_network_file(Path::new(&path))?;
                    let (next, rep) = ds.add_network(&name, &edges, &label)?;
                    ds = next;
                    messages.push(format!(
                        "network {name}: {} nodes resolved, {} unresolved",
                        rep.resolved,
                        rep.unresolved.len()
                    ));
                }
                let config_hash = hash_file(Path::new(config))?;
                let obj = AnalysisObject::Raw(ds);
                let hash =
                    record_and_save(self, ProvenanceGraph::new(), &config_hash, out, &obj)?;
                messages.push(format!("wrote {out} ({})", &hash[..12]));
            }
            Step::Qc {
                input,
                out,
                sig_noise,
                rm_flags,
                remove,
                label_id,
                mark_bad,
                bkg,
                chip,
                wa_svg,
                spatial_svg,
                boxplot_svg,
            } => {
                let (ds, prov) = load_raw(input)?;
                let input_hash = object_hash(&AnalysisObject::Raw(ds.clone()))?;
                let bad: Vec<usize> = mark_bad
                    .iter()
                    .map(|v| {
                        v.parse::<usize>()
                            .map_err(|_| Error::Usage(format!("bad spot index `{v}`")))
                    })
                    .collect::<Result<_>>()?;
                let flags: Vec<i64> = rm_flags
                    .iter()
                    .map(|v| {
                        v.parse::<i64>().map_err(|_| Error::Usage(format!("bad flag `{v}`")))
                    })
                    .collect::<Result<_>>()?;
                let ds = ds.mark_bad_spots(&bad)?;
                let ds = ds.select_spots(&SelectParams {
                    sig_noise: *sig_noise,
                    rm_flags: flags,
                    remove_names: remove.clone(),
                    label_id: label_id.clone(),
                })?;
                let kept =
                    ds.use_spot.data().iter().filter(|&&b| b).count();
                messages.push(format!(
                    "selected {kept} of {} spot/chip cells",
                    ds.spots() * ds.chips()
                ));
                // exploratory plots on the requested chip (1-based)
                if wa_svg.is_some() || spatial_svg.is_some() || boxplot_svg.is_some() {
                    if *chip == 0 || *chip > ds.chips() {
                        return Err(Error::Usage(format!(
                            "--chip {chip} out of range 1..={}",
                            ds.chips()
                        )));
                    }
                    let wa = compute_wa(&ds, *bkg);
                    let col = chip - 1;
                    if let Some(path) = wa_svg {
                        let a: Vec<f64> = (0..wa.genes()).map(|g| wa.a.at(g, col)).collect();
                        let w: Vec<f64> = (0..wa.genes()).map(|g| wa.w.at(g, col)).collect();
                        write_text(path, &svg::wa_plot(&a, &w, None, &format!("chip {chip}")))?;
                        messages.push(format!("wrote {path}"));
                    }
                    if let Some(path) = spatial_svg {
                        let w: Vec<f64> = (0..wa.genes()).map(|g| wa.w.at(g, col)).collect();
                        write_text(
                            path,
                            &svg::spatial_plot(&w, &ds.grid, &format!("chip {chip} W")),
                        )?;
                        messages.push(format!("wrote {path}"));
                    }
                    if let Some(path) = boxplot_svg {
                        let groups: Vec<(String, Vec<f64>)> = (0..wa.chips())
                            .map(|c| {
                                (
                                    ds.samples.file_names[c].clone(),
                                    (0..wa.genes())
                                        .map(|g| wa.w.at(g, c))
                                        .filter(|v| v.is_finite())
                                        .collect(),
                                )
                            })
                            .collect();
                        write_text(path, &svg::boxplot(&groups, "W per chip", "W"))?;
                        messages.push(format!("wrote {path}"));
                    }
                }
                if let Some(out) = out {
                    let obj = AnalysisObject::Raw(ds);
                    let hash = record_and_save(self, prov, &input_hash, out, &obj)?;
                    messages.push(format!("wrote {out} ({})", &hash[..12]));
                }
            }
            Step::Normalize { input, out, spec, seed } => {
                let (raw, prov) = load_raw(input)?;
                let input_hash = object_hash(&AnalysisObject::Raw(raw.clone()))?;
                let mut ds = compute_wa(&raw, spec.bkg);
                if spec.loess {
                    ds = if spec.repeated {
                        normalize_repeated_loess(
                            &ds,
                            spec.span,
                            spec.scope,
                            spec.iterations,
                            spec.repeats,
                            spec.fraction,
                            spec.alpha,
                            *seed,
                        )?
                    } else {
                        normalize_loess(&ds, spec.span, spec.scope, spec.iterations)?
                    };
                }
                if let Some(scale) = spec.scale {
                    ds = normalize_scale_mad(&ds, scale)?;
                }
                messages.push(format!(
                    "normalized {} spots x {} chips ({} missing cells)",
                    ds.genes(),
                    ds.chips(),
                    ds.w.missing_count()
                ));
                let obj = AnalysisObject::Norm(ds);
                let hash = record_and_save(self, prov, &input_hash, out, &obj)?;
                messages.push(format!("wrote {out} ({})", &hash[..12]));
            }
            Step::Summarize {
                input,
                out,
                gene_label,
                sample_label,
                spots,
                samples,
                keep_empty,
                rm_bad,
            } => {
                let (ds, prov) = load_norm(input)?;
                let input_hash = object_hash(&AnalysisObject::Norm(ds.clone()))?;
                let summarized = crate::normalize::summarize_replicates(
                    &ds,
                    gene_label,
                    sample_label,
                    *spots,
                    *samples,
                    *keep_empty,
                    *rm_bad,
                )?;
                messages.push(format!(
                    "summarized to {} genes x {} samples",
                    summarized.genes(),
                    summarized.chips()
                ));
                let obj = AnalysisObject::Norm(summarized);
                let hash = record_and_save(self, prov, &input_hash, out, &obj)?;
                messages.push(format!("wrote {out} ({})", &hash[..12]));
            }
            Step::De {
                input,
                label,
                test,
                pooled,
                boot_b,
                adjust,
                out_csv,
                out_html,
                bin,
                volcano_svg,
                top_n,
                seed,
            } => {
                let (ds, prov) = load_norm(input)?;
                let input_hash = object_hash(&AnalysisObject::Norm(ds.clone()))?;
                let opts = DeOptions {
                    test: de_test_of(test, *pooled, *boot_b)?,
                    adjust: AdjustMethod::parse(adjust)?,
                    seed: *seed,
                };
                let res = de_genes_two_groups(&ds, label, &opts)?;
                messages.push(format!(
                    "tested {} genes ({} skipped) between {} and {}",
                    res.genes(),
                    res.skipped.len(),
                    res.level_names[0],
                    res.level_names[1]
                ));
                if let Some(path) = out_csv {
                    write_text(path, &de_table(&res, 0, TableFormat::Csv, *top_n))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = out_html {
                    write_text(path, &de_table(&res, 0, TableFormat::Html, *top_n))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = volcano_svg {
                    let points = volcano_data(&res, 0);
                    write_text(path, &svg::volcano(&points, "volcano"))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = bin {
                    let obj = AnalysisObject::De(res);
                    let hash = record_and_save(self, prov, &input_hash, path, &obj)?;
                    messages.push(format!("wrote {path} ({})", &hash[..12]));
                }
            }
            Step::Anova { input, factors, f_test, adjust, out_csv, out_html, bin } => {
                let (ds, prov) = load_norm(input)?;
                let input_hash = object_hash(&AnalysisObject::Norm(ds.clone()))?;
                let factor_refs: Vec<&str> = factors.iter().map(String::as_str).collect();
                let design = design_anova(&ds, &factor_refs)?;
                let res = fit_anova(&ds, &design, *f_test, AdjustMethod::parse(adjust)?)?;
                messages.push(crate::diffexpr::anova::describe_fit(&res));
                if let Some(path) = out_csv {
                    write_text(path, &de_table(&res, 0, TableFormat::Csv, None))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = out_html {
                    write_text(path, &de_table(&res, 0, TableFormat::Html, None))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = bin {
                    let obj = AnalysisObject::De(res);
                    let hash = record_and_save(self, prov, &input_hash, path, &obj)?;
                    messages.push(format!("wrote {path} ({})", &hash[..12]));
                }
            }
            Step::Cluster {
                input,
                alg,
                on,
                n_de,
                p_cut,
                family,
                linkage,
                distance,
                k,
                restarts,
                xdim,
                ydim,
                topol,
                epochs,
                svg: svg_out,
                out_csv,
                seed,
            } => {
                let (res, _prov) = load_de(input)?;
                let on = match on.as_str() {
                    "genes" => ClusterOn::Genes,
                    "samples" => ClusterOn::Samples,
                    other => return Err(Error::Usage(format!("unknown --on `{other}`"))),
                };
                let selection = match (n_de, p_cut) {
                    (Some(n), None) => DeSelection::TopN(*n),
                    (None, Some(c)) => DeSelection::PCut(*c),
                    (None, None) => DeSelection::TopN(20),
                    (Some(_), Some(_)) => {
                        return Err(Error::Usage("--n-de and --p-cut are exclusive".into()))
                    }
                };
                let default_distance = match on {
                    ClusterOn::Genes => DistanceKind::OneMinusCor,
                    ClusterOn::Samples => DistanceKind::Euclidean,
                };
                let dist = match distance {
                    Some(d) => DistanceKind::parse(d)?,
                    None => default_distance,
                };
                let algorithm = match alg.as_str() {
                    "hier" => {
                        ClusterAlg::Hier { linkage: Linkage::parse(linkage)?, distance: dist }
                    }
                    "kmeans" => ClusterAlg::KMeans { k: *k, restarts: *restarts },
                    "som" => ClusterAlg::Som(SomParams {
                        xdim: *xdim,
                        ydim: *ydim,
                        topology: SomTopology::parse(topol)?,
                        epochs: *epochs,
                        alpha0: 0.05,
                        radius0: (*xdim).max(*ydim) as f64 / 2.0,
                    }),
                    other => return Err(Error::Usage(format!("unknown algorithm `{other}`"))),
                };
                let outcome = cluster_de(&res, *family, selection, &algorithm, on, *seed)?;
                for w in &outcome.warnings {
                    messages.push(format!("warning: {w}"));
                }
                messages.push(format!(
                    "clustered {} genes over {} samples",
                    outcome.gene_ids.len(),
                    outcome.sample_names.len()
                ));
                match &outcome.outcome {
                    ClusterOutcome::Tree(tree) => {
                        if let Some(path) = svg_out {
                            write_text(path, &svg::dendrogram(tree, "dendrogram"))?;
                            messages.push(format!("wrote {path}"));
                        }
                        if let Some(path) = out_csv {
                            let headers =
                                vec!["item".to_string(), "order".to_string()];
                            let order = tree.leaf_order();
                            let rows: Vec<Vec<String>> = order
                                .iter()
                                .enumerate()
                                .map(|(pos, &leaf)| {
                                    vec![tree.leaf_labels[leaf].clone(), pos.to_string()]
                                })
                                .collect();
                            write_text(path, &render_csv(&headers, &rows))?;
                            messages.push(format!("wrote {path}"));
                        }
                    }
                    ClusterOutcome::Flat(part) => {
                        if let Some(path) = svg_out {
                            write_text(
                                path,
                                &svg::heatmap(
                                    &outcome.sub,
                                    &outcome.gene_ids,
                                    &outcome.sample_names,
                                    "clustered W",
                                ),
                            )?;
                            messages.push(format!("wrote {path}"));
                        }
                        if let Some(path) = out_csv {
                            let labels = match on {
                                ClusterOn::Genes => &outcome.gene_ids,
                                ClusterOn::Samples => &outcome.sample_names,
                            };
                            let headers =
                                vec!["item".to_string(), "cluster".to_string()];
                            let rows: Vec<Vec<String>> = labels
                                .iter()
                                .zip(&part.assignment)
                                .map(|(l, &a)| vec![l.clone(), a.to_string()])
                                .collect();
                            write_text(path, &render_csv(&headers, &rows))?;
                            messages.push(format!("wrote {path}"));
                        }
                        messages.push(format!("inertia {}", fmt_f64(part.inertia)));
                    }
                }
            }
            Step::Classify {
                input,
                label,
                method,
                k,
                n_genes,
                pool,
                search,
                pool_size,
                rank_by,
                top,
                out_csv,
                out_html,
                bin,
            } => {
                let (ds, prov) = load_norm(input)?;
                let input_hash = object_hash(&AnalysisObject::Norm(ds.clone()))?;
                let method = match method.as_str() {
                    "lda" => ClassMethod::Lda,
                    "knn" => ClassMethod::Knn { k: *k },
                    other => return Err(Error::Usage(format!("unknown method `{other}`"))),
                };
                let pool_spec = if pool == "all" {
                    GenePool::All
                } else if let Some(name) = pool.strip_prefix("group:") {
                    GenePool::Group(name.to_string())
                } else if let Some(name) = pool.strip_prefix("network:") {
                    GenePool::Network(name.to_string())
                } else {
                    GenePool::Group(pool.clone())
                };
                let res = match search.as_str() {
                    "exhaustive" => {
                        exhaustive_search(&ds, label, &pool_spec, method, *n_genes, *top)?
                    }
                    "snc" => {
                        let rank = match rank_by.as_str() {
                            "cv" => RankBy::SingleGeneCv,
                            "de" => RankBy::DeStatistic,
                            other => {
                                return Err(Error::Usage(format!("unknown rank-by `{other}`")))
                            }
                        };
                        search_and_choose(
                            &ds, label, &pool_spec, method, *n_genes, *pool_size, rank, *top,
                        )?
                    }
                    other => return Err(Error::Usage(format!("unknown search `{other}`"))),
                };
                messages.push(format!(
                    "{} classifiers of {} genes, ordered by CV value ({} subsets searched)",
                    res.subsets.len(),
                    res.n_genes,
                    res.search_space_size
                ));
                if !res.dropped.is_empty() {
                    messages.push(format!(
                        "dropped {} pool genes with missing data",
                        res.dropped.len()
                    ));
                }
                if let Some(path) = out_csv {
                    write_text(path, &class_table(&res, TableFormat::Csv))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = out_html {
                    write_text(path, &class_table(&res, TableFormat::Html))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = bin {
                    let obj = AnalysisObject::Class(res);
                    let hash = record_and_save(self, prov, &input_hash, path, &obj)?;
                    messages.push(format!("wrote {path} ({})", &hash[..12]));
                }
            }
            Step::RelNet {
                input,
                label,
                condition,
                group,
                cor,
                cut,
                svg: svg_out,
                out_csv,
                bin,
                pair_svg,
                pair,
                seed,
            } => {
                let (ds, prov) = load_norm(input)?;
                let input_hash = object_hash(&AnalysisObject::Norm(ds.clone()))?;
                let net =
                    rel_network_b(&ds, label, condition, group, CorKind::parse(cor)?, *cut, *seed)?;
                messages.push(format!(
                    "{} genes, {} edges at p <= {}",
                    net.gene_ids.len(),
                    net.edges.len(),
                    fmt_f64(*cut)
                ));
                for note in &net.notes {
                    messages.push(format!("note: {note}"));
                }
                if let Some(path) = svg_out {
                    write_text(path, &svg::network_plot(&net, &format!("{condition} network")))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = out_csv {
                    write_text(path, &relnet_edges_csv(&net))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = pair_svg {
                    if pair.len() != 2 {
                        return Err(Error::Usage("--pair needs exactly two gene names".into()));
                    }
                    let data = gene_pair_data(&net, &pair[0], &pair[1])?;
                    write_text(path, &svg::gene_pair_plot(&data, &pair[0], &pair[1]))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = bin {
                    let obj = AnalysisObject::Net(net);
                    let hash = record_and_save(self, prov, &input_hash, path, &obj)?;
                    messages.push(format!("wrote {path} ({})", &hash[..12]));
                }
            }
            Step::RelNetDiff {
                input,
                label,
                condition_a,
                condition_b,
                group,
                cut,
                svg: svg_out,
                out_csv,
                bin,
                pair_svg,
                pair,
            } => {
                let (ds, prov) = load_norm(input)?;
                let input_hash = object_hash(&AnalysisObject::Norm(ds.clone()))?;
                let net = rel_network_m(&ds, label, condition_a, condition_b, group, *cut)?;
                messages.push(format!(
                    "{} genes, {} altered-correlation edges at p <= {}",
                    net.gene_ids.len(),
                    net.edges.len(),
                    fmt_f64(*cut)
                ));
                if let Some(path) = svg_out {
                    write_text(
                        path,
                        &svg::network_plot(
                            &net,
                            &format!("{condition_a} vs {condition_b}"),
                        ),
                    )?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = out_csv {
                    write_text(path, &relnet_edges_csv(&net))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = pair_svg {
                    if pair.len() != 2 {
                        return Err(Error::Usage("--pair needs exactly two gene names".into()));
                    }
                    let data = gene_pair_data(&net, &pair[0], &pair[1])?;
                    write_text(path, &svg::gene_pair_plot(&data, &pair[0], &pair[1]))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = bin {
                    let obj = AnalysisObject::Net(net);
                    let hash = record_and_save(self, prov, &input_hash, path, &obj)?;
                    messages.push(format!("wrote {path} ({})", &hash[..12]));
                }
            }
            Step::Modules { input, label, cut_exp, cut_p, mode, adjust, svg: svg_out, out_csv, bin } => {
                let (ds, prov) = load_norm(input)?;
                let input_hash = object_hash(&AnalysisObject::Norm(ds.clone()))?;
                let mode = match mode.as_str() {
                    "condition" => ModuleMode::ByCondition,
                    "sample" => ModuleMode::BySample,
                    other => return Err(Error::Usage(format!("unknown mode `{other}`"))),
                };
                let res =
                    active_mod(&ds, label, *cut_exp, *cut_p, mode, AdjustMethod::parse(adjust)?)?;
                let active: usize = res
                    .states
                    .iter()
                    .flatten()
                    .filter(|s| **s != crate::netmod::ModState::Inactive)
                    .count();
                messages.push(format!(
                    "{} groups x {} columns, {active} active states",
                    res.group_names.len(),
                    res.column_names.len()
                ));
                if let Some(path) = svg_out {
                    write_text(path, &svg::module_map(&res, "group activation"))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = out_csv {
                    let headers: Vec<String> = ["group", "column", "state", "p", "score"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect();
                    let mut rows = Vec::new();
                    for (gi, gname) in res.group_names.iter().enumerate() {
                        for (ci, cname) in res.column_names.iter().enumerate() {
                            rows.push(vec![
                                gname.clone(),
                                cname.clone(),
                                res.states[gi][ci].name().to_string(),
                                fmt_f64(res.p_values.at(gi, ci)),
                                fmt_f64(res.scores.at(gi, ci)),
                            ]);
                        }
                    }
                    write_text(path, &render_csv(&headers, &rows))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = bin {
                    let obj = AnalysisObject::Modules(res);
                    let hash = record_and_save(self, prov, &input_hash, path, &obj)?;
                    messages.push(format!("wrote {path} ({})", &hash[..12]));
                }
            }
            Step::NetScore { input, label, out_csv, bin } => {
                let (ds, prov) = load_norm(input)?;
                let input_hash = object_hash(&AnalysisObject::Norm(ds.clone()))?;
                let res = active_net(&ds, label)?;
                messages.push(format!(
                    "scored {} networks over {} conditions",
                    res.network_names.len(),
                    res.condition_names.len()
                ));
                for note in &res.notes {
                    messages.push(format!("note: {note}"));
                }
                if let Some(path) = out_csv {
                    let headers: Vec<String> = ["network", "condition", "S", "edges", "p"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect();
                    let mut rows = Vec::new();
                    for (ni, nname) in res.network_names.iter().enumerate() {
                        for (ci, cname) in res.condition_names.iter().enumerate() {
                            rows.push(vec![
                                nname.clone(),
                                cname.clone(),
                                fmt_f64(res.s.at(ni, ci)),
                                res.edge_counts[ni][ci].to_string(),
                                fmt_f64(res.p_values.at(ni, ci)),
                            ]);
                        }
                    }
                    write_text(path, &render_csv(&headers, &rows))?;
                    messages.push(format!("wrote {path}"));
                }
                if let Some(path) = bin {
                    let obj = AnalysisObject::Scores(res);
                    let hash = record_and_save(self, prov, &input_hash, path, &obj)?;
                    messages.push(format!("wrote {path} ({})", &hash[..12]));
                }
            }
        }
        Ok(messages)
    }
}

// ---- replay ----

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayStatus {
    Match,
    Mismatch { expected: String, got: String },
    /// Downstream of a mismatch: executed, but against divergent inputs.
    Tainted { expected: String, got: String },
    /// No persistent output to verify.
    NoOutput,
}

#[derive(Debug, Clone)]
pub struct ReplayEntry {
    pub node_id: String,
    pub op_name: String,
    pub status: ReplayStatus,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub entries: Vec<ReplayEntry>,
    pub script: String,
    pub all_match: bool,
}

/// Emit the recorded pipeline as a shell script.
pub fn emit_script(graph: &ProvenanceGraph) -> Result<String> {
    let mut out = String::from("#!/bin/sh\nset -e\n");
    for op in graph.operations() {
        let name = op
            .op_name
            .as_deref()
            .ok_or_else(|| Error::Replay("operation node without a name".into()))?;
        let step = Step::from_params(name, &op.params)?;
        out.push_str(&step.command_line());
        out.push('\n');
    }
    Ok(out)
}

/// Re-execute the provenance graph of a container and verify every
/// recorded output hash. Outputs are rewritten under `out_dir` so the
/// original artifacts stay untouched.
pub fn replay(container: &Path, out_dir: &Path, strict: bool) -> Result<ReplayOutcome> {
    let (_, graph) = load_container(container)?;
    graph.validate()?;
    if graph.operations().is_empty() {
        return Err(Error::Replay(format!(
            "{} carries no recorded operations",
            container.display()
        )));
    }
    let script = emit_script(&graph)?;
    std::fs::create_dir_all(out_dir)?;
    let mut path_map: BTreeMap<String, String> = BTreeMap::new();
    let mut tainted_hashes: Vec<String> = Vec::new();
    let mut entries = Vec::new();

    for op in graph.operations() {
        let name = op
            .op_name
            .as_deref()
            .ok_or_else(|| Error::Replay("operation node without a name".into()))?;
        let mut step = Step::from_params(name, &op.params)?;
        let original_out = step.output_container().map(str::to_string);
        step.rewrite_paths(&mut |path, is_output| {
            if is_output {
                let mapped = out_dir.join(path).to_string_lossy().to_string();
                path_map.insert(path.to_string(), mapped.clone());
                mapped
            } else {
                path_map.get(path).cloned().unwrap_or_else(|| path.to_string())
            }
        });
        step.run()?;
        let tainted_input = op.input_hashes.iter().any(|h| tainted_hashes.contains(h));
        let status = match (&original_out, &op.output_hash) {
            (Some(out_path), Some(expected)) => {
                let replay_path = path_map
                    .get(out_path)
                    .cloned()
                    .unwrap_or_else(|| out_dir.join(out_path).to_string_lossy().to_string());
                let (obj, _) = load_container(Path::new(&replay_path))?;
                let got = object_hash(&obj)?;
                if &got == expected {
                    ReplayStatus::Match
                } else {
                    tainted_hashes.push(expected.clone());
                    if tainted_input {
                        ReplayStatus::Tainted { expected: expected.clone(), got }
                    } else {
                        ReplayStatus::Mismatch { expected: expected.clone(), got }
                    }
                }
            }
            _ => ReplayStatus::NoOutput,
        };
        if strict {
            if let ReplayStatus::Mismatch { expected, got }
            | ReplayStatus::Tainted { expected, got } = &status
            {
                return Err(Error::Replay(format!(
                    "hash mismatch at node {} ({name}): expected {expected}, got {got}",
                    op.id
                )));
            }
        }
        entries.push(ReplayEntry {
            node_id: op.id.clone(),
            op_name: name.to_string(),
            status,
        });
    }
    let all_match = entries
        .iter()
        .all(|e| matches!(e.status, ReplayStatus::Match | ReplayStatus::NoOutput));
    Ok(ReplayOutcome { entries, script, all_match })
}

// ---- clap surface ----

#[derive(Parser)]
#[command(
    name = "mges",
    version,
    about = "Two-channel microarray gene-expression analysis toolkit"
)]
struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TableOuts {
    /// CSV output path.
    #[arg(long)]
    out: Option<String>,
    /// Self-contained HTML output path.
    #[arg(long)]
    html: Option<String>,
    /// Container output with provenance.
    #[arg(long)]
    bin: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load quantification tables described by a config file.
    Load {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: String,
        /// Gene-group file, `name=path` or a bare path (repeatable).
        #[arg(long)]
        group: Vec<String>,
        /// Gene label used to resolve group members.
        #[arg(long)]
        group_label: Option<String>,
        /// Network edge-list file, `name=path` or a bare path (repeatable).
        #[arg(long)]
        network: Vec<String>,
        /// Gene label used to resolve network nodes.
        #[arg(long)]
        network_label: Option<String>,
    },
    /// Exploratory plots, bad-spot marking, and spot selection.
    Qc {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        sig_noise: f64,
        /// Flag values to exclude, comma separated.
        #[arg(long, value_delimiter = ',')]
        rm_flags: Vec<String>,
        /// Gene label values to exclude, comma separated.
        #[arg(long, value_delimiter = ',')]
        remove: Vec<String>,
        #[arg(long)]
        label_id: Option<String>,
        /// Spot indices to mark bad, comma separated.
        #[arg(long, value_delimiter = ',')]
        mark_bad: Vec<String>,
        /// Background method for the plotted W values.
        #[arg(long, default_value = "none")]
        bkg: String,
        /// 1-based chip for the WA and spatial plots.
        #[arg(long, default_value_t = 1)]
        chip: usize,
        #[arg(long)]
        wa_svg: Option<String>,
        #[arg(long)]
        spatial_svg: Option<String>,
        #[arg(long)]
        boxplot_svg: Option<String>,
    },
    /// Background-correct, compute W/A, and normalize.
    Normalize {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: String,
        /// Background method: none, subtract, minimumPositive.
        #[arg(long, default_value = "subtract")]
        bkg: String,
        /// Loess settings as key=value tokens: span, scope, iters,
        /// repeated, repeats, fraction, alpha.
        #[arg(long, num_args = 0..)]
        loess: Vec<String>,
        /// Skip the loess fit entirely.
        #[arg(long)]
        no_loess: bool,
        /// Scale adjustment: printTipMAD or globalMAD.
        #[arg(long)]
        scale: Option<String>,
    },
    /// Collapse replicate spots and samples.
    Summarize {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: String,
        #[arg(long)]
        gene_label: String,
        #[arg(long)]
        sample_label: String,
        /// mean, median, or none.
        #[arg(long, default_value = "median")]
        spots: String,
        /// mean, median, or none.
        #[arg(long, default_value = "mean")]
        samples: String,
        #[arg(long)]
        keep_empty: bool,
        #[arg(long)]
        rm_bad: bool,
    },
    /// Two-group differential expression.
    De {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        label: String,
        /// t, wilcox, or bootT.
        #[arg(long, default_value = "t")]
        test: String,
        /// Pooled-variance t instead of Welch.
        #[arg(long)]
        pooled: bool,
        #[arg(long, default_value_t = 1000)]
        boot_b: usize,
        /// none, bonferroni, holm, BH, BY.
        #[arg(long, default_value = "BH")]
        adjust: String,
        #[command(flatten)]
        outs: TableOuts,
        #[arg(long)]
        volcano_svg: Option<String>,
        /// Emit only the strongest N genes in tables.
        #[arg(long)]
        top_n: Option<usize>,
    },
    /// Gene-wise ANOVA over one or more factors.
    Anova {
        #[arg(long = "in")]
        input: String,
        /// Sample labels acting as factors, comma separated.
        #[arg(long, value_delimiter = ',')]
        factors: Vec<String>,
        /// Joint F test instead of per-contrast t tests.
        #[arg(long)]
        f_test: bool,
        #[arg(long, default_value = "BH")]
        adjust: String,
        #[command(flatten)]
        outs: TableOuts,
    },
    /// Cluster the most differentially expressed genes.
    Cluster {
        /// DE result container (see `de --bin`).
        #[arg(long = "in")]
        input: String,
        /// hier, kmeans, or som.
        #[arg(long, default_value = "hier")]
        alg: String,
        /// genes or samples.
        #[arg(long, default_value = "genes")]
        on: String,
        #[arg(long)]
        n_de: Option<usize>,
        #[arg(long)]
        p_cut: Option<f64>,
        /// Statistic family index for the selection.
        #[arg(long, default_value_t = 0)]
        family: usize,
        #[arg(long, default_value = "average")]
        linkage: String,
        /// euclidean, oneMinusCor, or oneMinusAbsCor.
        #[arg(long)]
        distance: Option<String>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 2)]
        xdim: usize,
        #[arg(long, default_value_t = 1)]
        ydim: usize,
        #[arg(long, default_value = "rect")]
        topol: String,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long)]
        svg: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Search gene subsets that discriminate two classes.
    Classify {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        label: String,
        /// lda or knn.
        #[arg(long, default_value = "lda")]
        method: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        n_genes: usize,
        /// Gene group (name or 1-based index).
        #[arg(long)]
        group: Option<String>,
        /// Gene network (name or 1-based index).
        #[arg(long)]
        network: Option<String>,
        /// Search every gene with complete data.
        #[arg(long)]
        all: bool,
        /// exhaustive or snc (search and choose).
        #[arg(long, default_value = "exhaustive")]
        search: String,
        #[arg(long, default_value_t = 30)]
        pool_size: usize,
        /// snc pre-ranking: cv or de.
        #[arg(long, default_value = "cv")]
        rank_by: String,
        #[arg(long, default_value_t = 50)]
        top: usize,
        #[command(flatten)]
        outs: TableOuts,
    },
    /// Single-condition relevance network over a gene group.
    Relnet {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        label: String,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        group: String,
        /// pearson, robust, or mi.
        #[arg(long, default_value = "pearson")]
        cor: String,
        #[arg(long, default_value_t = 0.05)]
        cut: f64,
        #[arg(long)]
        svg: Option<String>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        bin: Option<String>,
        /// Scatter+regression plot for one gene pair.
        #[arg(long)]
        pair_svg: Option<String>,
        /// The two gene names for --pair-svg.
        #[arg(long, value_delimiter = ',')]
        pair: Vec<String>,
    },
    /// Two-condition correlation-difference network.
    RelnetDiff {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        label: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 0.05)]
        cut: f64,
        #[arg(long)]
        svg: Option<String>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        bin: Option<String>,
        #[arg(long)]
        pair_svg: Option<String>,
        #[arg(long, value_delimiter = ',')]
        pair: Vec<String>,
    },
    /// Functional classification of gene groups.
    Modules {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        label: String,
        #[arg(long, default_value_t = 1.0)]
        cut_exp: f64,
        #[arg(long = "cut-p", default_value_t = 0.05)]
        cut_p: f64,
        /// condition or sample.
        #[arg(long, default_value = "condition")]
        mode: String,
        #[arg(long, default_value = "none")]
        adjust: String,
        #[arg(long)]
        svg: Option<String>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        bin: Option<String>,
    },
    /// Chi-square combination score for gene networks.
    Netscore {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        label: String,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        bin: Option<String>,
    },
    /// Re-execute a container's recorded pipeline and verify hashes.
    Replay {
        #[arg(long = "in")]
        input: String,
        /// Fail on the first hash mismatch.
        #[arg(long)]
        strict: bool,
        /// Where replayed outputs are written.
        #[arg(long, default_value = "replay_out")]
        out_dir: String,
        /// Write the equivalent shell script here.
        #[arg(long)]
        script: Option<String>,
        /// Export the provenance graph as canonical JSON.
        #[arg(long)]
        export_graph: Option<String>,
    },
}

fn step_of(cli: Cli) -> Result<Option<Step>> {
    let seed = cli.seed;
    Ok(Some(match cli.command {
        Command::Load { config, out, group, group_label, network, network_label } => Step::Load {
            config,
            out,
            groups: group,
            networks: network,
            group_label,
            network_label,
        },
        Command::Qc {
            input,
            out,
            sig_noise,
            rm_flags,
            remove,
            label_id,
            mark_bad,
            bkg,
            chip,
            wa_svg,
            spatial_svg,
            boxplot_svg,
        } => Step::Qc {
            input,
            out,
            sig_noise,
            rm_flags,
            remove,
            label_id,
            mark_bad,
            bkg: Background::parse(&bkg)?,
            chip,
            wa_svg,
            spatial_svg,
            boxplot_svg,
        },
        Command::Normalize { input, out, bkg, loess, no_loess, scale } => {
            let mut spec = NormalizeSpec {
                bkg: Background::parse(&bkg)?,
                loess: !no_loess,
                ..NormalizeSpec::default()
            };
            parse_loess_tokens(&loess, &mut spec)?;
            spec.scale = match scale {
                Some(s) => Some(ScaleScope::parse(&s)?),
                None => None,
            };
            Step::Normalize { input, out, spec, seed }
        }
        Command::Summarize {
            input,
            out,
            gene_label,
            sample_label,
            spots,
            samples,
            keep_empty,
            rm_bad,
        } => Step::Summarize {
            input,
            out,
            gene_label,
            sample_label,
            spots: SummaryFn::parse(&spots)?,
            samples: SummaryFn::parse(&samples)?,
            keep_empty,
            rm_bad,
        },
        Command::De { input, label, test, pooled, boot_b, adjust, outs, volcano_svg, top_n } => {
            Step::De {
                input,
                label,
                test,
                pooled,
                boot_b,
                adjust,
                out_csv: outs.out,
                out_html: outs.html,
                bin: outs.bin,
                volcano_svg,
                top_n,
                seed,
            }
        }
        Command::Anova { input, factors, f_test, adjust, outs } => Step::Anova {
            input,
            factors,
            f_test,
            adjust,
            out_csv: outs.out,
            out_html: outs.html,
            bin: outs.bin,
        },
        Command::Cluster {
            input,
            alg,
            on,
            n_de,
            p_cut,
            family,
            linkage,
            distance,
            k,
            restarts,
            xdim,
            ydim,
            topol,
            epochs,
            svg,
            out,
        } => Step::Cluster {
            input,
            alg,
            on,
            n_de,
            p_cut,
            family,
            linkage,
            distance,
            k,
            restarts,
            xdim,
            ydim,
            topol,
            epochs,
            svg,
            out_csv: out,
            seed,
        },
        Command::Classify {
            input,
            label,
            method,
            k,
            n_genes,
            group,
            network,
            all,
            search,
            pool_size,
            rank_by,
            top,
            outs,
        } => {
            let pool = match (group, network, all) {
                (Some(g), None, false) => format!("group:{g}"),
                (None, Some(n), false) => format!("network:{n}"),
                (None, None, true) => "all".to_string(),
                _ => {
                    return Err(Error::Usage(
                        "choose exactly one of --group, --network, --all".into(),
                    ))
                }
            };
            Step::Classify {
                input,
                label,
                method,
                k,
                n_genes,
                pool,
                search,
                pool_size,
                rank_by,
                top,
                out_csv: outs.out,
                out_html: outs.html,
                bin: outs.bin,
            }
        }
        Command::Relnet { input, label, condition, group, cor, cut, svg, out, bin, pair_svg, pair } => {
            Step::RelNet {
                input,
                label,
                condition,
                group,
                cor,
                cut,
                svg,
                out_csv: out,
                bin,
                pair_svg,
                pair,
                seed,
            }
        }
        Command::RelnetDiff { input, label, a, b, group, cut, svg, out, bin, pair_svg, pair } => {
            Step::RelNetDiff {
                input,
                label,
                condition_a: a,
                condition_b: b,
                group,
                cut,
                svg,
                out_csv: out,
                bin,
                pair_svg,
                pair,
            }
        }
        Command::Modules { input, label, cut_exp, cut_p, mode, adjust, svg, out, bin } => {
            Step::Modules {
                input,
                label,
                cut_exp,
                cut_p,
                mode,
                adjust,
                svg,
                out_csv: out,
                bin,
            }
        }
        Command::Netscore { input, label, out, bin } => {
            Step::NetScore { input, label, out_csv: out, bin }
        }
        Command::Replay { input, strict, out_dir, script, export_graph } => {
            run_replay(&input, strict, &out_dir, script.as_deref(), export_graph.as_deref())?;
            return Ok(None);
        }
    }))
}

fn run_replay(
    input: &str,
    strict: bool,
    out_dir: &str,
    script: Option<&str>,
    export_graph: Option<&str>,
) -> Result<()> {
    let (_, graph) = load_container(Path::new(input))?;
    if let Some(path) = export_graph {
        write_text(path, &graph.to_json()?)?;
        println!("wrote {path}");
    }
    let outcome = replay(Path::new(input), Path::new(out_dir), strict)?;
    if let Some(path) = script {
        write_text(path, &outcome.script)?;
        println!("wrote {path}");
    }
    for entry in &outcome.entries {
        let status = match &entry.status {
            ReplayStatus::Match => "MATCH".to_string(),
            ReplayStatus::NoOutput => "no persistent output".to_string(),
            ReplayStatus::Mismatch { expected, got } => {
                format!("MISMATCH expected {} got {}", &expected[..12], &got[..12])
            }
            ReplayStatus::Tainted { expected, got } => {
                format!("TAINTED expected {} got {}", &expected[..12], &got[..12])
            }
        };
        println!("{} {}: {}", entry.node_id, entry.op_name, status);
    }
    println!("replay: {}", if outcome.all_match { "all hashes match" } else { "divergent" });
    Ok(())
}

/// CLI entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match step_of(cli) {
        Ok(None) => 0,
        Ok(Some(step)) => match step.run() {
            Ok(messages) => {
                for m in messages {
                    println!("{m}");
                }
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub use super::container::AnalysisObject as CliAnalysisObject;

#[allow(unused_imports)]
use std::io::Write as _;
