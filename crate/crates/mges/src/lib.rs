//! Two-channel microarray gene-expression analysis toolkit.
//!
//! The crate ingests spotted-microarray quantification tables, normalizes
//! them, and runs the downstream analyses a two-channel study needs:
//! differential expression, clustering, small-subset classifier search,
//! relevance networks, and gene-set / gene-network scoring. Every pipeline
//! step is recorded in an append-only provenance graph with content hashes,
//! so a finished analysis can be replayed and verified node by node.
//!
//! Data model in brief: each chip measures foreground/background intensity
//! for two dye channels per spot. After background correction the toolkit
//! works on `W = log2(interest) - log2(reference)` and
//! `A = (log2(interest) + log2(reference)) / 2`, where the interest channel
//! is declared per chip in the sample sheet so dye swaps are handled by
//! construction. Missing values are `NaN` throughout and are propagated,
//! never invented.
//!
//! Modules:
//! - [`ingest`]: config parsing, strict table loading, spot selection.
//! - [`normalize`]: background correction, W/A, loess and MAD scale
//!   normalization, replicate summarization.
//! - [`stat`]: the shared statistical kernel (tests, correlation, mutual
//!   information, p-value adjustment, special functions).
//! - [`diffexpr`]: gene-wise two-group tests and ANOVA.
//! - [`cluster`]: distances, hierarchical / k-means / SOM clustering.
//! - [`classify`]: LDA / kNN subset search with leave-one-out CV.
//! - [`netmod`]: relevance networks, activation modules, network scores.
//! - [`pipeline`]: container format, provenance graph, replay, SVG/CSV/HTML
//!   emitters, and the CLI that binds everything.
//!
//! The `examples/` directory contains one runnable program per major
//! capability; `mges` is the batch CLI over the same library calls.

pub mod classify;
pub mod cluster;
pub mod diffexpr;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod matrix;
pub mod netmod;
pub mod normalize;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stat;
pub mod svg;

pub use error::{Error, Result};
pub use matrix::Matrix;
