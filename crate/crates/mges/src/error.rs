//! Crate-wide error type.
//!
//! Usage errors (bad flags, malformed requests) map to CLI exit code 1,
//! everything else is a data error and maps to exit code 2.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- configuration / ingest ----
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("config line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("config: missing mandatory key `{key}`")]
    MissingKey { key: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("{file}:{line}: column `{column}`: {message}")]
    Cell { file: String, line: usize, column: String, message: String },
    #[error("{file}:{line}: {message}")]
    Line { file: String, line: usize, message: String },
    #[error("{file}: expected {expected} data rows, found {found}")]
    RowCount { file: String, expected: usize, found: usize },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("file not found: {path}")]
    MissingFile { path: String },
    #[error("unknown label `{label}`")]
    UnknownLabel { label: String },
    #[error("duplicate name `{name}`")]
    DuplicateName { name: String },
    #[error("`{name}`: empty member list")]
    EmptyMembers { name: String },
    #[error("self edge on `{gene}`")]
    SelfEdge { gene: String },
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("remove-names given without a gene label id")]
    RemoveWithoutLabel,

    // ---- normalization ----
    #[error("{unit}: {found} usable spots, need at least {needed}")]
    TooFewPoints { unit: String, needed: usize, found: usize },
    #[error("span {span} out of range (0, 1]")]
    SpanOutOfRange { span: f64 },
    #[error("{unit}: zero MAD")]
    ZeroMad { unit: String },
    #[error("both summary functions are `none` but duplicated labels are present")]
    AmbiguousSummary,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    // ---- statistics ----
    #[error("zero variance")]
    ZeroVariance,
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("p-value {value} outside [0, 1] at index {index}")]
    PValueRange { value: f64, index: usize },
    #[error("k = {k} must be smaller than the sample count {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("constant input")]
    ConstantInput,
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    // ---- analyses ----
    #[error("label `{label}` has {levels} levels, expected exactly 2")]
    LabelArity { label: String, levels: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("zero residual degrees of freedom")]
    ZeroResidualDf,
    #[error("selection is empty")]
    EmptySelection,
    #[error("training fold has an empty class")]
    EmptyClass,
    #[error("gene pool has {pool} genes, need at least {needed}")]
    PoolTooSmall { pool: usize, needed: usize },
    #[error("gene `{gene}` is constant over the selected samples")]
    ConstantGene { gene: String },
    #[error("group `{name}` resolves to no genes with data")]
    EmptyGroup { name: String },
    #[error("network `{name}` has no resolvable edges")]
    NoEdges { name: String },
    #[error("unknown condition `{condition}` for label `{label}`")]
    UnknownCondition { condition: String, label: String },

    // ---- pipeline ----
    #[error("provenance: {0}")]
    Provenance(String),
    #[error("container: {0}")]
    Container(String),
    #[error("replay: {0}")]
    Replay(String),
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code: 1 for usage errors, 2 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}
