//! Pipeline plumbing: the persistent container format, the provenance
//! graph with record/replay, and the CLI that binds the analysis modules
//! together.

pub mod cli;
pub mod container;
pub mod provenance;

pub use cli::{emit_script, replay, run, ReplayOutcome, ReplayStatus, Step};
pub use container::{load_container, object_hash, save_container, AnalysisObject};
pub use provenance::{NodeKind, ProvNode, ProvenanceGraph};
