//! Cut-set based fault localization.
//!
//! A program run is modelled as a rooted acyclic [`graph::ExecutionGraph`].
//! Snapshots of the run are cut-sets ([`cut::Cut`]), ordered by the size of
//! their root side, and the labels crossing a cut form the program state at
//! that snapshot. [`localizer`] binary-searches between a known-clean cut and
//! a known-anomalous one, asking an [`oracle::Oracle`] to judge each
//! intermediate state, until the culprit is isolated.

pub mod cli;
pub mod cut;
pub mod graph;
pub mod graph_file;
pub mod localizer;
pub mod oracle;
pub mod predicate;
pub mod service;
pub mod trace;

pub use cut::{Atom, Cut, CutError, CutOrder, DownsetRecord, State};
pub use graph::{Edge, EdgeKey, EdgeKind, EdgeLabel, ExecutionGraph, GraphError, Scalar, VertexId};
pub use localizer::{
    localize, InitialAnomaly, Localization, LocalizationResult, LocalizeError, LocalizerConfig,
    LocalizerSession,
};
pub use oracle::{EdgeVerdict, GlobalVerdict, Oracle, OracleError, StateVerdict};
pub use predicate::GlobalPredicate;
