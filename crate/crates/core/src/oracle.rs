//! Oracles judge the state exposed by a cut.
//!
//! Three implementations are provided: [`AssertionOracle`] evaluates global
//! predicates, [`DifferentialOracle`] compares every atom against a golden
//! run, and [`ScriptedOracle`] replays canned answers (used for transcript
//! replay and as a stand-in for a human). Any
//! `FnMut(&Cut, &State) -> Result<StateVerdict, OracleError>` is an oracle too.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cut::{Cut, DownsetRecord, State};
use crate::graph::{EdgeKey, EdgeKind, EdgeLabel, ExecutionGraph, VertexId};
use crate::predicate::{eval_predicate, GlobalPredicate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeVerdict {
    Ok,
    /// The label disagrees with what the programmer intended.
    DataAnomaly,
    /// The edge should not exist: its target should not have executed.
    ControlAnomaly,
}

impl EdgeVerdict {
    pub fn is_anomaly(self) -> bool {
        self != EdgeVerdict::Ok
    }

    /// The anomaly class that applies to an edge of the given kind.
    pub fn anomaly_for(kind: EdgeKind) -> Self {
        match kind {
            EdgeKind::Data => EdgeVerdict::DataAnomaly,
            EdgeKind::Control => EdgeVerdict::ControlAnomaly,
        }
    }

    pub fn fits(self, kind: EdgeKind) -> bool {
        match self {
            EdgeVerdict::Ok => true,
            EdgeVerdict::DataAnomaly => kind == EdgeKind::Data,
            EdgeVerdict::ControlAnomaly => kind == EdgeKind::Control,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalVerdict {
    #[default]
    Ok,
    /// Ids of the violated predicates; may be empty when the judge is a
    /// human who only reports that some property fails.
    Violated(Vec<String>),
}

impl GlobalVerdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, GlobalVerdict::Violated(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateVerdict {
    pub per_edge: BTreeMap<EdgeKey, EdgeVerdict>,
    pub global: GlobalVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerdictMismatch {
    #[error("verdict is missing atom {0}")]
    MissingAtom(EdgeKey),
    #[error("verdict names {0}, which is not in the examined state")]
    ExtraAtom(EdgeKey),
    #[error("{verdict:?} cannot apply to {key}")]
    WrongKind { key: EdgeKey, verdict: EdgeVerdict },
}

impl StateVerdict {
    pub fn all_ok(state: &State) -> Self {
        StateVerdict {
            per_edge: state.keys().map(|k| (k.clone(), EdgeVerdict::Ok)).collect(),
            global: GlobalVerdict::Ok,
        }
    }

    /// Any local anomaly or a global violation.
    pub fn has_anomaly(&self) -> bool {
        self.global.is_violated() || self.per_edge.values().any(|v| v.is_anomaly())
    }

    pub fn anomalous_edges(&self) -> impl Iterator<Item = &EdgeKey> + '_ {
        self.per_edge
            .iter()
            .filter(|(_, v)| v.is_anomaly())
            .map(|(k, _)| k)
    }

    /// Checks that the verdict covers exactly the atoms of `state` and that
    /// each local verdict suits its edge kind.
    pub fn check_against(&self, state: &State) -> Result<(), VerdictMismatch> {
        let expected: BTreeSet<&EdgeKey> = state.keys().collect();
        for key in &expected {
            if !self.per_edge.contains_key(*key) {
                return Err(VerdictMismatch::MissingAtom((*key).clone()));
            }
        }
        for (key, verdict) in &self.per_edge {
            if !expected.contains(key) {
                return Err(VerdictMismatch::ExtraAtom(key.clone()));
            }
            if !verdict.fits(key.kind) {
                return Err(VerdictMismatch::WrongKind {
                    key: key.clone(),
                    verdict: *verdict,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("duplicate predicate id `{0}`")]
    DuplicatePredicateId(String),
    #[error("no scripted answer for cut {0:?}")]
    UnscriptedCut(Vec<VertexId>),
    #[error("oracle failed: {0}")]
    Failed(String),
}

pub trait Oracle {
    /// Judges the state exposed by `cut`.
    fn examine(
        &mut self,
        graph: &ExecutionGraph,
        cut: &Cut,
        state: &State,
    ) -> Result<StateVerdict, OracleError>;

    /// Predicate definitions this oracle evaluates, if any. Used to minimise
    /// the atom set when a global anomaly is localized.
    fn predicates(&self) -> &[GlobalPredicate] {
        &[]
    }
}

impl<F> Oracle for F
where
    F: FnMut(&Cut, &State) -> Result<StateVerdict, OracleError>,
{
    fn examine(
        &mut self,
        _graph: &ExecutionGraph,
        cut: &Cut,
        state: &State,
    ) -> Result<StateVerdict, OracleError> {
        self(cut, state)
    }
}

/// Marks every edge `Ok` and reports the predicates that evaluate to
/// violated. Unevaluable predicates do not count.
#[derive(Debug, Clone)]
pub struct AssertionOracle {
    predicates: Vec<GlobalPredicate>,
}

impl AssertionOracle {
    pub fn new(predicates: Vec<GlobalPredicate>) -> Result<Self, OracleError> {
        let mut seen = HashSet::new();
        for p in &predicates {
            if !seen.insert(p.id.as_str()) {
                return Err(OracleError::DuplicatePredicateId(p.id.clone()));
            }
        }
        Ok(AssertionOracle { predicates })
    }

    pub fn judge(&self, state: &State) -> StateVerdict {
        let violated: Vec<String> = self
            .predicates
            .iter()
            .filter(|p| eval_predicate(p, state).is_violated())
            .map(|p| p.id.clone())
            .collect();
        StateVerdict {
            global: if violated.is_empty() {
                GlobalVerdict::Ok
            } else {
                GlobalVerdict::Violated(violated)
            },
            ..StateVerdict::all_ok(state)
        }
    }
}

impl Oracle for AssertionOracle {
    fn examine(
        &mut self,
        _graph: &ExecutionGraph,
        _cut: &Cut,
        state: &State,
    ) -> Result<StateVerdict, OracleError> {
        Ok(self.judge(state))
    }

    fn predicates(&self) -> &[GlobalPredicate] {
        &self.predicates
    }
}

pub fn assertion_oracle(predicates: Vec<GlobalPredicate>) -> Result<AssertionOracle, OracleError> {
    AssertionOracle::new(predicates)
}

/// Compares each atom with the same-keyed edge of a golden run.
#[derive(Debug, Clone)]
pub struct DifferentialOracle {
    reference: HashMap<EdgeKey, EdgeLabel>,
}

impl DifferentialOracle {
    pub fn new(reference: &ExecutionGraph) -> Self {
        DifferentialOracle {
            reference: reference
                .edges()
                .iter()
                .map(|e| (e.key(), e.label.clone()))
                .collect(),
        }
    }

    pub fn judge(&self, state: &State) -> StateVerdict {
        let per_edge = state
            .atoms()
            .iter()
            .map(|atom| {
                let verdict = match self.reference.get(&atom.edge_key) {
                    Some(label) if *label == atom.label => EdgeVerdict::Ok,
                    Some(_) => EdgeVerdict::DataAnomaly,
                    None => EdgeVerdict::anomaly_for(atom.edge_key.kind),
                };
                (atom.edge_key.clone(), verdict)
            })
            .collect();
        StateVerdict {
            per_edge,
            global: GlobalVerdict::Ok,
        }
    }
}

impl Oracle for DifferentialOracle {
    fn examine(
        &mut self,
        _graph: &ExecutionGraph,
        _cut: &Cut,
        state: &State,
    ) -> Result<StateVerdict, OracleError> {
        Ok(self.judge(state))
    }
}

pub fn differential_oracle(reference: &ExecutionGraph) -> DifferentialOracle {
    DifferentialOracle::new(reference)
}

/// Answers from a fixed table keyed by downset.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOracle {
    script: BTreeMap<BTreeSet<VertexId>, StateVerdict>,
    predicates: Vec<GlobalPredicate>,
}

impl ScriptedOracle {
    pub fn new(script: BTreeMap<BTreeSet<VertexId>, StateVerdict>) -> Self {
        ScriptedOracle {
            script,
            predicates: Vec::new(),
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (DownsetRecord, StateVerdict)>) -> Self {
        Self::new(pairs.into_iter().map(|(d, v)| (d.set(), v)).collect())
    }

    /// Predicate definitions to expose for atom minimisation.
    pub fn with_predicates(mut self, predicates: Vec<GlobalPredicate>) -> Self {
        self.predicates = predicates;
        self
    }

    pub fn insert(&mut self, downset: BTreeSet<VertexId>, verdict: StateVerdict) {
        self.script.insert(downset, verdict);
    }
}

impl Oracle for ScriptedOracle {
    fn examine(
        &mut self,
        _graph: &ExecutionGraph,
        cut: &Cut,
        _state: &State,
    ) -> Result<StateVerdict, OracleError> {
        self.script
            .get(cut.downset())
            .cloned()
            .ok_or_else(|| OracleError::UnscriptedCut(cut.downset().iter().copied().collect()))
    }

    fn predicates(&self) -> &[GlobalPredicate] {
        &self.predicates
    }
}

pub fn scripted_oracle(script: BTreeMap<BTreeSet<VertexId>, StateVerdict>) -> ScriptedOracle {
    ScriptedOracle::new(script)
}
