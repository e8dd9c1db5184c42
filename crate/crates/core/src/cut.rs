//! Cut-sets, their order, the state they expose, and bisection between two
//! ordered cuts.
//!
//! A cut is represented by its root-side vertex set `W` (a downset: closed
//! under predecessors, contains the root, leaves a nonempty complement). The
//! cut's edges are exactly the edges leaving `W`, so every cut edge points
//! from the root side to the remainder. Comparing cuts is then a subset test.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{topo_levels, Edge, EdgeKey, EdgeLabel, ExecutionGraph, GraphError, GraphTag, VertexId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CutError {
    #[error("downset does not contain the root vertex")]
    RootMissing,
    #[error("downset covers every vertex; the complement would be empty")]
    ComplementEmpty,
    #[error("downset is not predecessor-closed: edge {witness} enters it from outside")]
    NotPredecessorClosed { witness: EdgeKey },
    #[error("vertex {0} is not part of the graph")]
    UnknownVertex(VertexId),
    #[error("cut belongs to a different graph")]
    GraphMismatch,
    #[error("cuts are not ordered (lower bound must be below or equal to upper bound)")]
    NotOrdered,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A valid cut-set, identified by its root-side downset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cut {
    downset: BTreeSet<VertexId>,
    graph: GraphTag,
}

impl Cut {
    pub fn downset(&self) -> &BTreeSet<VertexId> {
        &self.downset
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.downset.contains(&v)
    }

    pub fn record(&self) -> DownsetRecord {
        DownsetRecord {
            downset: self.downset.iter().copied().collect(),
        }
    }

    fn belongs_to(&self, g: &ExecutionGraph) -> Result<(), CutError> {
        if self.graph == g.tag() {
            Ok(())
        } else {
            Err(CutError::GraphMismatch)
        }
    }
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.downset.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

/// Serialized form of a cut: `{"downset":[ids…]}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DownsetRecord {
    pub downset: Vec<VertexId>,
}

impl DownsetRecord {
    pub fn set(&self) -> BTreeSet<VertexId> {
        self.downset.iter().copied().collect()
    }
}

impl From<&Cut> for DownsetRecord {
    fn from(cut: &Cut) -> Self {
        cut.record()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutOrder {
    Less,
    Equal,
    Greater,
    Incomparable,
}

impl CutOrder {
    /// `Less` or `Equal`.
    pub fn is_le(self) -> bool {
        matches!(self, CutOrder::Less | CutOrder::Equal)
    }
}

/// One conjunct of a state: the label carried by a cut edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub edge_key: EdgeKey,
    pub label: EdgeLabel,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", self.edge_key, self.label)
    }
}

/// The conjunction of labels across a cut, one atom per cut edge, sorted by
/// edge key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State {
    atoms: Vec<Atom>,
}

impl State {
    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Self {
        let mut atoms: Vec<Atom> = atoms.into_iter().collect();
        atoms.sort_by(|a, b| a.edge_key.cmp(&b.edge_key));
        atoms.dedup_by(|a, b| a.edge_key == b.edge_key);
        State { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &EdgeKey> + '_ {
        self.atoms.iter().map(|a| &a.edge_key)
    }

    pub fn atom(&self, key: &EdgeKey) -> Option<&Atom> {
        self.atoms
            .binary_search_by(|a| a.edge_key.cmp(key))
            .ok()
            .map(|i| &self.atoms[i])
    }

    /// The state with the atom at `key` dropped.
    pub fn without(&self, key: &EdgeKey) -> State {
        State {
            atoms: self
                .atoms
                .iter()
                .filter(|a| a.edge_key != *key)
                .cloned()
                .collect(),
        }
    }
}

/// Validates `w` as a downset of `g` and wraps it as a cut.
pub fn cut_from_downset(
    g: &ExecutionGraph,
    w: impl IntoIterator<Item = VertexId>,
) -> Result<Cut, CutError> {
    let downset: BTreeSet<VertexId> = w.into_iter().collect();
    if let Some(&v) = downset.iter().find(|v| !g.contains(**v)) {
        return Err(CutError::UnknownVertex(v));
    }
    if !downset.contains(&VertexId::ROOT) {
        return Err(CutError::RootMissing);
    }
    if downset.len() == g.vertex_count() {
        return Err(CutError::ComplementEmpty);
    }
    let mut closure_witness: Option<EdgeKey> = None;
    for e in g.edges() {
        if downset.contains(&e.dst) && !downset.contains(&e.src) {
            let key = e.key();
            if closure_witness.as_ref().is_none_or(|w| key < *w) {
                closure_witness = Some(key);
            }
        }
    }
    if let Some(witness) = closure_witness {
        return Err(CutError::NotPredecessorClosed { witness });
    }
    Ok(Cut {
        downset,
        graph: g.tag(),
    })
}

/// The cut whose root side is the root vertex alone.
pub fn root_cut(g: &ExecutionGraph) -> Result<Cut, CutError> {
    cut_from_downset(g, [VertexId::ROOT])
}

/// Edges leaving the downset, sorted by key.
pub fn cut_edges<'g>(g: &'g ExecutionGraph, c: &Cut) -> Result<Vec<&'g Edge>, CutError> {
    c.belongs_to(g)?;
    let mut edges: Vec<&Edge> = c
        .downset
        .iter()
        .flat_map(|&v| g.out_edges(v))
        .filter(|e| !c.downset.contains(&e.dst))
        .collect();
    edges.sort_by_key(|e| e.key());
    Ok(edges)
}

pub fn compare(a: &Cut, b: &Cut) -> Result<CutOrder, CutError> {
    if a.graph != b.graph {
        return Err(CutError::GraphMismatch);
    }
    let a_in_b = a.downset.is_subset(&b.downset);
    let b_in_a = b.downset.is_subset(&a.downset);
    Ok(match (a_in_b, b_in_a) {
        (true, true) => CutOrder::Equal,
        (true, false) => CutOrder::Less,
        (false, true) => CutOrder::Greater,
        (false, false) => CutOrder::Incomparable,
    })
}

pub fn state_of(g: &ExecutionGraph, c: &Cut) -> Result<State, CutError> {
    let atoms = cut_edges(g, c)?
        .into_iter()
        .map(|e| Atom {
            edge_key: e.key(),
            label: e.label.clone(),
        })
        .collect();
    Ok(State { atoms })
}

/// `W_hi \ W_lo` for ordered cuts.
pub fn vertices_between(lo: &Cut, hi: &Cut) -> Result<BTreeSet<VertexId>, CutError> {
    if !compare(lo, hi)?.is_le() {
        return Err(CutError::NotOrdered);
    }
    Ok(hi.downset.difference(&lo.downset).copied().collect())
}

/// Picks a cut strictly between `lo` and `hi`, or `None` when at most one
/// vertex separates them.
///
/// The vertices between the bounds are ordered by (longest-path level, id)
/// and the first half of them is added to `lo`. Every edge strictly raises
/// the level, so any prefix of that order stays predecessor-closed.
pub fn bisect(g: &ExecutionGraph, lo: &Cut, hi: &Cut) -> Result<Option<Cut>, CutError> {
    lo.belongs_to(g)?;
    let between = vertices_between(lo, hi)?;
    if between.len() <= 1 {
        return Ok(None);
    }
    let levels = topo_levels(g)?;
    let mut ordered: Vec<VertexId> = between.into_iter().collect();
    ordered.sort_by_key(|v| (levels[v], *v));
    let half = ordered.len() / 2;
    let mut downset = lo.downset.clone();
    downset.extend(ordered[..half].iter().copied());
    debug_assert!(cut_from_downset(g, downset.iter().copied()).is_ok());
    Ok(Some(Cut {
        downset,
        graph: g.tag(),
    }))
}
