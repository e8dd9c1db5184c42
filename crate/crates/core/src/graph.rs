//! Execution graphs: a rooted acyclic directed graph whose vertices are
//! operations performed during one run and whose edges carry either a
//! `(variable, value)` data label or the constant control label `true`.
//!
//! Graphs are immutable once built. Structural problems (cycles, unreachable
//! vertices, dangling endpoints, duplicate edge keys) are not construction
//! errors: [`validate_graph`] reports them as data so tooling can show every
//! problem at once. Operations that need a well-formed graph reject invalid
//! ones with [`GraphError::Invalid`].

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Vertex identifier. Id 0 is always the synthetic program-start vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u64);

impl VertexId {
    pub const ROOT: VertexId = VertexId(0);

    pub fn is_root(self) -> bool {
        self == Self::ROOT
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl From<u64> for VertexId {
    fn from(id: u64) -> Self {
        VertexId(id)
    }
}

/// A scalar carried by a data edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Scalar {
    pub fn type_name(&self) -> &'static str {
        match self {
            Scalar::Bool(_) => "boolean",
            Scalar::Int(_) | Scalar::Float(_) => "number",
            Scalar::Str(_) => "string",
        }
    }
}

// Floats compare by total order so that labels have a proper equivalence.
impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Bool(a), Scalar::Bool(b)) => a == b,
            (Scalar::Int(a), Scalar::Int(b)) => a == b,
            (Scalar::Float(a), Scalar::Float(b)) => a.total_cmp(b).is_eq(),
            (Scalar::Str(a), Scalar::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Scalar {}

impl Hash for Scalar {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Scalar::Bool(b) => b.hash(state),
            Scalar::Int(i) => i.hash(state),
            Scalar::Float(x) => x.to_bits().hash(state),
            Scalar::Str(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Float(x) => write!(f, "{x:?}"),
            Scalar::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<bool> for Scalar {
    fn from(v: bool) -> Self {
        Scalar::Bool(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Str(v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Data,
    Control,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Data => "data",
            EdgeKind::Control => "control",
        })
    }
}

/// Edge label. A control edge always reads as the literal `true`, so it
/// carries no payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EdgeLabel {
    Data { var: String, value: Scalar },
    Control,
}

impl EdgeLabel {
    pub fn data(var: impl Into<String>, value: impl Into<Scalar>) -> Self {
        EdgeLabel::Data {
            var: var.into(),
            value: value.into(),
        }
    }

    pub fn kind(&self) -> EdgeKind {
        match self {
            EdgeLabel::Data { .. } => EdgeKind::Data,
            EdgeLabel::Control => EdgeKind::Control,
        }
    }

    pub fn var(&self) -> Option<&str> {
        match self {
            EdgeLabel::Data { var, .. } => Some(var),
            EdgeLabel::Control => None,
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLabel::Data { var, value } => write!(f, "({var},{value})"),
            EdgeLabel::Control => f.write_str("true"),
        }
    }
}

/// Stable edge identity `(src, dst, kind, var-or-empty)`.
///
/// The textual form is `src,dst,kind[,var]`, e.g. `1,2,data,x` or
/// `0,3,control`. It is also the JSON representation, so keys can be used
/// as object keys in verdict maps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub src: VertexId,
    pub dst: VertexId,
    pub kind: EdgeKind,
    pub var: String,
}

impl EdgeKey {
    pub fn data(src: u64, dst: u64, var: &str) -> Self {
        EdgeKey {
            src: VertexId(src),
            dst: VertexId(dst),
            kind: EdgeKind::Data,
            var: var.to_string(),
        }
    }

    pub fn control(src: u64, dst: u64) -> Self {
        EdgeKey {
            src: VertexId(src),
            dst: VertexId(dst),
            kind: EdgeKind::Control,
            var: String::new(),
        }
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.src.0, self.dst.0, self.kind)?;
        if !self.var.is_empty() {
            write!(f, ",{}", self.var)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed edge key `{0}` (expected src,dst,kind[,var])")]
pub struct EdgeKeyParseError(pub String);

impl FromStr for EdgeKey {
    type Err = EdgeKeyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EdgeKeyParseError(s.to_string());
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() < 3 || parts.len() > 4 {
            return Err(bad());
        }
        let src = parts[0].trim_start_matches('v').parse().map_err(|_| bad())?;
        let dst = parts[1].trim_start_matches('v').parse().map_err(|_| bad())?;
        let kind = match parts[2] {
            "data" => EdgeKind::Data,
            "control" | "ctrl" => EdgeKind::Control,
            _ => return Err(bad()),
        };
        let var = parts.get(3).copied().unwrap_or("").to_string();
        match kind {
            EdgeKind::Data if var.is_empty() => return Err(bad()),
            EdgeKind::Control if !var.is_empty() => return Err(bad()),
            _ => {}
        }
        Ok(EdgeKey {
            src: VertexId(src),
            dst: VertexId(dst),
            kind,
            var,
        })
    }
}

impl Serialize for EdgeKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EdgeKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
    pub label: EdgeLabel,
}

impl Edge {
    pub fn new(src: impl Into<VertexId>, dst: impl Into<VertexId>, label: EdgeLabel) -> Self {
        Edge {
            src: src.into(),
            dst: dst.into(),
            label,
        }
    }

    pub fn key(&self) -> EdgeKey {
        EdgeKey {
            src: self.src,
            dst: self.dst,
            kind: self.label.kind(),
            var: self.label.var().unwrap_or("").to_string(),
        }
    }

    pub fn kind(&self) -> EdgeKind {
        self.label.kind()
    }
}

/// A structural problem found by [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    /// Vertices of one strongly connected component (or a self-loop).
    Cycle { vertices: Vec<VertexId> },
    Unreachable { vertex: VertexId },
    DanglingEndpoint { edge: EdgeKey, missing: VertexId },
    NonTrueControlLabel { edge: EdgeKey },
    DuplicateEdgeKey { edge: EdgeKey },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { vertices } => {
                let ids: Vec<String> = vertices.iter().map(|v| v.to_string()).collect();
                write!(f, "cycle {}", ids.join(","))
            }
            Violation::Unreachable { vertex } => write!(f, "unreachable {vertex}"),
            Violation::DanglingEndpoint { edge, missing } => {
                write!(f, "edge {edge} references unknown vertex {missing}")
            }
            Violation::NonTrueControlLabel { edge } => {
                write!(f, "control edge {edge} is not labelled \"true\"")
            }
            Violation::DuplicateEdgeKey { edge } => write!(f, "duplicate edge key {edge}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid execution graph: {0}")]
    Invalid(ValidationReport),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
}

/// Per-graph content fingerprint, used to detect cuts applied to the wrong graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphTag(u64);

/// An execution graph `⟨v0, V, Ed ∪ Ec⟩`.
#[derive(Debug, Clone)]
pub struct ExecutionGraph {
    vertices: BTreeMap<VertexId, Option<String>>,
    edges: Vec<Edge>,
    deterministic: bool,
    out_adj: BTreeMap<VertexId, Vec<usize>>,
    in_adj: BTreeMap<VertexId, Vec<usize>>,
    tag: GraphTag,
}

impl PartialEq for ExecutionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.edges == other.edges
            && self.deterministic == other.deterministic
    }
}

impl Eq for ExecutionGraph {}

impl ExecutionGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::new()
    }

    pub fn root(&self) -> VertexId {
        VertexId::ROOT
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn tag(&self) -> GraphTag {
        self.tag
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains_key(&v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.keys().copied()
    }

    pub fn description(&self, v: VertexId) -> Option<&str> {
        self.vertices.get(&v).and_then(|d| d.as_deref())
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        self.out_adj
            .get(&v)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    pub fn in_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        self.in_adj
            .get(&v)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    pub fn edge(&self, key: &EdgeKey) -> Option<&Edge> {
        self.out_edges(key.src).find(|e| e.key() == *key)
    }

    pub fn ensure_valid(&self) -> Result<(), GraphError> {
        let report = validate_graph(self);
        if report.is_ok() {
            Ok(())
        } else {
            Err(GraphError::Invalid(report))
        }
    }
}

/// Accumulates vertices and edges; the root vertex is always present.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    vertices: BTreeMap<VertexId, Option<String>>,
    edges: Vec<Edge>,
    deterministic: bool,
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphBuilder {
    pub fn new() -> Self {
        let mut vertices = BTreeMap::new();
        vertices.insert(VertexId::ROOT, None);
        GraphBuilder {
            vertices,
            edges: Vec::new(),
            deterministic: true,
        }
    }

    pub fn deterministic(mut self, deterministic: bool) -> Self {
        self.deterministic = deterministic;
        self
    }

    pub fn set_deterministic(&mut self, deterministic: bool) {
        self.deterministic = deterministic;
    }

    pub fn vertex(mut self, id: impl Into<VertexId>) -> Self {
        self.add_vertex(id, None);
        self
    }

    pub fn described(mut self, id: impl Into<VertexId>, desc: impl Into<String>) -> Self {
        self.add_vertex(id, Some(desc.into()));
        self
    }

    pub fn add_vertex(&mut self, id: impl Into<VertexId>, desc: Option<String>) {
        let id = id.into();
        match (self.vertices.get_mut(&id), desc) {
            (Some(slot), Some(d)) => *slot = Some(d),
            (Some(_), None) => {}
            (None, d) => {
                self.vertices.insert(id, d);
            }
        }
    }

    pub fn data(mut self, src: u64, dst: u64, var: &str, value: impl Into<Scalar>) -> Self {
        self.add_edge(Edge::new(src, dst, EdgeLabel::data(var, value)));
        self
    }

    pub fn control(mut self, src: u64, dst: u64) -> Self {
        self.add_edge(Edge::new(src, dst, EdgeLabel::Control));
        self
    }

    pub fn add_edge(&mut self, edge: Edge) {
        self.edges.push(edge);
    }

    pub fn build(self) -> ExecutionGraph {
        let mut out_adj: BTreeMap<VertexId, Vec<usize>> = BTreeMap::new();
        let mut in_adj: BTreeMap<VertexId, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            out_adj.entry(e.src).or_default().push(i);
            in_adj.entry(e.dst).or_default().push(i);
        }
        let mut hasher = DefaultHasher::new();
        self.vertices.hash(&mut hasher);
        self.edges.hash(&mut hasher);
        self.deterministic.hash(&mut hasher);
        ExecutionGraph {
            vertices: self.vertices,
            edges: self.edges,
            deterministic: self.deterministic,
            out_adj,
            in_adj,
            tag: GraphTag(hasher.finish()),
        }
    }
}

/// Checks every structural invariant and lists all violations found.
pub fn validate_graph(g: &ExecutionGraph) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for e in &g.edges {
        let key = e.key();
        for endpoint in [e.src, e.dst] {
            if !g.contains(endpoint) {
                violations.push(Violation::DanglingEndpoint {
                    edge: key.clone(),
                    missing: endpoint,
                });
            }
        }
        if !seen.insert(key.clone()) {
            violations.push(Violation::DuplicateEdgeKey { edge: key });
        }
    }

    for component in cyclic_components(g) {
        violations.push(Violation::Cycle {
            vertices: component,
        });
    }

    let reachable = reachable_from_root(g);
    for v in g.vertices() {
        if !reachable.contains(&v) {
            violations.push(Violation::Unreachable { vertex: v });
        }
    }

    ValidationReport { violations }
}

fn reachable_from_root(g: &ExecutionGraph) -> BTreeSet<VertexId> {
    let mut seen = BTreeSet::from([VertexId::ROOT]);
    let mut queue = VecDeque::from([VertexId::ROOT]);
    while let Some(v) = queue.pop_front() {
        for e in g.out_edges(v) {
            if g.contains(e.dst) && seen.insert(e.dst) {
                queue.push_back(e.dst);
            }
        }
    }
    seen
}

/// Vertex groups that lie on a directed cycle, each sorted, in ascending order
/// of their smallest member.
fn cyclic_components(g: &ExecutionGraph) -> Vec<Vec<VertexId>> {
    // Kahn's peel leaves exactly the vertices on or downstream of a cycle.
    let mut indegree: BTreeMap<VertexId, usize> = g.vertices().map(|v| (v, 0)).collect();
    for e in &g.edges {
        if g.contains(e.src) {
            if let Some(d) = indegree.get_mut(&e.dst) {
                *d += 1;
            }
        }
    }
    let mut queue: VecDeque<VertexId> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&v, _)| v)
        .collect();
    while let Some(v) = queue.pop_front() {
        indegree.remove(&v);
        for e in g.out_edges(v) {
            if let Some(d) = indegree.get_mut(&e.dst) {
                *d -= 1;
                if *d == 0 {
                    queue.push_back(e.dst);
                }
            }
        }
    }
    let leftover: BTreeSet<VertexId> = indegree.into_keys().collect();
    if leftover.is_empty() {
        return Vec::new();
    }

    let reach = |from: VertexId| -> BTreeSet<VertexId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            for e in g.out_edges(v) {
                if leftover.contains(&e.dst) && seen.insert(e.dst) {
                    stack.push(e.dst);
                }
            }
        }
        seen
    };
    let reach_sets: BTreeMap<VertexId, BTreeSet<VertexId>> =
        leftover.iter().map(|&v| (v, reach(v))).collect();

    let mut assigned = BTreeSet::new();
    let mut components = Vec::new();
    for &v in &leftover {
        if assigned.contains(&v) || !reach_sets[&v].contains(&v) {
            continue;
        }
        let component: Vec<VertexId> = leftover
            .iter()
            .copied()
            .filter(|u| reach_sets[&v].contains(u) && reach_sets[u].contains(&v))
            .collect();
        assigned.extend(component.iter().copied());
        components.push(component);
    }
    components
}

/// Longest directed path length from the root to every vertex.
pub fn topo_levels(g: &ExecutionGraph) -> Result<BTreeMap<VertexId, usize>, GraphError> {
    g.ensure_valid()?;
    let mut indegree: BTreeMap<VertexId, usize> = g.vertices().map(|v| (v, 0)).collect();
    for e in g.edges() {
        *indegree.get_mut(&e.dst).expect("validated endpoint") += 1;
    }
    let mut levels: BTreeMap<VertexId, usize> = g.vertices().map(|v| (v, 0)).collect();
    let mut queue = VecDeque::from([VertexId::ROOT]);
    while let Some(v) = queue.pop_front() {
        let level = levels[&v];
        for e in g.out_edges(v) {
            let slot = levels.get_mut(&e.dst).expect("validated endpoint");
            *slot = (*slot).max(level + 1);
            let d = indegree.get_mut(&e.dst).expect("validated endpoint");
            *d -= 1;
            if *d == 0 {
                queue.push_back(e.dst);
            }
        }
    }
    Ok(levels)
}

/// Every vertex with a directed path to `v`, including `v` itself.
pub fn ancestors(g: &ExecutionGraph, v: VertexId) -> Result<BTreeSet<VertexId>, GraphError> {
    if !g.contains(v) {
        return Err(GraphError::UnknownVertex(v));
    }
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for e in g.in_edges(u) {
            if seen.insert(e.src) {
                stack.push(e.src);
            }
        }
    }
    Ok(seen)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn chain4() -> ExecutionGraph {
        ExecutionGraph::builder()
            .vertex(1)
            .vertex(2)
            .vertex(3)
            .control(0, 1)
            .data(1, 2, "x", 1)
            .data(2, 3, "x", 2)
            .build()
    }

    // a=1, b=2, c=3
    pub fn diamond() -> ExecutionGraph {
        ExecutionGraph::builder()
            .vertex(1)
            .vertex(2)
            .vertex(3)
            .control(0, 1)
            .control(0, 2)
            .data(1, 3, "x", 1)
            .data(2, 3, "y", 2)
            .build()
    }
}
