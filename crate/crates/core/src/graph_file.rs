//! Line-delimited JSON graph files.
//!
//! ```text
//! {"type":"graph","root":0,"deterministic":true}
//! {"type":"vertex","id":1,"desc":"#1 x := 1"}
//! {"type":"edge","src":0,"dst":1,"kind":"control"}
//! {"type":"edge","src":1,"dst":2,"kind":"data","var":"x","value":1}
//! ```
//!
//! The header comes first and vertices precede edges. Unknown fields are
//! ignored.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    validate_graph, Edge, EdgeKind, EdgeLabel, ExecutionGraph, GraphBuilder, Scalar,
    ValidationReport, Violation,
};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid execution graph: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Graph {
        root: u64,
        #[serde(default = "default_true")]
        deterministic: bool,
    },
    Vertex {
        id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        desc: Option<String>,
    },
    Edge {
        src: u64,
        dst: u64,
        kind: EdgeKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        var: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<Scalar>,
    },
}

fn default_true() -> bool {
    true
}

/// Parses a graph file without structural validation. Control edges whose
/// explicit value is not `true` are returned as violations alongside the
/// graph, since the in-memory label cannot represent them.
pub fn parse_graph_unchecked(text: &str) -> Result<(ExecutionGraph, Vec<Violation>), LoadError> {
    let parse_err = |line: usize, message: String| LoadError::Parse { line, message };
    let mut builder: Option<GraphBuilder> = None;
    let mut seen_edge = false;
    let mut extra = Vec::new();
    let mut declared = std::collections::BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| parse_err(lineno, e.to_string()))?;
        let (b, line) = match (&mut builder, line) {
            (None, Line::Graph { root, deterministic }) => {
                if root != 0 {
                    return Err(parse_err(lineno, format!("root must be vertex 0, found {root}")));
                }
                builder = Some(GraphBuilder::new().deterministic(deterministic));
                continue;
            }
            (None, _) => return Err(parse_err(lineno, "missing graph header line".into())),
            (Some(_), Line::Graph { .. }) => {
                return Err(parse_err(lineno, "duplicate graph header".into()))
            }
            (Some(b), line) => (b, line),
        };
        match line {
            Line::Vertex { id, desc } => {
                if seen_edge {
                    return Err(parse_err(lineno, "vertex line after edge lines".into()));
                }
                if !declared.insert(id) {
                    return Err(parse_err(lineno, format!("vertex {id} declared twice")));
                }
                b.add_vertex(id, desc);
            }
            Line::Edge { src, dst, kind, var, value } => {
                seen_edge = true;
                let label = match kind {
                    EdgeKind::Data => match (var, value) {
                        (Some(var), Some(value)) => EdgeLabel::Data { var, value },
                        _ => {
                            return Err(parse_err(lineno, "data edge needs `var` and `value`".into()))
                        }
                    },
                    EdgeKind::Control => {
                        let edge = Edge::new(src, dst, EdgeLabel::Control);
                        match value {
                            None | Some(Scalar::Bool(true)) => {}
                            Some(Scalar::Str(ref s)) if s == "true" => {}
                            Some(_) => extra.push(Violation::NonTrueControlLabel { edge: edge.key() }),
                        }
                        EdgeLabel::Control
                    }
                };
                b.add_edge(Edge::new(src, dst, label));
            }
            Line::Graph { .. } => unreachable!("handled above"),
        }
    }
    let builder = builder.ok_or_else(|| parse_err(1, "missing graph header line".into()))?;
    Ok((builder.build(), extra))
}

/// Parses and validates a graph file.
pub fn parse_graph(text: &str) -> Result<ExecutionGraph, LoadError> {
    let (graph, mut violations) = parse_graph_unchecked(text)?;
    violations.extend(validate_graph(&graph).violations);
    if violations.is_empty() {
        Ok(graph)
    } else {
        Err(LoadError::Invalid(ValidationReport { violations }))
    }
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<ExecutionGraph, LoadError> {
    parse_graph(&fs::read_to_string(path)?)
}

pub fn write_graph<W: Write>(out: &mut W, g: &ExecutionGraph) -> std::io::Result<()> {
    let mut emit = |line: &Line| -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, line)?;
        out.write_all(b"\n")
    };
    emit(&Line::Graph {
        root: 0,
        deterministic: g.is_deterministic(),
    })?;
    for v in g.vertices() {
        emit(&Line::Vertex {
            id: v.0,
            desc: g.description(v).map(str::to_string),
        })?;
    }
    for e in g.edges() {
        let (var, value) = match &e.label {
            EdgeLabel::Data { var, value } => (Some(var.clone()), Some(value.clone())),
            EdgeLabel::Control => (None, None),
        };
        emit(&Line::Edge {
            src: e.src.0,
            dst: e.dst.0,
            kind: e.kind(),
            var,
            value,
        })?;
    }
    Ok(())
}

pub fn graph_to_string(g: &ExecutionGraph) -> String {
    let mut buf = Vec::new();
    write_graph(&mut buf, g).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn save_graph(g: &ExecutionGraph, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, graph_to_string(g))
}
