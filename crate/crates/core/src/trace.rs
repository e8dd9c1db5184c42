//! Execution traces of a small sequential imperative language and their
//! dynamic dependence graphs.
//!
//! Every event becomes a vertex (id = seq). A read of `x` gets a data edge
//! from the latest earlier assignment to `x`, labelled with the value that
//! assignment wrote. Every event gets a control edge from its controlling
//! branch, or from the root for top-level events.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, EdgeLabel, ExecutionGraph, Scalar, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Assign,
    Branch,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond_result: Option<bool>,
    #[serde(default)]
    pub ctrl: u64,
}

impl TraceEvent {
    pub fn assign(seq: u64, var: &str, value: impl Into<Scalar>, uses: &[&str], ctrl: u64) -> Self {
        TraceEvent {
            seq,
            kind: EventKind::Assign,
            var: Some(var.to_string()),
            value: Some(value.into()),
            uses: uses.iter().map(|s| s.to_string()).collect(),
            cond_result: None,
            ctrl,
        }
    }

    pub fn branch(seq: u64, uses: &[&str], cond_result: bool, ctrl: u64) -> Self {
        TraceEvent {
            seq,
            kind: EventKind::Branch,
            var: None,
            value: None,
            uses: uses.iter().map(|s| s.to_string()).collect(),
            cond_result: Some(cond_result),
            ctrl,
        }
    }

    pub fn output(seq: u64, uses: &[&str], ctrl: u64) -> Self {
        TraceEvent {
            seq,
            kind: EventKind::Output,
            var: None,
            value: None,
            uses: uses.iter().map(|s| s.to_string()).collect(),
            cond_result: None,
            ctrl,
        }
    }

    fn describe(&self) -> String {
        let uses = self.uses.join(", ");
        match self.kind {
            EventKind::Assign => {
                let var = self.var.as_deref().unwrap_or("?");
                match &self.value {
                    Some(v) => format!("#{} {var} := {v}", self.seq),
                    None => format!("#{} {var} := ?", self.seq),
                }
            }
            EventKind::Branch => match self.cond_result {
                Some(c) => format!("#{} branch({uses}) -> {c}", self.seq),
                None => format!("#{} branch({uses})", self.seq),
            },
            EventKind::Output => format!("#{} output({uses})", self.seq),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(events: Vec<TraceEvent>) -> Self {
        Trace { events }
    }

    pub fn assign_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Assign)
            .count()
    }

    pub fn event(&self, seq: u64) -> Option<&TraceEvent> {
        self.events
            .binary_search_by_key(&seq, |e| e.seq)
            .ok()
            .map(|i| &self.events[i])
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Reads of never-assigned variables get a data edge from the root
    /// labelled `(var, "undef")` instead of failing.
    pub allow_undef: bool,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("event {seq} reads `{var}` before any assignment")]
    UseBeforeDef { var: String, seq: u64 },
    #[error("event {seq} has a bad control reference to {ctrl}")]
    BadCtrlRef { seq: u64, ctrl: u64 },
    #[error("event seq {seq} is not strictly ascending or not positive")]
    BadSeq { seq: u64 },
    #[error("assign event {seq} lacks a {field}")]
    IncompleteAssign { seq: u64, field: &'static str },
    #[error("trace has no assign events to mutate")]
    NoAssignEvents,
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TraceError {
    /// I/O and parse problems, as opposed to malformed trace content.
    pub fn is_io_or_parse(&self) -> bool {
        matches!(self, TraceError::Parse { .. } | TraceError::Io(_))
    }
}

fn check_events(t: &Trace) -> Result<(), TraceError> {
    let mut kinds: HashMap<u64, EventKind> = HashMap::new();
    let mut last = 0;
    for e in &t.events {
        if e.seq == 0 || e.seq <= last {
            return Err(TraceError::BadSeq { seq: e.seq });
        }
        last = e.seq;
        if e.ctrl != 0 && (e.ctrl >= e.seq || kinds.get(&e.ctrl) != Some(&EventKind::Branch)) {
            return Err(TraceError::BadCtrlRef {
                seq: e.seq,
                ctrl: e.ctrl,
            });
        }
        if e.kind == EventKind::Assign {
            if e.var.is_none() {
                return Err(TraceError::IncompleteAssign { seq: e.seq, field: "var" });
            }
            if e.value.is_none() {
                return Err(TraceError::IncompleteAssign { seq: e.seq, field: "value" });
            }
        }
        kinds.insert(e.seq, e.kind);
    }
    Ok(())
}

pub fn build_graph(t: &Trace, opts: BuildOptions) -> Result<ExecutionGraph, TraceError> {
    check_events(t)?;
    let mut builder = ExecutionGraph::builder().described(0, "start");
    // var -> (seq of latest assign, value written)
    let mut last_write: HashMap<&str, (u64, &Scalar)> = HashMap::new();
    for e in &t.events {
        builder.add_vertex(e.seq, Some(e.describe()));
        let mut seen_uses: Vec<&str> = Vec::new();
        for var in &e.uses {
            if seen_uses.contains(&var.as_str()) {
                continue;
            }
            seen_uses.push(var);
            let edge = match last_write.get(var.as_str()) {
                Some((src, value)) => Edge::new(*src, e.seq, EdgeLabel::data(var.as_str(), (*value).clone())),
                None if opts.allow_undef => {
                    Edge::new(VertexId::ROOT, e.seq, EdgeLabel::data(var.as_str(), "undef"))
                }
                None => {
                    return Err(TraceError::UseBeforeDef {
                        var: var.clone(),
                        seq: e.seq,
                    })
                }
            };
            builder.add_edge(edge);
        }
        builder.add_edge(Edge::new(e.ctrl, e.seq, EdgeLabel::Control));
        if let (EventKind::Assign, Some(var), Some(value)) = (e.kind, &e.var, &e.value) {
            last_write.insert(var, (e.seq, value));
        }
    }
    Ok(builder.build())
}

/// Perturbs one assign value, chosen by `seed`. Sequence numbers are kept so
/// the mutant stays aligned with the original run.
pub fn mutate_trace(t: &Trace, seed: u64) -> Result<(Trace, u64), TraceError> {
    let assigns: Vec<usize> = t
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == EventKind::Assign)
        .map(|(i, _)| i)
        .collect();
    if assigns.is_empty() {
        return Err(TraceError::NoAssignEvents);
    }
    let idx = assigns[(seed % assigns.len() as u64) as usize];
    let mut mutant = t.clone();
    let event = &mut mutant.events[idx];
    let seq = event.seq;
    let value = event
        .value
        .as_mut()
        .ok_or(TraceError::IncompleteAssign { seq, field: "value" })?;
    *value = perturb(value);
    Ok((mutant, seq))
}

fn perturb(v: &Scalar) -> Scalar {
    match v {
        Scalar::Int(i) => Scalar::Int(i.wrapping_add(1)),
        Scalar::Float(x) => Scalar::Float(x + 1.0),
        Scalar::Bool(b) => Scalar::Bool(!b),
        Scalar::Str(s) => Scalar::Str(format!("{s}_X")),
    }
}

pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(line).map_err(|source| TraceError::Parse { line: i + 1, source })?;
        events.push(event);
    }
    Ok(Trace { events })
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let file = fs::File::open(path)?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_trace(&text)
}

pub fn write_trace<W: Write>(out: &mut W, t: &Trace) -> std::io::Result<()> {
    for e in &t.events {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_trace(t: &Trace, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut buf = Vec::new();
    write_trace(&mut buf, t)?;
    fs::write(path, buf)
}
