//! Random generators and brute-force reference implementations shared by the
//! integration tests. Nothing here calls the library's algorithms; it only
//! builds inputs and recomputes answers the slow, obvious way.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use cutloc::cut::{Atom, State};
use cutloc::graph::{Edge, EdgeKey, EdgeKind, EdgeLabel, ExecutionGraph, GraphBuilder, Scalar, VertexId};
use cutloc::trace::{EventKind, Trace, TraceEvent};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const VARS: [&str; 4] = ["x", "y", "z", "w"];

fn random_label(rng: &mut ChaCha8Rng) -> EdgeLabel {
    if rng.random_bool(0.3) {
        EdgeLabel::Control
    } else {
        EdgeLabel::data(VARS[rng.random_range(0..VARS.len())], rng.random_range(0..5i64))
    }
}

/// A rooted DAG with `n` vertices. Ids other than the root are shuffled so
/// that id order differs from topological order.
pub fn random_dag_n(rng: &mut ChaCha8Rng, n: usize) -> ExecutionGraph {
    let mut ids: Vec<u64> = (1..n as u64).collect();
    ids.shuffle(rng);
    ids.insert(0, 0);
    let mut b = GraphBuilder::new();
    for &id in &ids[1..] {
        b.add_vertex(id, Some(format!("op{id}")));
    }
    for i in 1..n {
        let parent = rng.random_range(0..i);
        for j in 0..i {
            if j == parent || rng.random_bool(0.25) {
                b.add_edge(Edge::new(ids[j], ids[i], random_label(rng)));
            }
        }
    }
    b.build()
}

pub fn random_dag(rng: &mut ChaCha8Rng, max_vertices: usize) -> ExecutionGraph {
    let n = rng.random_range(2..=max_vertices);
    random_dag_n(rng, n)
}

/// Arbitrary edges between `n` vertices: may contain cycles, unreachable
/// vertices and self-loops.
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize) -> ExecutionGraph {
    let mut b = GraphBuilder::new();
    for id in 1..n as u64 {
        b.add_vertex(id, None);
    }
    for u in 0..n as u64 {
        for v in 1..n as u64 {
            if rng.random_bool(1.5 / n as f64) {
                b.add_edge(Edge::new(u, v, random_label(rng)));
            }
        }
    }
    b.build()
}

pub fn vertex_list(g: &ExecutionGraph) -> Vec<VertexId> {
    g.vertices().collect()
}

pub fn edge_pairs(g: &ExecutionGraph) -> Vec<(VertexId, VertexId)> {
    g.edges().iter().map(|e| (e.src, e.dst)).collect()
}

/// Every subset of the vertex set, as bit masks over `vertex_list` order.
pub fn all_subsets(g: &ExecutionGraph) -> Vec<BTreeSet<VertexId>> {
    let vs = vertex_list(g);
    (0u32..(1 << vs.len()))
        .map(|mask| {
            vs.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| *v)
                .collect()
        })
        .collect()
}

/// Root-containing, predecessor-closed, proper subset.
pub fn brute_is_downset(g: &ExecutionGraph, w: &BTreeSet<VertexId>) -> bool {
    w.contains(&VertexId(0))
        && w.len() < g.vertex_count()
        && edge_pairs(g)
            .iter()
            .all(|(s, d)| !w.contains(d) || w.contains(s))
}

pub fn brute_downsets(g: &ExecutionGraph) -> Vec<BTreeSet<VertexId>> {
    all_subsets(g)
        .into_iter()
        .filter(|w| brute_is_downset(g, w))
        .collect()
}

/// Keys of the edges leaving `w`, sorted.
pub fn brute_cut_keys(g: &ExecutionGraph, w: &BTreeSet<VertexId>) -> Vec<EdgeKey> {
    let mut keys: Vec<EdgeKey> = g
        .edges()
        .iter()
        .filter(|e| w.contains(&e.src) && !w.contains(&e.dst))
        .map(|e| e.key())
        .collect();
    keys.sort();
    keys
}

/// Longest root path length to each vertex, by enumerating every path.
pub fn brute_levels(g: &ExecutionGraph) -> BTreeMap<VertexId, usize> {
    fn walk(g: &ExecutionGraph, v: VertexId, depth: usize, best: &mut BTreeMap<VertexId, usize>) {
        let e = best.entry(v).or_insert(0);
        *e = (*e).max(depth);
        for (s, d) in edge_pairs(g) {
            if s == v {
                walk(g, d, depth + 1, best);
            }
        }
    }
    let mut best = BTreeMap::new();
    walk(g, VertexId(0), 0, &mut best);
    best
}

/// Vertices reachable from `start` following edges forwards.
pub fn brute_reach(g: &ExecutionGraph, start: VertexId, forwards: bool) -> BTreeSet<VertexId> {
    let pairs = edge_pairs(g);
    let mut seen = BTreeSet::from([start]);
    loop {
        let before = seen.len();
        for &(s, d) in &pairs {
            let (from, to) = if forwards { (s, d) } else { (d, s) };
            if seen.contains(&from) {
                seen.insert(to);
            }
        }
        if seen.len() == before {
            return seen;
        }
    }
}

/// Whether some vertex reaches itself through at least one edge.
pub fn brute_has_cycle(g: &ExecutionGraph) -> bool {
    let pairs = edge_pairs(g);
    vertex_list(g).into_iter().any(|v| {
        pairs
            .iter()
            .filter(|(s, _)| *s == v)
            .any(|(_, d)| brute_reach(g, *d, true).contains(&v))
    })
}

/// Random well-formed trace with `len` events over a handful of variables.
/// Values mix integers, floats, booleans and strings.
pub fn random_trace(rng: &mut ChaCha8Rng, len: usize) -> Trace {
    let names = ["a", "b", "c", "d", "e"];
    let mut defined: Vec<&str> = Vec::new();
    let mut branches: Vec<u64> = Vec::new();
    let mut events = Vec::new();
    for seq in 1..=len as u64 {
        let ctrl = if !branches.is_empty() && rng.random_bool(0.4) {
            branches[rng.random_range(0..branches.len())]
        } else {
            0
        };
        let mut uses: Vec<&str> = Vec::new();
        if !defined.is_empty() {
            for _ in 0..rng.random_range(0..=2) {
                uses.push(defined[rng.random_range(0..defined.len())]);
            }
        }
        let roll = rng.random_range(0..10);
        let event = if defined.is_empty() || roll < 6 {
            let var = names[rng.random_range(0..names.len())];
            let value: Scalar = match rng.random_range(0..10) {
                0 => Scalar::Float(rng.random_range(0..100) as f64 / 4.0),
                1 => Scalar::Bool(rng.random_bool(0.5)),
                2 => Scalar::Str(format!("s{}", rng.random_range(0..10))),
                _ => Scalar::Int(rng.random_range(-50..50)),
            };
            if !defined.contains(&var) {
                defined.push(var);
            }
            TraceEvent::assign(seq, var, value, &uses, ctrl)
        } else if roll < 8 {
            branches.push(seq);
            TraceEvent::branch(seq, &uses, rng.random_bool(0.5), ctrl)
        } else {
            TraceEvent::output(seq, &uses, ctrl)
        };
        events.push(event);
    }
    Trace::new(events)
}

pub type EdgeTuple = (u64, u64, EdgeKind, String, Option<Scalar>);

/// Expected edges of a trace's graph as `(src, dst, kind, var, value)`,
/// found by scanning backwards for the last write of each read variable.
pub fn brute_trace_edges(t: &Trace) -> HashSet<EdgeTuple> {
    let mut out = HashSet::new();
    for (i, e) in t.events.iter().enumerate() {
        out.insert((e.ctrl, e.seq, EdgeKind::Control, String::new(), None));
        for var in &e.uses {
            let writer = t.events[..i]
                .iter()
                .rev()
                .find(|w| w.kind == EventKind::Assign && w.var.as_deref() == Some(var.as_str()))
                .expect("generator only reads defined variables");
            out.insert((writer.seq, e.seq, EdgeKind::Data, var.clone(), writer.value.clone()));
        }
    }
    out
}

pub fn graph_edge_tuples(g: &ExecutionGraph) -> HashSet<EdgeTuple> {
    g.edges()
        .iter()
        .map(|e| match &e.label {
            EdgeLabel::Data { var, value } => (e.src.0, e.dst.0, EdgeKind::Data, var.clone(), Some(value.clone())),
            EdgeLabel::Control => (e.src.0, e.dst.0, EdgeKind::Control, String::new(), None),
        })
        .collect()
}

/// Boolean/integer expression trees rendered to predicate text and
/// evaluated here independently of the library's evaluator.
#[derive(Debug, Clone)]
pub enum TExpr {
    Lit(i64),
    Var(&'static str),
    Add(Box<TExpr>, Box<TExpr>),
    Sub(Box<TExpr>, Box<TExpr>),
    Mul(Box<TExpr>, Box<TExpr>),
    Cmp(&'static str, Box<TExpr>, Box<TExpr>),
    And(Box<TExpr>, Box<TExpr>),
    Or(Box<TExpr>, Box<TExpr>),
    Not(Box<TExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TVal {
    I(i64),
    B(bool),
}

fn random_arith(rng: &mut ChaCha8Rng, depth: u32) -> TExpr {
    if depth == 0 || rng.random_bool(0.4) {
        return if rng.random_bool(0.5) {
            TExpr::Lit(rng.random_range(-3..12))
        } else {
            TExpr::Var(VARS[rng.random_range(0..VARS.len())])
        };
    }
    let (a, b) = (Box::new(random_arith(rng, depth - 1)), Box::new(random_arith(rng, depth - 1)));
    match rng.random_range(0..3) {
        0 => TExpr::Add(a, b),
        1 => TExpr::Sub(a, b),
        _ => TExpr::Mul(a, b),
    }
}

pub fn random_bool_expr(rng: &mut ChaCha8Rng, depth: u32) -> TExpr {
    if depth == 0 || rng.random_bool(0.5) {
        let ops = ["=", "!=", "<", "<=", ">", ">="];
        let op = ops[rng.random_range(0..ops.len())];
        return TExpr::Cmp(op, Box::new(random_arith(rng, 2)), Box::new(random_arith(rng, 2)));
    }
    match rng.random_range(0..3) {
        0 => TExpr::And(Box::new(random_bool_expr(rng, depth - 1)), Box::new(random_bool_expr(rng, depth - 1))),
        1 => TExpr::Or(Box::new(random_bool_expr(rng, depth - 1)), Box::new(random_bool_expr(rng, depth - 1))),
        _ => TExpr::Not(Box::new(random_bool_expr(rng, depth - 1))),
    }
}

impl TExpr {
    pub fn render(&self) -> String {
        match self {
            TExpr::Lit(n) if *n < 0 => format!("(0 - {})", -n),
            TExpr::Lit(n) => n.to_string(),
            TExpr::Var(v) => v.to_string(),
            TExpr::Add(a, b) => format!("({} + {})", a.render(), b.render()),
            TExpr::Sub(a, b) => format!("({} - {})", a.render(), b.render()),
            TExpr::Mul(a, b) => format!("({} * {})", a.render(), b.render()),
            TExpr::Cmp(op, a, b) => format!("({} {op} {})", a.render(), b.render()),
            TExpr::And(a, b) => format!("({} and {})", a.render(), b.render()),
            TExpr::Or(a, b) => format!("({} or {})", a.render(), b.render()),
            TExpr::Not(a) => format!("not {}", a.render()),
        }
    }

    /// `None` when a variable is unbound or arithmetic overflows.
    pub fn eval(&self, env: &BTreeMap<String, i64>) -> Option<TVal> {
        let int = |e: &TExpr| match e.eval(env)? {
            TVal::I(n) => Some(n),
            TVal::B(_) => None,
        };
        let boolean = |e: &TExpr| match e.eval(env)? {
            TVal::B(b) => Some(b),
            TVal::I(_) => None,
        };
        Some(match self {
            TExpr::Lit(n) => TVal::I(*n),
            TExpr::Var(v) => TVal::I(*env.get(*v)?),
            TExpr::Add(a, b) => TVal::I(int(a)?.checked_add(int(b)?)?),
            TExpr::Sub(a, b) => TVal::I(int(a)?.checked_sub(int(b)?)?),
            TExpr::Mul(a, b) => TVal::I(int(a)?.checked_mul(int(b)?)?),
            TExpr::Cmp(op, a, b) => {
                let (x, y) = (int(a)?, int(b)?);
                TVal::B(match *op {
                    "=" => x == y,
                    "!=" => x != y,
                    "<" => x < y,
                    "<=" => x <= y,
                    ">" => x > y,
                    _ => x >= y,
                })
            }
            TExpr::And(a, b) => {
                let (x, y) = (boolean(a)?, boolean(b)?);
                TVal::B(x && y)
            }
            TExpr::Or(a, b) => {
                let (x, y) = (boolean(a)?, boolean(b)?);
                TVal::B(x || y)
            }
            TExpr::Not(a) => TVal::B(!boolean(a)?),
        })
    }

    /// Violated means the expression evaluates to false.
    pub fn violated(&self, env: &BTreeMap<String, i64>) -> bool {
        self.eval(env) == Some(TVal::B(false))
    }
}

/// Random state of up to `max` atoms with integer data labels; distinct
/// edges, possibly several binding the same variable.
pub fn random_int_state(rng: &mut ChaCha8Rng, max: usize) -> State {
    let n = rng.random_range(1..=max);
    let mut atoms = Vec::new();
    let mut used = BTreeSet::new();
    // one vertex writes a variable once, so every atom from it carries the same value
    let mut written: BTreeMap<(u64, &str), i64> = BTreeMap::new();
    while atoms.len() < n {
        let src = rng.random_range(0..12u64);
        let dst = rng.random_range(12..16u64);
        if rng.random_bool(0.15) {
            if used.insert((src, dst, String::new())) {
                atoms.push(Atom {
                    edge_key: EdgeKey::control(src, dst),
                    label: EdgeLabel::Control,
                });
            }
            continue;
        }
        let var = VARS[rng.random_range(0..VARS.len())];
        if used.insert((src, dst, var.to_string())) {
            let value = *written.entry((src, var)).or_insert_with(|| rng.random_range(-4..12i64));
            atoms.push(Atom {
                edge_key: EdgeKey::data(src, dst, var),
                label: EdgeLabel::data(var, value),
            });
        }
    }
    State::from_atoms(atoms)
}

/// Variable environment of an atom list: a variable bound by several atoms
/// takes the value from the one with the greatest source id.
pub fn brute_env(atoms: &[Atom]) -> BTreeMap<String, i64> {
    let mut best: BTreeMap<String, (u64, i64)> = BTreeMap::new();
    for a in atoms {
        if let EdgeLabel::Data { var, value: Scalar::Int(n) } = &a.label {
            let src = a.edge_key.src.0;
            if best.get(var).is_none_or(|(s, _)| src > *s) {
                best.insert(var.clone(), (src, *n));
            }
        }
    }
    best.into_iter().map(|(k, (_, v))| (k, v)).collect()
}

/// Atoms whose individual removal leaves no predicate violated.
pub fn brute_minimize(atoms: &[Atom], preds: &[TExpr]) -> Vec<Atom> {
    (0..atoms.len())
        .filter(|&i| {
            let mut rest = atoms.to_vec();
            rest.remove(i);
            let env = brute_env(&rest);
            preds.iter().all(|p| !p.violated(&env))
        })
        .map(|i| atoms[i].clone())
        .collect()
}

pub fn ceil_log2(m: usize) -> usize {
    let mut k = 0;
    while (1usize << k) < m {
        k += 1;
    }
    k
}
