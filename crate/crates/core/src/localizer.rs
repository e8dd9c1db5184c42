//! Fault localization by binary search over cut-sets.
//!
//! A session keeps a clean lower bound `C_c` (initially the root cut) and an
//! anomalous upper bound `C_e` (derived from the initial anomaly). Each round
//! picks a cut strictly between the two, asks the oracle to judge its state,
//! and moves whichever bound the answer allows. When at most one vertex is
//! left between the bounds the culprit is classified:
//!
//! * `C_c = C_e`: an operation is missing at that point.
//! * an edge of `C_e − C_c` carries a local anomaly: its source vertex is
//!   faulty.
//! * otherwise `C_e` violates a global property, and the atoms whose removal
//!   makes the violation disappear point at missing critical sections.
//!
//! The session is a plain state machine ([`LocalizerSession`]) so that an
//! interactive judge can answer asynchronously; [`localize`] drives it to
//! completion with an [`Oracle`].

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cut::{
    bisect, compare, cut_edges, cut_from_downset, root_cut, state_of, vertices_between, Atom, Cut,
    CutError, DownsetRecord, State,
};
use crate::graph::{ancestors, EdgeKey, ExecutionGraph, GraphError, VertexId};
use crate::oracle::{
    EdgeVerdict, GlobalVerdict, Oracle, OracleError, ScriptedOracle, StateVerdict, VerdictMismatch,
};
use crate::predicate::{eval_predicate, GlobalPredicate};

/// What the programmer noticed first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialAnomaly {
    /// A single edge is wrong (data) or should not exist (control).
    Edge { key: EdgeKey, verdict: EdgeVerdict },
    /// The state on the given cut violates the named predicates.
    Global {
        downset: BTreeSet<VertexId>,
        predicates: Vec<String>,
    },
}

impl InitialAnomaly {
    /// An edge anomaly with the verdict implied by the edge kind.
    pub fn edge(key: EdgeKey) -> Self {
        let verdict = EdgeVerdict::anomaly_for(key.kind);
        InitialAnomaly::Edge { key, verdict }
    }

    pub fn global(downset: impl IntoIterator<Item = VertexId>, predicates: &[&str]) -> Self {
        InitialAnomaly::Global {
            downset: downset.into_iter().collect(),
            predicates: predicates.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed anomaly `{0}` (expected edge:<src,dst,kind[,var]> or global:<ids>:<predicate ids>)")]
pub struct AnomalyParseError(pub String);

impl FromStr for InitialAnomaly {
    type Err = AnomalyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AnomalyParseError(s.to_string());
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("edge:") {
            let key: EdgeKey = rest.parse().map_err(|_| bad())?;
            return Ok(InitialAnomaly::edge(key));
        }
        if let Some(rest) = s.strip_prefix("global:") {
            let (ids, preds) = rest.split_once(':').unwrap_or((rest, ""));
            let downset = ids
                .split(',')
                .map(|t| t.trim().trim_start_matches('v').parse::<u64>().map(VertexId))
                .collect::<Result<BTreeSet<_>, _>>()
                .map_err(|_| bad())?;
            let predicates = preds
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(str::to_string)
                .collect();
            return Ok(InitialAnomaly::Global {
                downset,
                predicates,
            });
        }
        Err(bad())
    }
}

impl fmt::Display for InitialAnomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialAnomaly::Edge { key, .. } => write!(f, "edge:{key}"),
            InitialAnomaly::Global {
                downset,
                predicates,
            } => {
                let ids: Vec<String> = downset.iter().map(|v| v.0.to_string()).collect();
                write!(f, "global:{}:{}", ids.join(","), predicates.join(","))
            }
        }
    }
}

/// Terminal outcome of a localization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalizationResult {
    /// The bounds coincide: an indispensable operation is missing at `at`.
    MissingOperation { at: DownsetRecord },
    /// Source vertices of the locally anomalous edges in `C_e − C_c`.
    FaultyVertices {
        vertices: Vec<VertexId>,
        evidence: Vec<EdgeKey>,
    },
    /// The necessary atoms of a globally violated state and their sources.
    MissingCriticalSections {
        atoms: Vec<Atom>,
        vertices: Vec<VertexId>,
    },
}

impl LocalizationResult {
    pub fn kind(&self) -> &'static str {
        match self {
            LocalizationResult::MissingOperation { .. } => "MissingOperation",
            LocalizationResult::FaultyVertices { .. } => "FaultyVertices",
            LocalizationResult::MissingCriticalSections { .. } => "MissingCriticalSections",
        }
    }

    /// Culprit vertices; for a missing operation, none.
    pub fn culprits(&self) -> &[VertexId] {
        match self {
            LocalizationResult::MissingOperation { .. } => &[],
            LocalizationResult::FaultyVertices { vertices, .. }
            | LocalizationResult::MissingCriticalSections { vertices, .. } => vertices,
        }
    }
}

/// The atoms whose removal makes every listed violation disappear.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CulpritSet {
    pub atoms: Vec<Atom>,
}

impl CulpritSet {
    pub fn source_vertices(&self) -> Vec<VertexId> {
        let set: BTreeSet<VertexId> = self.atoms.iter().map(|a| a.edge_key.src).collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocalizeError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error("anomalous edge {0} is not in the graph")]
    UnknownEdge(EdgeKey),
    #[error("initial edge verdict must be an anomaly that fits edge {0}")]
    BadInitialVerdict(EdgeKey),
    #[error("session is finished")]
    NotAwaiting,
    #[error("verdict does not match the pending state: {0}")]
    VerdictMismatch(#[from] VerdictMismatch),
    #[error("initial anomaly not confirmed: no anomaly found in the state at the upper bound")]
    AnomalyNotConfirmed,
    #[error("{0} vertices remain between the bounds; classification needs at most one")]
    BoundsNotAdjacent(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Default)]
pub struct LocalizerConfig {
    /// Definitions of global predicates, used to minimise the atom set when
    /// the terminal verdict is a global violation.
    pub predicates: Vec<GlobalPredicate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryPurpose {
    /// A bisection probe strictly between the bounds.
    Bisect,
    /// One extra look at the upper bound, whose state was never judged.
    ConfirmUpper,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    AwaitingVerdict { cut: Cut, purpose: QueryPurpose },
    Finished(LocalizationResult),
}

/// One oracle examination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub step: usize,
    pub cut: DownsetRecord,
    pub verdict: StateVerdict,
}

pub fn init_bounds(g: &ExecutionGraph, anomaly: &InitialAnomaly) -> Result<(Cut, Cut), LocalizeError> {
    let lower = root_cut(g)?;
    let upper = match anomaly {
        InitialAnomaly::Edge { key, verdict } => {
            let edge = g.edge(key).ok_or_else(|| LocalizeError::UnknownEdge(key.clone()))?;
            if !verdict.is_anomaly() || !verdict.fits(key.kind) {
                return Err(LocalizeError::BadInitialVerdict(key.clone()));
            }
            cut_from_downset(g, ancestors(g, edge.src)?)?
        }
        InitialAnomaly::Global { downset, .. } => cut_from_downset(g, downset.iter().copied())?,
    };
    debug_assert!(compare(&lower, &upper).is_ok_and(|o| o.is_le()));
    Ok((lower, upper))
}

/// Keeps every atom `a` for which no listed predicate is violated on the
/// state without `a`.
pub fn minimize_atoms(state: &State, predicates: &[GlobalPredicate]) -> CulpritSet {
    let atoms = state
        .atoms()
        .iter()
        .filter(|atom| {
            let reduced = state.without(&atom.edge_key);
            !predicates
                .iter()
                .any(|p| eval_predicate(p, &reduced).is_violated())
        })
        .cloned()
        .collect();
    CulpritSet { atoms }
}

/// Classifies the culprit once the bounds are adjacent or equal.
///
/// `predicates` are the definitions available for the ids named by a global
/// violation. When none of those ids can be resolved the minimisation cannot
/// be evaluated, and every atom of `C_e` is reported.
pub fn classify_terminal(
    g: &ExecutionGraph,
    lower: &Cut,
    upper: &Cut,
    verdict_at_upper: &StateVerdict,
    predicates: &[GlobalPredicate],
) -> Result<LocalizationResult, LocalizeError> {
    let between = vertices_between(lower, upper)?;
    if between.len() > 1 {
        return Err(LocalizeError::BoundsNotAdjacent(between.len()));
    }
    if between.is_empty() {
        return Ok(LocalizationResult::MissingOperation {
            at: lower.record(),
        });
    }

    let lower_keys: BTreeSet<EdgeKey> = cut_edges(g, lower)?.iter().map(|e| e.key()).collect();
    let fresh: BTreeSet<EdgeKey> = cut_edges(g, upper)?
        .iter()
        .map(|e| e.key())
        .filter(|k| !lower_keys.contains(k))
        .collect();

    let local: Vec<EdgeKey> = verdict_at_upper
        .anomalous_edges()
        .filter(|k| fresh.contains(*k))
        .cloned()
        .collect();
    if !local.is_empty() {
        return Ok(faulty(local));
    }

    if let GlobalVerdict::Violated(ids) = &verdict_at_upper.global {
        let state = state_of(g, upper)?;
        let resolved: Vec<GlobalPredicate> = predicates
            .iter()
            .filter(|p| ids.is_empty() || ids.contains(&p.id))
            .filter(|p| eval_predicate(p, &state).is_violated())
            .cloned()
            .collect();
        let culprits = if resolved.is_empty() {
            CulpritSet {
                atoms: state.atoms().to_vec(),
            }
        } else {
            minimize_atoms(&state, &resolved)
        };
        return Ok(LocalizationResult::MissingCriticalSections {
            vertices: culprits.source_vertices(),
            atoms: culprits.atoms,
        });
    }

    // Anomalies outside C_e − C_c only arise from an inconsistent judge.
    let elsewhere: Vec<EdgeKey> = verdict_at_upper.anomalous_edges().cloned().collect();
    if !elsewhere.is_empty() {
        return Ok(faulty(elsewhere));
    }
    Err(LocalizeError::AnomalyNotConfirmed)
}

fn faulty(evidence: Vec<EdgeKey>) -> LocalizationResult {
    let vertices: BTreeSet<VertexId> = evidence.iter().map(|k| k.src).collect();
    LocalizationResult::FaultyVertices {
        vertices: vertices.into_iter().collect(),
        evidence,
    }
}

/// A resumable localization.
#[derive(Debug, Clone)]
pub struct LocalizerSession {
    graph: Arc<ExecutionGraph>,
    anomaly: InitialAnomaly,
    predicates: Vec<GlobalPredicate>,
    lower: Cut,
    upper: Cut,
    upper_verdict: Option<StateVerdict>,
    phase: Phase,
    transcript: Vec<TranscriptStep>,
}

impl LocalizerSession {
    pub fn start(
        graph: Arc<ExecutionGraph>,
        anomaly: InitialAnomaly,
        config: LocalizerConfig,
    ) -> Result<Self, LocalizeError> {
        graph.ensure_valid()?;
        let (lower, upper) = init_bounds(&graph, &anomaly)?;
        let upper_verdict = match &anomaly {
            InitialAnomaly::Edge { key, verdict } => Some(StateVerdict {
                per_edge: [(key.clone(), *verdict)].into(),
                global: GlobalVerdict::Ok,
            }),
            InitialAnomaly::Global { .. } => None,
        };
        let mut session = LocalizerSession {
            graph,
            anomaly,
            predicates: config.predicates,
            phase: Phase::AwaitingVerdict {
                cut: lower.clone(),
                purpose: QueryPurpose::Bisect,
            },
            lower,
            upper,
            upper_verdict,
            transcript: Vec::new(),
        };
        session.advance()?;
        Ok(session)
    }

    fn advance(&mut self) -> Result<(), LocalizeError> {
        let g = &self.graph;
        self.phase = match bisect(g, &self.lower, &self.upper)? {
            Some(cut) => Phase::AwaitingVerdict {
                cut,
                purpose: QueryPurpose::Bisect,
            },
            None if self.lower == self.upper => Phase::Finished(LocalizationResult::MissingOperation {
                at: self.lower.record(),
            }),
            None => match &self.upper_verdict {
                Some(verdict) => Phase::Finished(classify_terminal(
                    g,
                    &self.lower,
                    &self.upper,
                    verdict,
                    &self.predicates,
                )?),
                None => Phase::AwaitingVerdict {
                    cut: self.upper.clone(),
                    purpose: QueryPurpose::ConfirmUpper,
                },
            },
        };
        Ok(())
    }

    /// Applies the judge's verdict on the pending state.
    ///
    /// A rejected verdict leaves the session unchanged.
    pub fn feed_verdict(&mut self, verdict: StateVerdict) -> Result<&Phase, LocalizeError> {
        let (cut, purpose) = match &self.phase {
            Phase::AwaitingVerdict { cut, purpose } => (cut.clone(), *purpose),
            Phase::Finished(_) => return Err(LocalizeError::NotAwaiting),
        };
        let state = state_of(&self.graph, &cut)?;
        verdict.check_against(&state)?;

        match purpose {
            QueryPurpose::Bisect => {
                if verdict.has_anomaly() {
                    self.upper = cut.clone();
                    self.upper_verdict = Some(verdict.clone());
                } else {
                    self.lower = cut.clone();
                }
            }
            QueryPurpose::ConfirmUpper => {
                // Classify first so an unconfirmed anomaly can be re-answered.
                classify_terminal(&self.graph, &self.lower, &self.upper, &verdict, &self.predicates)?;
                self.upper_verdict = Some(verdict.clone());
            }
        }
        self.transcript.push(TranscriptStep {
            step: self.transcript.len() + 1,
            cut: cut.record(),
            verdict,
        });
        self.advance()?;
        Ok(&self.phase)
    }

    pub fn graph(&self) -> &Arc<ExecutionGraph> {
        &self.graph
    }

    pub fn anomaly(&self) -> &InitialAnomaly {
        &self.anomaly
    }

    pub fn lower(&self) -> &Cut {
        &self.lower
    }

    pub fn upper(&self) -> &Cut {
        &self.upper
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn pending(&self) -> Option<&Cut> {
        match &self.phase {
            Phase::AwaitingVerdict { cut, .. } => Some(cut),
            Phase::Finished(_) => None,
        }
    }

    pub fn pending_state(&self) -> Option<State> {
        self.pending()
            .map(|c| state_of(&self.graph, c).expect("pending cut belongs to the session graph"))
    }

    pub fn result(&self) -> Option<&LocalizationResult> {
        match &self.phase {
            Phase::Finished(r) => Some(r),
            Phase::AwaitingVerdict { .. } => None,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.result().is_some()
    }

    /// `|C_e − C_c|` in vertices.
    pub fn between_count(&self) -> usize {
        self.upper.downset().len() - self.lower.downset().len()
    }

    pub fn transcript(&self) -> &[TranscriptStep] {
        &self.transcript
    }
}

/// A finished run: result plus every examination that led to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Localization {
    pub result: LocalizationResult,
    pub transcript: Vec<TranscriptStep>,
}

impl Localization {
    pub fn oracle_calls(&self) -> usize {
        self.transcript.len()
    }

    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_transcript(out, &self.transcript, &self.result)
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// An oracle that answers exactly as this run's transcript did.
    pub fn replay_oracle(&self) -> ScriptedOracle {
        ScriptedOracle::from_pairs(self.transcript.iter().map(|s| (s.cut.clone(), s.verdict.clone())))
    }
}

#[derive(Serialize)]
struct ResultLine<'a> {
    result: &'a LocalizationResult,
}

pub fn write_transcript<W: Write>(
    out: &mut W,
    steps: &[TranscriptStep],
    result: &LocalizationResult,
) -> io::Result<()> {
    for step in steps {
        serde_json::to_writer(&mut *out, step)?;
        out.write_all(b"\n")?;
    }
    serde_json::to_writer(&mut *out, &ResultLine { result })?;
    out.write_all(b"\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{error} (after {} examinations)", transcript.len())]
pub struct LocalizeFailure {
    pub error: LocalizeError,
    pub transcript: Vec<TranscriptStep>,
}

/// Runs a session to completion against `oracle`.
///
/// Predicates exposed by the oracle are added to those in `config`. Each probe
/// at least halves the vertices between the bounds, so a run makes at most
/// `⌈log2 m⌉` probes for `m` initial vertices between them, plus one look at
/// the upper bound when its state was never judged.
pub fn localize(
    graph: Arc<ExecutionGraph>,
    anomaly: InitialAnomaly,
    oracle: &mut dyn Oracle,
    mut config: LocalizerConfig,
) -> Result<Localization, LocalizeFailure> {
    for p in oracle.predicates() {
        if !config.predicates.iter().any(|q| q.id == p.id) {
            config.predicates.push(p.clone());
        }
    }
    let fail = |error, transcript: &[TranscriptStep]| LocalizeFailure {
        error,
        transcript: transcript.to_vec(),
    };
    let mut session =
        LocalizerSession::start(graph, anomaly, config).map_err(|e| fail(e, &[]))?;
    loop {
        let cut = match session.phase() {
            Phase::Finished(result) => {
                return Ok(Localization {
                    result: result.clone(),
                    transcript: session.transcript,
                })
            }
            Phase::AwaitingVerdict { cut, .. } => cut.clone(),
        };
        let state = state_of(&session.graph, &cut).map_err(|e| fail(e.into(), &session.transcript))?;
        let verdict = oracle
            .examine(&session.graph, &cut, &state)
            .map_err(|e| fail(e.into(), &session.transcript))?;
        if let Err(e) = session.feed_verdict(verdict).map(|_| ()) {
            return Err(fail(e, &session.transcript));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{chain4, diamond};
    use crate::graph::EdgeLabel;
    use crate::oracle::{differential_oracle, scripted_oracle};
    use std::collections::BTreeMap;

    fn ids(v: &[u64]) -> BTreeSet<VertexId> {
        v.iter().map(|&i| VertexId(i)).collect()
    }

    fn cut(g: &ExecutionGraph, v: &[u64]) -> Cut {
        cut_from_downset(g, ids(v)).unwrap()
    }

    fn start(g: ExecutionGraph, anomaly: InitialAnomaly) -> LocalizerSession {
        LocalizerSession::start(Arc::new(g), anomaly, LocalizerConfig::default()).unwrap()
    }

    #[test]
    fn bounds() {
        let g = chain4();
        let (lo, hi) = init_bounds(&g, &InitialAnomaly::edge(EdgeKey::data(2, 3, "x"))).unwrap();
        assert_eq!(lo.downset(), &ids(&[0]));
        assert_eq!(hi.downset(), &ids(&[0, 1, 2]));
        let (lo, hi) = init_bounds(&g, &InitialAnomaly::edge(EdgeKey::control(0, 1))).unwrap();
        assert_eq!(lo, hi);

        let d = diamond();
        let (lo, hi) = init_bounds(&d, &InitialAnomaly::global(ids(&[0, 1, 2]), &[])).unwrap();
        assert_eq!(lo.downset(), &ids(&[0]));
        assert_eq!(hi.downset(), &ids(&[0, 1, 2]));

        assert!(matches!(
            init_bounds(&d, &InitialAnomaly::global(ids(&[0, 3]), &[])),
            Err(LocalizeError::Cut(CutError::NotPredecessorClosed { .. }))
        ));
        assert_eq!(
            init_bounds(&g, &InitialAnomaly::edge(EdgeKey::data(2, 3, "y"))),
            Err(LocalizeError::UnknownEdge(EdgeKey::data(2, 3, "y")))
        );
        let wrong = InitialAnomaly::Edge {
            key: EdgeKey::data(2, 3, "x"),
            verdict: EdgeVerdict::ControlAnomaly,
        };
        assert!(matches!(
            init_bounds(&g, &wrong),
            Err(LocalizeError::BadInitialVerdict(_))
        ));
    }

    #[test]
    fn start_phases() {
        let s = start(chain4(), InitialAnomaly::edge(EdgeKey::data(2, 3, "x")));
        assert_eq!(s.pending(), Some(&cut(&chain4(), &[0, 1])));

        let s = start(chain4(), InitialAnomaly::edge(EdgeKey::data(1, 2, "x")));
        assert_eq!(
            s.result(),
            Some(&LocalizationResult::FaultyVertices {
                vertices: vec![VertexId(1)],
                evidence: vec![EdgeKey::data(1, 2, "x")]
            })
        );

        let s = start(chain4(), InitialAnomaly::edge(EdgeKey::control(0, 1)));
        assert_eq!(
            s.result(),
            Some(&LocalizationResult::MissingOperation {
                at: DownsetRecord {
                    downset: vec![VertexId(0)]
                }
            })
        );
    }

    #[test]
    fn feeding_moves_bounds() {
        let g = chain4();
        let mut s = start(g.clone(), InitialAnomaly::edge(EdgeKey::data(2, 3, "x")));
        let state = s.pending_state().unwrap();
        s.feed_verdict(StateVerdict::all_ok(&state)).unwrap();
        assert_eq!(s.lower(), &cut(&g, &[0, 1]));
        assert_eq!(
            s.result(),
            Some(&LocalizationResult::FaultyVertices {
                vertices: vec![VertexId(2)],
                evidence: vec![EdgeKey::data(2, 3, "x")]
            })
        );
        assert_eq!(s.feed_verdict(StateVerdict::all_ok(&state)), Err(LocalizeError::NotAwaiting));

        let mut s = start(g.clone(), InitialAnomaly::edge(EdgeKey::data(2, 3, "x")));
        let mut v = StateVerdict::all_ok(&state);
        v.per_edge.insert(EdgeKey::data(1, 2, "x"), EdgeVerdict::DataAnomaly);
        s.feed_verdict(v).unwrap();
        assert_eq!(s.upper(), &cut(&g, &[0, 1]));
        assert_eq!(s.lower(), &cut(&g, &[0]));
        assert_eq!(s.result().unwrap().culprits(), &[VertexId(1)]);
    }

    #[test]
    fn wrong_verdict_is_rejected() {
        let mut s = start(chain4(), InitialAnomaly::edge(EdgeKey::data(2, 3, "x")));
        let mut v = StateVerdict::default();
        v.per_edge.insert(EdgeKey::data(2, 3, "x"), EdgeVerdict::Ok);
        assert!(matches!(
            s.feed_verdict(v),
            Err(LocalizeError::VerdictMismatch(_))
        ));
        assert!(s.transcript().is_empty());
        assert!(s.pending().is_some());
    }

    #[test]
    fn terminal_classification() {
        let g = chain4();
        let root = cut(&g, &[0]);
        assert_eq!(
            classify_terminal(&g, &root, &root, &StateVerdict::default(), &[]).unwrap(),
            LocalizationResult::MissingOperation { at: root.record() }
        );

        let mut v = StateVerdict::default();
        v.per_edge.insert(EdgeKey::data(2, 3, "x"), EdgeVerdict::DataAnomaly);
        assert_eq!(
            classify_terminal(&g, &cut(&g, &[0, 1]), &cut(&g, &[0, 1, 2]), &v, &[])
                .unwrap()
                .culprits(),
            &[VertexId(2)]
        );
        assert_eq!(
            classify_terminal(&g, &root, &cut(&g, &[0, 1, 2]), &v, &[]),
            Err(LocalizeError::BoundsNotAdjacent(2))
        );

        let d = diamond();
        let p = GlobalPredicate::new("p0", "x + y = 10").unwrap();
        let v = StateVerdict {
            per_edge: BTreeMap::new(),
            global: GlobalVerdict::Violated(vec!["p0".into()]),
        };
        let r = classify_terminal(&d, &cut(&d, &[0, 1]), &cut(&d, &[0, 1, 2]), &v, &[p]).unwrap();
        assert_eq!(r.kind(), "MissingCriticalSections");
        assert_eq!(r.culprits(), &[VertexId(1), VertexId(2)]);

        assert_eq!(
            classify_terminal(&g, &cut(&g, &[0, 1]), &cut(&g, &[0, 1, 2]), &StateVerdict::default(), &[]),
            Err(LocalizeError::AnomalyNotConfirmed)
        );
    }

    fn data_state(binds: &[(&str, i64)]) -> State {
        State::from_atoms(binds.iter().enumerate().map(|(i, (var, x))| Atom {
            edge_key: EdgeKey::data(i as u64 + 1, 10, var),
            label: EdgeLabel::data(*var, *x),
        }))
    }

    #[test]
    fn minimization_examples() {
        let p = |s: &str| vec![GlobalPredicate::new("p0", s).unwrap()];
        let vars = |m: CulpritSet| -> Vec<String> {
            m.atoms
                .iter()
                .map(|a| a.label.var().unwrap().to_string())
                .collect()
        };

        let s = data_state(&[("x", 3), ("y", 4), ("z", 9)]);
        assert_eq!(vars(minimize_atoms(&s, &p("x + y = 10"))), vec!["x", "y"]);

        let s = data_state(&[("x", 2)]);
        assert_eq!(vars(minimize_atoms(&s, &p("x = 1"))), vec!["x"]);

        let s = data_state(&[("x", 2), ("y", 2)]);
        assert_eq!(vars(minimize_atoms(&s, &p("x = 1 or y = 1"))), vec!["x", "y"]);
    }

    #[test]
    fn global_start_confirms_upper_bound() {
        // DIAMOND: c has in-edges x from a and y from b.
        let d = diamond();
        let graph = Arc::new(d.clone());
        let anomaly = InitialAnomaly::global(ids(&[0, 1, 2]), &["p0"]);
        let config = LocalizerConfig {
            predicates: vec![GlobalPredicate::new("p0", "x + y = 10").unwrap()],
        };
        let mut s = LocalizerSession::start(graph, anomaly, config).unwrap();
        // Probe {v0,a}: fine.
        assert_eq!(s.pending(), Some(&cut(&d, &[0, 1])));
        s.feed_verdict(StateVerdict::all_ok(&s.pending_state().unwrap())).unwrap();
        // Upper bound is now probed once.
        match s.phase() {
            Phase::AwaitingVerdict { cut: c, purpose } => {
                assert_eq!(c, &cut(&d, &[0, 1, 2]));
                assert_eq!(*purpose, QueryPurpose::ConfirmUpper);
            }
            other => panic!("unexpected {other:?}"),
        }
        let state = s.pending_state().unwrap();
        // An all-ok answer does not confirm the anomaly and is refused.
        assert_eq!(
            s.feed_verdict(StateVerdict::all_ok(&state)),
            Err(LocalizeError::AnomalyNotConfirmed)
        );
        let v = StateVerdict {
            global: GlobalVerdict::Violated(vec!["p0".into()]),
            ..StateVerdict::all_ok(&state)
        };
        s.feed_verdict(v).unwrap();
        assert_eq!(s.result().unwrap().culprits(), &[VertexId(1), VertexId(2)]);
        assert_eq!(s.transcript().len(), 2);
    }

    #[test]
    fn localize_with_differential_oracle() {
        let golden = chain4();
        let mutant = ExecutionGraph::builder()
            .vertex(1)
            .vertex(2)
            .vertex(3)
            .control(0, 1)
            .data(1, 2, "x", 1)
            .data(2, 3, "x", 9)
            .build();
        let mut oracle = differential_oracle(&golden);
        let run = localize(
            Arc::new(mutant),
            InitialAnomaly::edge(EdgeKey::data(2, 3, "x")),
            &mut oracle,
            LocalizerConfig::default(),
        )
        .unwrap();
        assert_eq!(run.result.culprits(), &[VertexId(2)]);
        assert!(run.oracle_calls() <= 2);
    }

    #[test]
    fn root_edge_needs_no_examination() {
        let mut oracle = scripted_oracle(BTreeMap::new());
        let run = localize(
            Arc::new(diamond()),
            InitialAnomaly::edge(EdgeKey::control(0, 2)),
            &mut oracle,
            LocalizerConfig::default(),
        )
        .unwrap();
        assert_eq!(run.oracle_calls(), 0);
        assert!(matches!(run.result, LocalizationResult::MissingOperation { .. }));
    }

    #[test]
    fn oracle_errors_carry_the_transcript() {
        let g = chain4();
        let mut oracle = scripted_oracle(BTreeMap::new());
        let err = localize(
            Arc::new(g),
            InitialAnomaly::edge(EdgeKey::data(2, 3, "x")),
            &mut oracle,
            LocalizerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err.error, LocalizeError::Oracle(OracleError::UnscriptedCut(_))));
        assert!(err.transcript.is_empty());
    }

    #[test]
    fn anomaly_text() {
        let a: InitialAnomaly = "edge:2,3,data,x".parse().unwrap();
        assert_eq!(a, InitialAnomaly::edge(EdgeKey::data(2, 3, "x")));
        assert_eq!(a.to_string(), "edge:2,3,data,x");
        let a: InitialAnomaly = "global:0,1,2:p0,inv".parse().unwrap();
        assert_eq!(a, InitialAnomaly::global(ids(&[0, 1, 2]), &["p0", "inv"]));
        assert_eq!(a.to_string(), "global:0,1,2:p0,inv");
        let a: InitialAnomaly = "global:0".parse().unwrap();
        assert_eq!(a, InitialAnomaly::global(ids(&[0]), &[]));
        for bad in ["edge:1,2", "global:a", "node:1"] {
            assert!(bad.parse::<InitialAnomaly>().is_err(), "{bad}");
        }
    }

    #[test]
    fn result_json() {
        let r = LocalizationResult::FaultyVertices {
            vertices: vec![VertexId(2)],
            evidence: vec![EdgeKey::data(2, 3, "x")],
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"kind":"faulty_vertices","vertices":[2],"evidence":["2,3,data,x"]}"#
        );
    }
}
