mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::*;
use cutloc::cut::{Cut, State};
use cutloc::graph::{ancestors, EdgeKey, ExecutionGraph, GraphBuilder, VertexId};
use cutloc::localizer::{localize, InitialAnomaly, LocalizationResult, LocalizerConfig};
use cutloc::oracle::{EdgeVerdict, GlobalVerdict, OracleError, StateVerdict};
use proptest::prelude::*;
use rand::Rng;

/// Marks every atom whose source lies in `tainted` as anomalous.
fn taint_oracle(tainted: BTreeSet<VertexId>) -> impl FnMut(&Cut, &State) -> Result<StateVerdict, OracleError> {
    move |_cut, state| {
        Ok(StateVerdict {
            per_edge: state
                .atoms()
                .iter()
                .map(|a| {
                    let v = if tainted.contains(&a.edge_key.src) {
                        EdgeVerdict::anomaly_for(a.edge_key.kind)
                    } else {
                        EdgeVerdict::Ok
                    };
                    (a.edge_key.clone(), v)
                })
                .collect(),
            global: GlobalVerdict::Ok,
        })
    }
}

fn chain(n: u64) -> ExecutionGraph {
    let mut b = GraphBuilder::new();
    for v in 1..n {
        b = b.vertex(v).data(v - 1, v, "x", v as i64);
    }
    b.build()
}

#[test]
fn fifteen_vertex_chain_finds_v13_within_six_calls() {
    let g = Arc::new(chain(15));
    let tainted: BTreeSet<VertexId> = (13..15).map(VertexId).collect();
    let mut oracle = taint_oracle(tainted);
    let l = localize(g, InitialAnomaly::edge(EdgeKey::data(13, 14, "x")), &mut oracle, LocalizerConfig::default()).unwrap();
    assert_eq!(l.result.culprits(), &[VertexId(13)]);
    assert!(l.oracle_calls() <= 6, "{} calls", l.oracle_calls());
}

#[test]
fn chain_finds_every_planted_fault() {
    let g = Arc::new(chain(15));
    for fault in 1..14u64 {
        let tainted: BTreeSet<VertexId> = (fault..15).map(VertexId).collect();
        let mut oracle = taint_oracle(tainted);
        let l = localize(
            g.clone(),
            InitialAnomaly::edge(EdgeKey::data(13, 14, "x")),
            &mut oracle,
            LocalizerConfig::default(),
        )
        .unwrap();
        assert_eq!(l.result.culprits(), &[VertexId(fault)], "fault at v{fault}");
        assert!(l.oracle_calls() <= ceil_log2(13), "fault at v{fault}: {} calls", l.oracle_calls());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// With a consistent judge that flags everything downstream of one
    /// vertex, the search ends exactly on that vertex.
    #[test]
    fn planted_taint_is_located(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_dag(&mut r, 12);
        let sources: Vec<VertexId> = g.vertices().filter(|v| g.out_edges(*v).next().is_some() && *v != VertexId(0)).collect();
        prop_assume!(!sources.is_empty());
        let fault = sources[r.random_range(0..sources.len())];
        let tainted = brute_reach(&g, fault, true);
        let flagged: Vec<EdgeKey> = g.edges().iter().filter(|e| tainted.contains(&e.src)).map(|e| e.key()).collect();
        let key = flagged[r.random_range(0..flagged.len())].clone();
        let m = ancestors(&g, key.src).unwrap().len() - 1;
        let mut oracle = taint_oracle(tainted);
        let l = localize(Arc::new(g), InitialAnomaly::edge(key), &mut oracle, LocalizerConfig::default()).unwrap();
        match &l.result {
            LocalizationResult::FaultyVertices { vertices, .. } => prop_assert_eq!(vertices, &vec![fault]),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
        prop_assert!(l.oracle_calls() <= ceil_log2(m));
    }
}
