//! C ABI over the cutloc localizer.
//!
//! Graphs and sessions are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a
//! [`CutlocStatus`]; on failure [`cutloc_last_error_message`] describes the
//! problem. Strings handed out by the library are NUL-terminated UTF-8 JSON
//! and must be released with [`cutloc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use cutloc::graph_file::{load_graph, parse_graph, LoadError};
use cutloc::localizer::{localize, InitialAnomaly, LocalizeError, LocalizerConfig, LocalizerSession};
use cutloc::oracle::differential_oracle;
use cutloc::predicate::parse_predicates;
use cutloc::service::{query_payload, AnswerBody};
use cutloc::ExecutionGraph;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutlocStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidGraph = 5,
    InvalidAnomaly = 6,
    VerdictRejected = 7,
    SessionFinished = 8,
    SessionRunning = 9,
    LocalizeFailed = 10,
    Panic = 255,
}

/// A validated execution graph.
pub struct CutlocGraph {
    graph: Arc<ExecutionGraph>,
}

/// An interactive localization session.
pub struct CutlocSession {
    session: LocalizerSession,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (CutlocStatus, String);

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CutlocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CutlocStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CutlocStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((CutlocStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (CutlocStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out_ptr<'a, T>(p: *mut *mut T, what: &str) -> Result<&'a mut *mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| (CutlocStatus::NullArgument, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| (CutlocStatus::NullArgument, format!("{what} is null")))
}

fn load_failure(e: LoadError) -> Failure {
    let status = match e {
        LoadError::Io(_) => CutlocStatus::Io,
        LoadError::Parse { .. } => CutlocStatus::Parse,
        LoadError::Invalid(_) => CutlocStatus::InvalidGraph,
    };
    (status, e.to_string())
}

fn json_string(encoded: serde_json::Result<String>) -> Result<*mut c_char, Failure> {
    let s = encoded.map_err(|e| (CutlocStatus::Panic, e.to_string()))?;
    Ok(CString::new(s).expect("JSON has no NULs").into_raw())
}

fn emit_graph(out: &mut *mut CutlocGraph, graph: ExecutionGraph) {
    *out = Box::into_raw(Box::new(CutlocGraph { graph: Arc::new(graph) }));
}

/// Parses graph file text (one JSON object per line).
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cutloc_graph_from_jsonl(text: *const c_char, out: *mut *mut CutlocGraph) -> CutlocStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let graph = parse_graph(c_str(text, "text")?).map_err(load_failure)?;
        emit_graph(out, graph);
        Ok(())
    })
}

/// Loads a graph file from `path`.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cutloc_graph_load(path: *const c_char, out: *mut *mut CutlocGraph) -> CutlocStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let graph = load_graph(c_str(path, "path")?).map_err(load_failure)?;
        emit_graph(out, graph);
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cutloc_graph_free(graph: *mut CutlocGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cutloc_graph_vertex_count(graph: *const CutlocGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.vertex_count())
}

/// Number of edges, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cutloc_graph_edge_count(graph: *const CutlocGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.edge_count())
}

/// Starts a session. `anomaly` is `edge:<src,dst,kind[,var]>` or
/// `global:<ids>:<predicate ids>`; `predicates` is predicate file text or
/// null. The session keeps its own reference to the graph.
///
/// # Safety
/// `graph` must be a live handle, the strings valid C strings (or null for
/// `predicates`) and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cutloc_session_start(
    graph: *const CutlocGraph,
    anomaly: *const c_char,
    predicates: *const c_char,
    out: *mut *mut CutlocSession,
) -> CutlocStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let graph = handle(graph, "graph")?;
        let anomaly: InitialAnomaly = c_str(anomaly, "anomaly")?
            .parse()
            .map_err(|e: cutloc::localizer::AnomalyParseError| (CutlocStatus::InvalidAnomaly, e.to_string()))?;
        let mut config = LocalizerConfig::default();
        if !predicates.is_null() {
            config.predicates = parse_predicates(c_str(predicates, "predicates")?)
                .map_err(|(line, e)| (CutlocStatus::Parse, format!("predicates line {line}: {e}")))?;
        }
        let session = LocalizerSession::start(graph.graph.clone(), anomaly, config).map_err(|e| {
            let status = match e {
                LocalizeError::Graph(_) => CutlocStatus::InvalidGraph,
                _ => CutlocStatus::InvalidAnomaly,
            };
            (status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(CutlocSession { session }));
        Ok(())
    })
}

/// # Safety
/// `session` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cutloc_session_free(session: *mut CutlocSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// True once the session has a result; false for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cutloc_session_is_finished(session: *const CutlocSession) -> bool {
    session.as_ref().is_some_and(|s| s.session.is_finished())
}

/// The pending examination as JSON: `{cut, atoms, progress}`.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cutloc_session_query_json(session: *const CutlocSession, out: *mut *mut c_char) -> CutlocStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s = handle(session, "session")?;
        let payload = query_payload(&s.session)
            .ok_or_else(|| (CutlocStatus::SessionFinished, "session is finished".to_string()))?;
        *out = json_string(serde_json::to_string(&payload))?;
        Ok(())
    })
}

/// Answers the pending examination with `{"per_edge": {...}, "global": ...}`.
/// A rejected answer leaves the session unchanged.
///
/// # Safety
/// `session` must be a live handle and `verdict` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn cutloc_session_answer_json(session: *mut CutlocSession, verdict: *const c_char) -> CutlocStatus {
    guard(|| {
        let s = session
            .as_mut()
            .ok_or_else(|| (CutlocStatus::NullArgument, "session is null".to_string()))?;
        let body: AnswerBody = serde_json::from_str(c_str(verdict, "verdict")?)
            .map_err(|e| (CutlocStatus::Parse, format!("verdict: {e}")))?;
        let verdict = body
            .into_verdict()
            .map_err(|e| (CutlocStatus::VerdictRejected, e.to_string()))?;
        s.session.feed_verdict(verdict).map_err(|e| {
            let status = match e {
                LocalizeError::NotAwaiting => CutlocStatus::SessionFinished,
                _ => CutlocStatus::VerdictRejected,
            };
            (status, e.to_string())
        })?;
        Ok(())
    })
}

/// The result and transcript as JSON: `{"result": ..., "transcript": [...]}`.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cutloc_session_result_json(session: *const CutlocSession, out: *mut *mut c_char) -> CutlocStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s = handle(session, "session")?;
        let result = s
            .session
            .result()
            .ok_or_else(|| (CutlocStatus::SessionRunning, "session is still running".to_string()))?;
        let value = serde_json::json!({ "result": result, "transcript": s.session.transcript() });
        *out = json_string(serde_json::to_string(&value))?;
        Ok(())
    })
}

/// Runs a whole localization of `graph` against the golden run `golden` and
/// returns the transcript JSONL (one examination per line, then the result).
///
/// # Safety
/// Both handles must be live, `anomaly` a valid C string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn cutloc_localize_diff(
    graph: *const CutlocGraph,
    golden: *const CutlocGraph,
    anomaly: *const c_char,
    out: *mut *mut c_char,
) -> CutlocStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let graph = handle(graph, "graph")?;
        let golden = handle(golden, "golden")?;
        let anomaly: InitialAnomaly = c_str(anomaly, "anomaly")?
            .parse()
            .map_err(|e: cutloc::localizer::AnomalyParseError| (CutlocStatus::InvalidAnomaly, e.to_string()))?;
        let mut oracle = differential_oracle(&golden.graph);
        let l = localize(graph.graph.clone(), anomaly, &mut oracle, LocalizerConfig::default())
            .map_err(|f| (CutlocStatus::LocalizeFailed, f.to_string()))?;
        *out = CString::new(l.to_jsonl()).expect("JSON has no NULs").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cutloc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cutloc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn cutloc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
