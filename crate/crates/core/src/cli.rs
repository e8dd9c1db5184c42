//! The `cutloc` command line.
//!
//! Exit codes: 0 success, 1 domain error, 2 I/O or parse error.

use std::ffi::OsString;
use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::cut::{cut_edges, root_cut};
use crate::graph::{topo_levels, validate_graph, ExecutionGraph, VertexId};
use crate::graph_file::{load_graph, save_graph, LoadError};
use crate::localizer::{localize, InitialAnomaly, LocalizationResult, LocalizerConfig};
use crate::oracle::{assertion_oracle, differential_oracle, Oracle};
use crate::predicate::{parse_predicates, GlobalPredicate};
use crate::service::{serve, SessionService};
use crate::trace::{build_graph, load_trace, mutate_trace, save_trace, BuildOptions, TraceError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cutloc", version, about = "Cut-set fault localization over execution graphs")]
pub struct Cli {
    /// Print each oracle examination to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an execution graph file from a trace.
    Build {
        /// Trace JSONL.
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reads of unassigned variables become edges from the root.
        #[arg(long)]
        allow_undef: bool,
    },
    /// Localize a fault from an initial anomaly.
    Localize(LocalizeArgs),
    /// Write a single-value mutant of a trace.
    Mutate {
        /// Trace JSONL.
        trace: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print counts, topological levels and the root cut of a graph.
    Inspect {
        /// Execution graph JSONL.
        graph: PathBuf,
    },
    /// Run the interactive session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory holding the web UI assets.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Write each finished session's transcript to `<dir>/<id>.jsonl`.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// Execution graph JSONL.
    pub graph: PathBuf,
    /// `assert:<predicate file>`, `diff:<golden graph>` or `interactive`.
    #[arg(long)]
    pub oracle: String,
    /// `edge:<src,dst,kind[,var]>` or `global:<ids>:<predicate ids>`.
    #[arg(long)]
    pub anomaly: String,
    /// Transcript JSONL output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Extra predicate definitions used to minimise a global anomaly.
    #[arg(long)]
    pub predicates: Option<PathBuf>,
    /// Port for the interactive oracle.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

#[derive(Debug)]
pub enum OracleSpec {
    Assert(PathBuf),
    Diff(PathBuf),
    Interactive,
}

impl std::str::FromStr for OracleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "interactive" {
            Ok(OracleSpec::Interactive)
        } else if let Some(p) = s.strip_prefix("assert:").filter(|p| !p.is_empty()) {
            Ok(OracleSpec::Assert(p.into()))
        } else if let Some(p) = s.strip_prefix("diff:").filter(|p| !p.is_empty()) {
            Ok(OracleSpec::Diff(p.into()))
        } else {
            Err(format!(
                "malformed oracle `{s}` (expected assert:<file>, diff:<golden graph> or interactive)"
            ))
        }
    }
}

/// A failed command: message for stderr plus exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn domain(message: impl Into<String>) -> Self {
        Failure { code: EXIT_DOMAIN, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure { code: EXIT_IO, message: message.into() }
    }
}

fn load_error(path: &Path, e: LoadError) -> Failure {
    match e {
        LoadError::Invalid(_) => Failure::domain(format!("{}: {e}", path.display())),
        _ => Failure::io(format!("{}: {e}", path.display())),
    }
}

fn trace_error(path: &Path, e: TraceError) -> Failure {
    let msg = format!("{}: {e}", path.display());
    if e.is_io_or_parse() {
        Failure::io(msg)
    } else {
        Failure::domain(msg)
    }
}

fn write_failed(path: &Path, e: std::io::Error) -> Failure {
    Failure::io(format!("{}: {e}", path.display()))
}

fn load_predicates(path: &Path) -> Result<Vec<GlobalPredicate>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| write_failed(path, e))?;
    parse_predicates(&text)
        .map_err(|(line, e)| Failure::io(format!("{}: line {line}: {e}", path.display())))
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let verbose = cli.verbose;
    let outcome = match cli.command {
        Command::Build { trace, out: path, allow_undef } => cmd_build(&trace, &path, allow_undef, out),
        Command::Localize(args) => cmd_localize(&args, verbose, out, err),
        Command::Mutate { trace, seed, out: path } => cmd_mutate(&trace, seed, &path, out),
        Command::Inspect { graph } => cmd_inspect(&graph, out),
        Command::Serve { port, static_dir, transcripts } => {
            let mut service = SessionService::new();
            if let Some(dir) = transcripts {
                service = service.with_transcript_dir(dir);
            }
            run_server(Arc::new(service), port, static_dir, out, |addr| {
                format!("serving on http://{addr}/")
            })
        }
    };
    let _ = out.flush();
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn cmd_build(trace: &Path, out_path: &Path, allow_undef: bool, out: &mut dyn Write) -> Result<(), Failure> {
    let t = load_trace(trace).map_err(|e| trace_error(trace, e))?;
    let g = build_graph(&t, BuildOptions { allow_undef }).map_err(|e| trace_error(trace, e))?;
    let report = validate_graph(&g);
    if !report.is_ok() {
        return Err(Failure::domain(format!("built graph is invalid: {report}")));
    }
    save_graph(&g, out_path).map_err(|e| write_failed(out_path, e))?;
    let _ = writeln!(
        out,
        "wrote {} ({} vertices, {} edges)",
        out_path.display(),
        g.vertex_count(),
        g.edge_count()
    );
    Ok(())
}

fn cmd_mutate(trace: &Path, seed: u64, out_path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let t = load_trace(trace).map_err(|e| trace_error(trace, e))?;
    let (mutant, seq) = mutate_trace(&t, seed).map_err(|e| trace_error(trace, e))?;
    save_trace(&mutant, out_path).map_err(|e| write_failed(out_path, e))?;
    let _ = writeln!(out, "mutated seq={seq}");
    Ok(())
}

fn plural(n: usize, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

fn cmd_inspect(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let g = load_graph(path).map_err(|e| load_error(path, e))?;
    let root = match root_cut(&g) {
        Ok(c) => {
            let n = cut_edges(&g, &c).map(|e| e.len()).unwrap_or(0);
            plural(n, "edge", "edges")
        }
        Err(_) => "none".to_string(),
    };
    let _ = writeln!(
        out,
        "{}, {}, root cut: {root}",
        plural(g.vertex_count(), "vertex", "vertices"),
        plural(g.edge_count(), "edge", "edges"),
    );
    if !g.is_deterministic() {
        let _ = writeln!(out, "non-deterministic");
    }
    let levels = topo_levels(&g).map_err(|e| Failure::domain(e.to_string()))?;
    let depth = levels.values().copied().max().unwrap_or(0);
    for level in 0..=depth {
        let ids: Vec<String> = levels
            .iter()
            .filter(|(_, l)| **l == level)
            .map(|(v, _)| format!("v{}", v.0))
            .collect();
        let _ = writeln!(out, "level {level}: {}", ids.join(" "));
    }
    Ok(())
}

fn describe(g: &ExecutionGraph, v: VertexId) -> String {
    match g.description(v) {
        Some(d) => format!("v{}  {d}", v.0),
        None => format!("v{}", v.0),
    }
}

fn print_result(g: &ExecutionGraph, result: &LocalizationResult, calls: usize, out: &mut dyn Write) {
    let vs = |ids: &[VertexId]| -> String {
        let names: Vec<String> = ids.iter().map(|v| format!("v{}", v.0)).collect();
        format!("[{}]", names.join(", "))
    };
    match result {
        LocalizationResult::MissingOperation { at } => {
            let _ = writeln!(out, "MissingOperation: at {}", vs(&at.downset));
        }
        LocalizationResult::FaultyVertices { vertices, evidence } => {
            let _ = writeln!(out, "FaultyVertices: {}", vs(vertices));
            for v in vertices {
                let _ = writeln!(out, "  {}", describe(g, *v));
            }
            for e in evidence {
                let _ = writeln!(out, "  anomalous edge {e}");
            }
        }
        LocalizationResult::MissingCriticalSections { atoms, vertices } => {
            let _ = writeln!(out, "MissingCriticalSections: {}", vs(vertices));
            for v in vertices {
                let _ = writeln!(out, "  {}", describe(g, *v));
            }
            for a in atoms {
                let _ = writeln!(out, "  necessary atom {}", a.edge_key);
            }
        }
    }
    let _ = writeln!(out, "oracle calls: {calls}");
}

fn cmd_localize(args: &LocalizeArgs, verbose: u8, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let choice: OracleSpec = args.oracle.parse().map_err(Failure::domain)?;
    let anomaly: InitialAnomaly = args
        .anomaly
        .parse()
        .map_err(|e: crate::localizer::AnomalyParseError| Failure::domain(e.to_string()))?;
    let graph = Arc::new(load_graph(&args.graph).map_err(|e| load_error(&args.graph, e))?);
    if !graph.is_deterministic() {
        let _ = writeln!(
            err,
            "warning: {} is marked non-deterministic; states may not be reproducible",
            args.graph.display()
        );
    }
    let mut config = LocalizerConfig::default();
    if let Some(p) = &args.predicates {
        config.predicates = load_predicates(p)?;
    }

    let mut oracle: Box<dyn Oracle> = match choice {
        OracleSpec::Interactive => return localize_interactive(graph, anomaly, config, args, out),
        OracleSpec::Assert(path) => {
            let preds = load_predicates(&path)?;
            Box::new(assertion_oracle(preds).map_err(|e| Failure::domain(e.to_string()))?)
        }
        OracleSpec::Diff(path) => {
            let golden = load_graph(&path).map_err(|e| load_error(&path, e))?;
            Box::new(differential_oracle(&golden))
        }
    };

    let run = localize(graph.clone(), anomaly, oracle.as_mut(), config);
    let (localization, transcript) = match run {
        Ok(l) => {
            let t = l.transcript.clone();
            (Ok(l), t)
        }
        Err(f) => (Err(f.error), f.transcript),
    };
    if verbose > 0 {
        for step in &transcript {
            let ids: Vec<String> = step.cut.downset.iter().map(|v| v.0.to_string()).collect();
            let verdict = serde_json::to_string(&step.verdict).unwrap_or_default();
            let _ = writeln!(err, "step {}: cut {{{}}} -> {verdict}", step.step, ids.join(","));
        }
    }
    let localization = localization.map_err(|e| Failure::domain(e.to_string()))?;
    if let Some(path) = &args.out {
        std::fs::write(path, localization.to_jsonl()).map_err(|e| write_failed(path, e))?;
    }
    print_result(&graph, &localization.result, localization.oracle_calls(), out);
    Ok(())
}

fn localize_interactive(
    graph: Arc<ExecutionGraph>,
    anomaly: InitialAnomaly,
    config: LocalizerConfig,
    args: &LocalizeArgs,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let service = Arc::new(SessionService::new());
    let created = service
        .create_session(graph, anomaly, config, args.out.clone())
        .map_err(|e| Failure::domain(e.to_string()))?;
    let id = created.id;
    run_server(service, args.port, None, out, move |addr| {
        format!("session {id}: http://{addr}/?session={id}")
    })
}

fn run_server(
    service: Arc<SessionService>,
    port: u16,
    static_dir: Option<PathBuf>,
    out: &mut dyn Write,
    banner: impl FnOnce(SocketAddr) -> String,
) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::io(e.to_string()))?;
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    rt.block_on(serve(addr, service, static_dir, |bound| {
        let _ = writeln!(out, "{}", banner(bound));
        let _ = out.flush();
    }))
    .map_err(|e| Failure::io(format!("serving on {addr}: {e}")))
}
