//! The `tracefold` command line: run programs under monitors, replay
//! recorded traces, report coverage, draw graphs and measure overhead.

mod bench;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::foldt::{FoldError, FoldOutcome, MonitorError, MonitorSet, Session, StopReason};
use crate::microlog::{
    bundled, parse_program, parse_query, Engine, LiveSource, Program, ProgramError, Query,
    Solution, SolveError, SolveOptions,
};
use crate::monitors::{self, RegistryError};
use crate::trace_io::{
    replay, AttributeMask, EventFilter, Tee, TraceError, TraceSource, TraceWriter,
};

pub use bench::{bench_program, BenchConfig, BenchReport, BenchRow};

#[derive(Debug, Parser)]
#[command(
    name = "tracefold",
    version,
    about = "Fold monitors over execution traces of small logic programs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a program and fold its live trace through monitors.
    ///
    /// Several --monitor flags are folded together as one product monitor:
    /// a run stops as soon as any member refuses an event, and the trace is
    /// then folded again from the next event until it ends.
    Run(RunArgs),
    /// Fold a recorded trace through monitors.
    Replay(ReplayArgs),
    /// Report predicate or call-site coverage of a run or a recorded trace.
    Coverage(CoverageArgs),
    /// Write a control flow graph or call graph in DOT format.
    Graph(GraphArgs),
    /// Measure the cost of tracing and monitoring.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    /// Query to run.
    #[arg(long, default_value = "main")]
    pub query: String,
    /// Optional attributes to produce: `all`, `none` or a list of args,
    /// arg_types, local_vars, line_number. Defaults to arg_types,local_vars
    /// plus whatever the chosen monitors need.
    #[arg(long)]
    pub mask: Option<String>,
    /// Event granularity per module, `MODULE=all|external|none|call+exit...`;
    /// `*=LEVEL` sets the default.
    #[arg(long = "filter", value_name = "MODULE=LEVEL")]
    pub filters: Vec<String>,
    /// Number of solutions to search for, or `all`.
    #[arg(long, default_value = "1")]
    pub max_solutions: String,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Program source (`.mlg`). Bundled programs can be named directly.
    pub program: PathBuf,
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Monitor to fold over the trace; repeatable.
    #[arg(long = "monitor", value_name = "NAME")]
    pub monitors: Vec<String>,
    /// Also record the trace to this file.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Write monitor results here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Recorded trace file.
    pub trace: PathBuf,
    /// Monitor to fold over the trace; repeatable.
    #[arg(long = "monitor", value_name = "NAME", required = true)]
    pub monitors: Vec<String>,
    /// Program source, needed by the coverage monitors.
    #[arg(long)]
    pub program: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoverageMode {
    /// One criterion per predicate.
    Pred,
    /// One criterion per call site.
    Site,
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    pub program: PathBuf,
    #[arg(long, value_enum, default_value = "pred")]
    pub mode: CoverageMode,
    /// Read this recorded trace instead of running the program.
    #[arg(long = "trace")]
    pub trace_file: Option<PathBuf>,
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Minimal coverage rate, as a fraction between 0 and 1.
    #[arg(long, default_value = "0")]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphKind {
    Cfg,
    CfgCounted,
    Callgraph,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Program source. Optional when --trace is given.
    pub program: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cfg")]
    pub kind: GraphKind,
    /// Read this recorded trace instead of running the program.
    #[arg(long = "trace")]
    pub trace_file: Option<PathBuf>,
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Graph name used in the DOT output.
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Programs to measure.
    #[arg(default_values = ["queens.mlg", "qsort.mlg"])]
    pub programs: Vec<PathBuf>,
    #[arg(long, default_value = "main")]
    pub query: String,
    /// Keep repeating each measurement until this many seconds have passed.
    #[arg(long, default_value = "2")]
    pub min_duration: f64,
    /// Monitor timed in the last column.
    #[arg(long, default_value = "call_graph")]
    pub monitor: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{source}")]
    Program {
        path: PathBuf,
        #[source]
        source: ProgramError,
    },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("coverage {rate:.1}% is below the threshold {threshold:.1}%")]
    Threshold { rate: f64, threshold: f64 },
}

impl CliError {
    /// 1: threshold not met, 2: usage or input error, 3: broken trace.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Threshold { .. } => 1,
            CliError::Usage(_) | CliError::Io { .. } | CliError::Program { .. } => 2,
            CliError::Registry(_) => 2,
            CliError::Fold(FoldError::Monitor(MonitorError::AttributeUnavailable(_))) => 2,
            CliError::Fold(FoldError::Monitor(_)) => 3,
            CliError::Fold(FoldError::SessionClosed) => 3,
            CliError::Fold(FoldError::Source(e)) | CliError::Trace(e) => trace_exit_code(e),
        }
    }
}

fn trace_exit_code(e: &TraceError) -> i32 {
    match e {
        TraceError::Io { .. } | TraceError::Producer(_) => 2,
        TraceError::Version { .. }
        | TraceError::Malformed { .. }
        | TraceError::Integrity { .. } => 3,
    }
}

/// Reads a program from `path`, falling back to the bundled program of the
/// same file name when the path does not exist.
pub fn load_program(path: &Path) -> Result<Program, CliError> {
    let src = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let bundled = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(bundled::lookup)
                .filter(|_| path.components().count() == 1);
            match (e.kind(), bundled) {
                (io::ErrorKind::NotFound, Some(s)) => s.to_string(),
                _ => {
                    return Err(CliError::Io {
                        path: path.to_path_buf(),
                        source: e,
                    })
                }
            }
        }
    };
    parse_program(&src).map_err(|source| CliError::Program {
        path: path.to_path_buf(),
        source,
    })
}

fn program_title(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace")
        .to_string()
}

/// Resolved run settings shared by the commands that execute programs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub program_path: PathBuf,
    pub query: String,
    pub monitors: Vec<String>,
    pub mask: AttributeMask,
    pub filter: EventFilter,
    pub max_solutions: Option<usize>,
    pub record: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Builds a configuration. Without an explicit mask, the default mask is
    /// extended with the attributes the monitors read.
    pub fn new(
        program_path: PathBuf,
        trace: &TraceArgs,
        monitors: Vec<String>,
        record: Option<PathBuf>,
        out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let mask = match &trace.mask {
            Some(m) => m
                .parse()
                .map_err(|e| CliError::Usage(format!("--mask: {e}")))?,
            None => monitors
                .iter()
                .map(|m| monitors::required_attributes(m))
                .fold(AttributeMask::default(), union),
        };
        let filter = EventFilter::parse_specs(trace.filters.iter().map(String::as_str))
            .map_err(|e| CliError::Usage(format!("--filter: {e}")))?;
        let max_solutions = match trace.max_solutions.as_str() {
            "all" => None,
            n => Some(n.parse().map_err(|_| {
                CliError::Usage(format!(
                    "--max-solutions: expected a number or `all`, got `{n}`"
                ))
            })?),
        };
        Ok(RunConfig {
            program_path,
            query: trace.query.clone(),
            monitors,
            mask,
            filter,
            max_solutions,
            record,
            out,
        })
    }

    fn options(&self) -> SolveOptions {
        SolveOptions {
            mask: self.mask,
            filter: self.filter.clone(),
            max_solutions: self.max_solutions,
        }
    }
}

fn union(a: AttributeMask, b: AttributeMask) -> AttributeMask {
    AttributeMask {
        args: a.args || b.args,
        arg_types: a.arg_types || b.arg_types,
        local_vars: a.local_vars || b.local_vars,
        line_number: a.line_number || b.line_number,
    }
}

fn build_monitors(names: &[String], program: Option<&Program>) -> Result<MonitorSet, CliError> {
    let restarting = names.iter().find(|n| monitors::restarts(n));
    let whole = names.iter().find(|n| monitors::needs_whole_trace(n));
    if let (Some(r), Some(w)) = (restarting, whole) {
        return Err(CliError::Usage(format!(
            "`{w}` must see the whole trace and cannot be folded together with `{r}`, which restarts the fold"
        )));
    }
    let mut set = MonitorSet::default();
    for n in names {
        set.push(monitors::lookup(n, program)?);
    }
    Ok(set)
}

/// Folds a source through the monitor set until the trace ends and renders
/// every run.
pub fn fold_report(source: impl TraceSource, set: &MonitorSet) -> Result<String, CliError> {
    let mut session = Session::new(source);
    let outcomes = session.run_to_completion(set, |_| {})?;
    Ok(render_outcomes(&outcomes))
}

/// Text form of fold results: a header per run, then each monitor's
/// result. Multi-line results are indented under the monitor name.
pub fn render_outcomes(outcomes: &[FoldOutcome<Vec<(String, String)>>]) -> String {
    let mut out = String::new();
    for (i, o) in outcomes.iter().enumerate() {
        let stop = match o.stop_reason {
            StopReason::EndOfTrace => "end of trace".to_string(),
            StopReason::CollectFailed { chrono } => format!("collect failed at chrono {chrono}"),
        };
        writeln!(out, "run {}: {} events, {}", i + 1, o.events_consumed, stop).unwrap();
        for (name, text) in &o.result {
            if text.contains('\n') {
                writeln!(out, "{name}:").unwrap();
                for line in text.lines() {
                    writeln!(out, "  {line}").unwrap();
                }
            } else {
                writeln!(out, "{name}: {text}").unwrap();
            }
        }
    }
    out
}

enum Source {
    Live(LiveSource),
    Recorded(Tee<LiveSource>),
}

impl TraceSource for Source {
    fn next_event(&mut self) -> Result<Option<crate::event::Event>, TraceError> {
        match self {
            Source::Live(s) => s.next_event(),
            Source::Recorded(s) => s.next_event(),
        }
    }
}

fn parse_query_for(program: &Program, text: &str) -> Result<Query, CliError> {
    parse_query(program, text).map_err(|source| CliError::Program {
        path: PathBuf::from("<query>"),
        source,
    })
}

fn start(
    config: &RunConfig,
    program: Program,
    program_out: Box<dyn Write + Send>,
) -> Result<Source, CliError> {
    let query = parse_query_for(&program, &config.query)?;
    let live = LiveSource::spawn(
        Arc::new(Engine::new(program)),
        query,
        config.options(),
        program_out,
    );
    Ok(match &config.record {
        None => Source::Live(live),
        Some(path) => Source::Recorded(Tee::new(live, TraceWriter::create(path, config.mask)?)),
    })
}

fn finish(source: Source) -> Result<Result<crate::microlog::SolveOutcome, SolveError>, CliError> {
    Ok(match source {
        Source::Live(s) => s.finish()?,
        Source::Recorded(t) => t.finish()?.0.finish()?,
    })
}

/// What a live run produced besides the monitor report.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub report: String,
    pub solutions: Vec<Solution>,
    /// Runtime error raised by the traced program, if any.
    pub program_error: Option<String>,
}

pub fn cmd_run(
    config: &RunConfig,
    program_out: Box<dyn Write + Send>,
) -> Result<RunSummary, CliError> {
    if config.monitors.is_empty() && config.record.is_none() {
        return Err(CliError::Usage(
            "run needs at least one --monitor or a --record target".into(),
        ));
    }
    let program = load_program(&config.program_path)?;
    let set = build_monitors(&config.monitors, Some(&program))?;
    let mut source = start(config, program, program_out)?;
    let report = if set.is_empty() {
        String::new()
    } else {
        fold_report(&mut source, &set)?
    };
    let (solutions, program_error) = match finish(source)? {
        Ok(o) => (o.solutions, None),
        Err(SolveError::Runtime {
            pred,
            message,
            solutions,
        }) => (solutions, Some(format!("{pred}: {message}"))),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    Ok(RunSummary {
        report,
        solutions,
        program_error,
    })
}

pub fn cmd_replay(
    trace: &Path,
    monitor_names: &[String],
    program: Option<&Path>,
) -> Result<String, CliError> {
    let program = program.map(load_program).transpose()?;
    let set = build_monitors(monitor_names, program.as_ref())?;
    fold_report(replay(trace)?, &set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub report: String,
    pub rate: f64,
    pub criterion_rate: f64,
}

pub fn cmd_coverage(
    config: &RunConfig,
    mode: CoverageMode,
    trace_file: Option<&Path>,
) -> Result<CoverageResult, CliError> {
    let program = load_program(&config.program_path)?;
    let initial = match mode {
        CoverageMode::Pred => monitors::generate_pred_criteria(&program),
        CoverageMode::Site => monitors::generate_call_site_criteria(&program),
    };
    let state = match (mode, trace_file) {
        (CoverageMode::Pred, Some(t)) => {
            fold_all(replay(t)?, &monitors::predicate_coverage(initial))?
        }
        (CoverageMode::Site, Some(t)) => {
            fold_all(replay(t)?, &monitors::call_site_coverage(initial))?
        }
        (CoverageMode::Pred, None) => {
            let mut src = start(config, program, Box::new(io::sink()))?;
            let r = fold_all(&mut src, &monitors::predicate_coverage(initial));
            finish(src)?.ok();
            r?
        }
        (CoverageMode::Site, None) => {
            let mut src = start(config, program, Box::new(io::sink()))?;
            let r = fold_all(&mut src, &monitors::call_site_coverage(initial));
            finish(src)?.ok();
            r?
        }
    };
    Ok(CoverageResult {
        report: state.report(),
        rate: state.rate(),
        criterion_rate: state.criterion_rate(),
    })
}

fn fold_all<M: crate::foldt::Monitor>(
    source: impl TraceSource,
    m: &M,
) -> Result<M::Output, CliError> {
    Ok(crate::foldt::foldt(source, m)?.result)
}

pub fn cmd_graph(
    config: Option<&RunConfig>,
    kind: GraphKind,
    trace_file: Option<&Path>,
    title: &str,
) -> Result<String, CliError> {
    let graph = match (trace_file, config) {
        (Some(t), _) => graph_of(replay(t)?, kind)?,
        (None, Some(config)) => {
            let program = load_program(&config.program_path)?;
            let mut src = start(config, program, Box::new(io::sink()))?;
            let g = graph_of(&mut src, kind);
            finish(src)?.ok();
            g?
        }
        (None, None) => return Err(CliError::Usage("graph needs a program or --trace".into())),
    };
    Ok(graph.to_dot(title))
}

fn graph_of(source: impl TraceSource, kind: GraphKind) -> Result<monitors::Graph, CliError> {
    match kind {
        GraphKind::Cfg => fold_all(source, &monitors::control_flow_graph(false)),
        GraphKind::CfgCounted => fold_all(source, &monitors::control_flow_graph(true)),
        GraphKind::Callgraph => fold_all(source, &monitors::dynamic_call_graph()),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

/// Runs a parsed command line, writing results to standard output.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let config = RunConfig::new(a.program, &a.trace, a.monitors, a.record, a.out)?;
            let summary = cmd_run(&config, Box::new(io::stdout()))?;
            if let Some(e) = &summary.program_error {
                eprintln!("warning: the program raised an error: {e}");
            }
            let mut text = summary.report;
            for s in summary.solutions.iter().filter(|s| !s.bindings.is_empty()) {
                if config.out.is_none() {
                    writeln!(text, "solution: {s}").unwrap();
                }
            }
            write_output(config.out.as_deref(), &text)
        }
        Command::Replay(a) => {
            let report = cmd_replay(&a.trace, &a.monitors, a.program.as_deref())?;
            write_output(a.out.as_deref(), &report)
        }
        Command::Coverage(a) => {
            if !(0.0..=1.0).contains(&a.threshold) {
                return Err(CliError::Usage(
                    "--threshold must be between 0 and 1".into(),
                ));
            }
            let monitor = match a.mode {
                CoverageMode::Pred => "pred_coverage",
                CoverageMode::Site => "site_coverage",
            };
            let config = RunConfig::new(a.program, &a.trace, vec![monitor.into()], None, a.out)?;
            let result = cmd_coverage(&config, a.mode, a.trace_file.as_deref())?;
            write_output(config.out.as_deref(), &format!("{}\n", result.report))?;
            if result.rate + 1e-12 < a.threshold {
                return Err(CliError::Threshold {
                    rate: result.rate * 100.0,
                    threshold: a.threshold * 100.0,
                });
            }
            Ok(())
        }
        Command::Graph(a) => {
            let title = a
                .title
                .clone()
                .or_else(|| a.program.as_deref().map(program_title))
                .or_else(|| a.trace_file.as_deref().map(program_title))
                .unwrap_or_else(|| "trace".into());
            let config = a
                .program
                .clone()
                .map(|p| RunConfig::new(p, &a.trace, Vec::new(), None, a.out.clone()))
                .transpose()?;
            let dot = cmd_graph(config.as_ref(), a.kind, a.trace_file.as_deref(), &title)?;
            write_output(a.out.as_deref(), &dot)
        }
        Command::Bench(a) => {
            if !(a.min_duration > 0.0 && a.min_duration.is_finite()) {
                return Err(CliError::Usage(
                    "--min-duration must be a positive number of seconds".into(),
                ));
            }
            let config = BenchConfig {
                min_duration: std::time::Duration::from_secs_f64(a.min_duration),
                monitor: a.monitor.clone(),
                ..BenchConfig::default()
            };
            let mut report = BenchReport::default();
            for p in &a.programs {
                let program = load_program(p)?;
                let query = parse_query_for(&program, &a.query)?;
                let row = bench_program(&program_title(p), program, &query, &config)?;
                report.rows.push(row);
            }
            for w in &report.warnings() {
                eprintln!("warning: {w}");
            }
            write_output(None, &report.to_string())
        }
    }
}

/// Entry point for the binary: parses `args`, runs, and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
