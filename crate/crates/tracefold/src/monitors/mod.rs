//! The monitor catalog: execution profiles, control flow and call graphs,
//! predicate and call-site coverage, and a registry that builds them by name.

mod coverage;
mod graph;
mod profiles;

use thiserror::Error;

use crate::foldt::{BoxedMonitor, EmptyMonitor};
use crate::microlog::Program;
use crate::trace_io::AttributeMask;

pub use crate::event::PredKey;
pub use coverage::{
    call_site_coverage, criteria_for, generate_call_site_criteria, generate_pred_criteria,
    predicate_coverage, CallSiteCoverage, CoverageKey, CoverageState, PredCriterion,
    PredicateCoverage,
};
pub use graph::{
    control_flow_graph, dynamic_call_graph, update_call_stack, ControlFlowGraph, DynamicCallGraph,
    Graph,
};
pub use profiles::{
    collect_solutions, count_calls, depth_histogram, max_depth_interval, port_histogram,
    CollectSolutions, CountCalls, DepthCounts, DepthHistogram, DepthInterval, MaxDepthInterval,
    PortCounts, PortHistogram, SolutionSet, DEFAULT_INTERVAL,
};

/// Names accepted by [`lookup`]. `max_depth_interval` takes an optional
/// length, as in `max_depth_interval:100`.
pub const MONITOR_NAMES: &[&str] = &[
    "count_calls",
    "port_histogram",
    "depth_histogram",
    "collect_solutions",
    "max_depth_interval",
    "cfg",
    "cfg_counted",
    "call_graph",
    "pred_coverage",
    "site_coverage",
    "empty",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("unknown monitor `{0}` (available: {names})", names = MONITOR_NAMES.join(", "))]
    Unknown(String),
    #[error("monitor `{0}` needs the program source to build its criteria")]
    NeedsProgram(String),
    #[error("bad argument for monitor `{name}`: `{arg}`")]
    BadArgument { name: String, arg: String },
}

fn split(spec: &str) -> (&str, Option<&str>) {
    match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    }
}

/// Builds a monitor from its registry name. Coverage monitors need the
/// program to derive their criteria.
pub fn lookup(spec: &str, program: Option<&Program>) -> Result<BoxedMonitor, RegistryError> {
    let (name, arg) = split(spec);
    if arg.is_some() && name != "max_depth_interval" {
        return Err(RegistryError::BadArgument {
            name: name.into(),
            arg: arg.unwrap_or_default().into(),
        });
    }
    let needs_program = || program.ok_or_else(|| RegistryError::NeedsProgram(name.into()));
    Ok(match name {
        "count_calls" => BoxedMonitor::display(name, count_calls()),
        "port_histogram" => BoxedMonitor::display(name, port_histogram()),
        "depth_histogram" => BoxedMonitor::display(name, depth_histogram()),
        "collect_solutions" => BoxedMonitor::display(name, collect_solutions()),
        "max_depth_interval" => {
            let n = match arg {
                None => DEFAULT_INTERVAL,
                Some(a) => match a.parse::<u64>() {
                    Ok(n) if n > 0 => n,
                    _ => {
                        return Err(RegistryError::BadArgument {
                            name: name.into(),
                            arg: a.into(),
                        })
                    }
                },
            };
            BoxedMonitor::display(spec.trim(), max_depth_interval(n))
        }
        "cfg" => BoxedMonitor::new(name, control_flow_graph(false), |g: Graph| g.to_dot("cfg")),
        "cfg_counted" => {
            BoxedMonitor::new(name, control_flow_graph(true), |g: Graph| g.to_dot("cfg"))
        }
        "call_graph" => BoxedMonitor::new(name, dynamic_call_graph(), |g: Graph| {
            g.to_dot("call_graph")
        }),
        "pred_coverage" => BoxedMonitor::display(
            name,
            predicate_coverage(generate_pred_criteria(needs_program()?)),
        ),
        "site_coverage" => BoxedMonitor::display(
            name,
            call_site_coverage(generate_call_site_criteria(needs_program()?)),
        ),
        "empty" => BoxedMonitor::new(name, EmptyMonitor, |()| String::new()),
        other => return Err(RegistryError::Unknown(other.into())),
    })
}

/// Monitors that refuse events on purpose so that the fold restarts.
pub fn restarts(spec: &str) -> bool {
    split(spec).0 == "max_depth_interval"
}

/// Monitors that keep a call stack and so must see the trace from its
/// first event.
pub fn needs_whole_trace(spec: &str) -> bool {
    split(spec).0 == "call_graph"
}

/// Optional attributes a registry monitor reads.
pub fn required_attributes(spec: &str) -> AttributeMask {
    match split(spec).0 {
        "collect_solutions" => AttributeMask::none().with_args(),
        "site_coverage" => AttributeMask::none().with_line_number(),
        _ => AttributeMask::none(),
    }
}
