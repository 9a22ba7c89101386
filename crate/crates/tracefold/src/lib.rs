//! Trace analysis by folding monitors over Byrd-box execution events.
//!
//! The crate contains an event model, trace recording and replay, a small
//! Prolog-like interpreter that emits events, the fold engine and a catalog
//! of monitors (profiles, control flow and call graphs, coverage).
//!
//! ```
//! use tracefold::foldt::foldt;
//! use tracefold::microlog::{bundled, parse_program, parse_query, Engine, LiveSource, SolveOptions};
//! use tracefold::monitors::count_calls;
//! use std::sync::Arc;
//!
//! let program = parse_program(bundled::QUEENS).unwrap();
//! let query = parse_query(&program, "main").unwrap();
//! let engine = Arc::new(Engine::new(program));
//! let live = LiveSource::spawn(engine, query, SolveOptions::default(), Box::new(std::io::sink()));
//! let outcome = foldt(live, &count_calls()).unwrap();
//! assert!(outcome.result > 0);
//! ```

pub mod cli;
pub mod event;
pub mod foldt;
pub mod microlog;
pub mod monitors;
pub mod trace_io;

pub use event::{Determinism, Event, GoalPathStep, Port, PredKey, ProcId, Term};
pub use foldt::{
    foldt, product, FoldError, FoldOutcome, Monitor, MonitorError, Session, StopReason,
};
pub use trace_io::{AttributeMask, EventFilter, TraceSink, TraceSource};
