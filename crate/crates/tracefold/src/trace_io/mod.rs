//! Event sources and sinks: attribute masks, per-module event filters,
//! recording to and replaying from trace files.

mod file;
mod filter;

use std::collections::VecDeque;
use std::fmt;
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::event::Event;

pub use file::{record, replay, FileSource, TraceHeader, TraceWriter, FORMAT_NAME, FORMAT_VERSION};
pub use filter::{EventFilter, FilterError, Granularity};

/// Which costly optional attributes are produced. The mandatory attributes
/// (chrono, call, depth, port, det, proc, goal_path) are always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AttributeMask {
    pub args: bool,
    pub arg_types: bool,
    pub local_vars: bool,
    pub line_number: bool,
}

impl AttributeMask {
    pub const NAMES: [&'static str; 4] = ["args", "arg_types", "local_vars", "line_number"];

    pub fn all() -> Self {
        AttributeMask {
            args: true,
            arg_types: true,
            local_vars: true,
            line_number: true,
        }
    }

    pub fn none() -> Self {
        AttributeMask {
            args: false,
            arg_types: false,
            local_vars: false,
            line_number: false,
        }
    }

    /// Enabled attribute names, in canonical order.
    pub fn names(&self) -> Vec<&'static str> {
        let flags = [self.args, self.arg_types, self.local_vars, self.line_number];
        Self::NAMES
            .iter()
            .zip(flags)
            .filter_map(|(n, on)| on.then_some(*n))
            .collect()
    }

    /// Builds a mask from attribute names. Mandatory attribute names are
    /// accepted and ignored; anything else is an error.
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self, MaskError> {
        let mut mask = AttributeMask::none();
        for name in names {
            match name.trim() {
                "args" => mask.args = true,
                "arg_types" => mask.arg_types = true,
                "local_vars" => mask.local_vars = true,
                "line_number" | "line" => mask.line_number = true,
                "chrono" | "call" | "depth" | "port" | "det" | "proc" | "goal_path" | "" => {}
                other => return Err(MaskError(other.to_string())),
            }
        }
        Ok(mask)
    }

    pub fn with_line_number(mut self) -> Self {
        self.line_number = true;
        self
    }

    pub fn with_args(mut self) -> Self {
        self.args = true;
        self
    }
}

/// Everything except the live arguments and line numbers, the two
/// attributes that are expensive to retrieve.
impl Default for AttributeMask {
    fn default() -> Self {
        AttributeMask {
            args: false,
            arg_types: true,
            local_vars: true,
            line_number: false,
        }
    }
}

impl fmt::Display for AttributeMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(","))
    }
}

impl FromStr for AttributeMask {
    type Err = MaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" => Ok(AttributeMask::all()),
            "none" => Ok(AttributeMask::none()),
            s => AttributeMask::from_names(s.split(',')),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown optional attribute `{0}` (expected args, arg_types, local_vars, line_number)")]
pub struct MaskError(pub String);

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unsupported trace version {found} (this build reads version {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}:{line}: malformed trace record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("trace integrity violated at chrono {chrono}: {message}")]
    Integrity { chrono: u64, message: String },
    #[error("live trace producer failed: {0}")]
    Producer(String),
}

/// A pull-based, single-consumer stream of events in increasing chrono order.
pub trait TraceSource {
    /// The next event, or `None` at end of trace.
    fn next_event(&mut self) -> Result<Option<Event>, TraceError>;
}

impl<S: TraceSource + ?Sized> TraceSource for Box<S> {
    fn next_event(&mut self) -> Result<Option<Event>, TraceError> {
        (**self).next_event()
    }
}

impl<S: TraceSource + ?Sized> TraceSource for &mut S {
    fn next_event(&mut self) -> Result<Option<Event>, TraceError> {
        (**self).next_event()
    }
}

/// A push-based consumer of events. Returning `Break` asks the producer to stop.
pub trait TraceSink {
    fn accept(&mut self, event: Event) -> ControlFlow<()>;
}

impl TraceSink for Vec<Event> {
    fn accept(&mut self, event: Event) -> ControlFlow<()> {
        self.push(event);
        ControlFlow::Continue(())
    }
}

impl<K: TraceSink + ?Sized> TraceSink for &mut K {
    fn accept(&mut self, event: Event) -> ControlFlow<()> {
        (**self).accept(event)
    }
}

/// Drops every event.
#[derive(Debug, Default, Clone, Copy)]
pub struct Discard;

impl TraceSink for Discard {
    fn accept(&mut self, _event: Event) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

/// Counts events and drops them.
#[derive(Debug, Default, Clone, Copy)]
pub struct CountingSink(pub u64);

impl TraceSink for CountingSink {
    fn accept(&mut self, _event: Event) -> ControlFlow<()> {
        self.0 += 1;
        ControlFlow::Continue(())
    }
}

/// In-memory trace.
#[derive(Debug, Default, Clone)]
pub struct VecSource {
    events: VecDeque<Event>,
}

impl VecSource {
    pub fn new(events: impl IntoIterator<Item = Event>) -> Self {
        VecSource {
            events: events.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.events.len()
    }
}

impl TraceSource for VecSource {
    fn next_event(&mut self) -> Result<Option<Event>, TraceError> {
        Ok(self.events.pop_front())
    }
}

/// Passes through only the events admitted by an [`EventFilter`]. Chrono
/// values are left as they were.
pub struct Filtered<S> {
    inner: S,
    filter: EventFilter,
}

pub fn filtered<S: TraceSource>(source: S, filter: EventFilter) -> Filtered<S> {
    Filtered {
        inner: source,
        filter,
    }
}

impl<S: TraceSource> TraceSource for Filtered<S> {
    fn next_event(&mut self) -> Result<Option<Event>, TraceError> {
        while let Some(e) = self.inner.next_event()? {
            if self.filter.admits(&e.proc.decl_module, e.port) {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }
}

/// Drops optional attributes not enabled in the mask.
pub struct Masked<S> {
    inner: S,
    mask: AttributeMask,
}

pub fn masked<S: TraceSource>(source: S, mask: AttributeMask) -> Masked<S> {
    Masked {
        inner: source,
        mask,
    }
}

impl<S: TraceSource> TraceSource for Masked<S> {
    fn next_event(&mut self) -> Result<Option<Event>, TraceError> {
        Ok(self.inner.next_event()?.map(|e| e.masked(self.mask)))
    }
}

/// Writes every event it yields to a [`TraceWriter`].
pub struct Tee<S> {
    inner: S,
    writer: TraceWriter,
}

impl<S: TraceSource> Tee<S> {
    pub fn new(inner: S, writer: TraceWriter) -> Self {
        Tee { inner, writer }
    }

    /// Drains whatever the consumer did not pull, then flushes the file.
    pub fn finish(mut self) -> Result<(S, u64), TraceError> {
        while self.next_event()?.is_some() {}
        let n = self.writer.finish()?;
        Ok((self.inner, n))
    }
}

impl<S: TraceSource> TraceSource for Tee<S> {
    fn next_event(&mut self) -> Result<Option<Event>, TraceError> {
        let e = self.inner.next_event()?;
        if let Some(e) = &e {
            self.writer.write_event(e)?;
        }
        Ok(e)
    }
}

/// Collects a whole source into memory.
pub fn drain(mut source: impl TraceSource) -> Result<Vec<Event>, TraceError> {
    let mut out = Vec::new();
    while let Some(e) = source.next_event()? {
        out.push(e);
    }
    Ok(out)
}
