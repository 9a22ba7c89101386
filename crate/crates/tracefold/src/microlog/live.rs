use std::collections::VecDeque;
use std::io::Write;
use std::ops::ControlFlow;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::event::Event;
use crate::trace_io::{TraceError, TraceSink, TraceSource};

use super::{Engine, Query, SolveError, SolveOptions, SolveOutcome};

const BATCH: usize = 256;

struct ChannelSink {
    tx: SyncSender<Vec<Event>>,
    buf: Vec<Event>,
}

impl ChannelSink {
    fn flush(&mut self) -> ControlFlow<()> {
        if self.buf.is_empty() {
            return ControlFlow::Continue(());
        }
        let batch = std::mem::replace(&mut self.buf, Vec::with_capacity(BATCH));
        match self.tx.send(batch) {
            Ok(()) => ControlFlow::Continue(()),
            Err(_) => ControlFlow::Break(()),
        }
    }
}

impl TraceSink for ChannelSink {
    fn accept(&mut self, event: Event) -> ControlFlow<()> {
        self.buf.push(event);
        if self.buf.len() >= BATCH {
            self.flush()
        } else {
            ControlFlow::Continue(())
        }
    }
}

/// Runs a query on a background thread and yields its events as a pull
/// source. Dropping the source early stops the interpreter.
pub struct LiveSource {
    rx: Option<Receiver<Vec<Event>>>,
    pending: VecDeque<Event>,
    handle: Option<JoinHandle<Result<SolveOutcome, SolveError>>>,
    outcome: Option<Result<SolveOutcome, SolveError>>,
}

impl LiveSource {
    pub fn spawn(
        engine: Arc<Engine>,
        query: Query,
        options: SolveOptions,
        mut out: Box<dyn Write + Send>,
    ) -> LiveSource {
        let (tx, rx) = sync_channel(16);
        let handle = std::thread::spawn(move || {
            let mut sink = ChannelSink {
                tx,
                buf: Vec::with_capacity(BATCH),
            };
            let result = engine.solve(&query, &options, &mut sink, &mut out);
            let _ = sink.flush();
            let _ = out.flush();
            result
        });
        LiveSource {
            rx: Some(rx),
            pending: VecDeque::new(),
            handle: Some(handle),
            outcome: None,
        }
    }

    fn join(&mut self) -> Result<(), TraceError> {
        self.rx = None;
        if let Some(h) = self.handle.take() {
            match h.join() {
                Ok(r) => self.outcome = Some(r),
                Err(_) => return Err(TraceError::Producer("interpreter thread panicked".into())),
            }
        }
        Ok(())
    }

    /// Stops the interpreter if it is still running and returns its result.
    /// A halted run reports `halted: true`.
    pub fn finish(mut self) -> Result<Result<SolveOutcome, SolveError>, TraceError> {
        self.pending.clear();
        self.join()?;
        Ok(self.outcome.take().expect("joined"))
    }
}

impl TraceSource for LiveSource {
    fn next_event(&mut self) -> Result<Option<Event>, TraceError> {
        loop {
            if let Some(e) = self.pending.pop_front() {
                return Ok(Some(e));
            }
            let Some(rx) = &self.rx else {
                return Ok(None);
            };
            match rx.recv() {
                Ok(batch) => self.pending.extend(batch),
                Err(_) => {
                    self.join()?;
                    return Ok(None);
                }
            }
        }
    }
}

impl Drop for LiveSource {
    fn drop(&mut self) {
        self.rx = None;
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
