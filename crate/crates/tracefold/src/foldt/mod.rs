//! Folding monitors over traces.
//!
//! A [`Monitor`] is an `(initialize, collect, post_process)` triple. Running
//! it over a [`Session`] folds events into the accumulator until the trace
//! ends or the monitor refuses an event. A refused event is consumed: the
//! next run on the same session starts with the event after it.

mod erased;

use std::fmt;

use thiserror::Error;

use crate::event::{AttributeUnavailable, Event};
use crate::trace_io::{TraceError, TraceSource};

pub use erased::{BoxedMonitor, MonitorSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error(transparent)]
    AttributeUnavailable(#[from] AttributeUnavailable),
    #[error("malformed trace at chrono {chrono}: {message}")]
    Integrity { chrono: u64, message: String },
    #[error("collect is not a pure function of its inputs (diverged at chrono {chrono})")]
    Impure { chrono: u64 },
}

#[derive(Debug, Error)]
pub enum FoldError {
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Source(#[from] TraceError),
    #[error("the session has reached the end of the trace")]
    SessionClosed,
}

/// A batch trace analysis.
///
/// `accepts` decides whether the monitor continues with an event; it must
/// not depend on anything but its arguments. `collect` is only called on
/// accepted events. Splitting the two lets a product of monitors check all
/// guards before any accumulator changes.
pub trait Monitor {
    type Acc;
    type Output;

    fn initialize(&self) -> Self::Acc;

    fn accepts(&self, _event: &Event, _acc: &Self::Acc) -> Result<bool, MonitorError> {
        Ok(true)
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError>;

    fn post_process(&self, acc: Self::Acc) -> Self::Output;
}

impl<M: Monitor + ?Sized> Monitor for &M {
    type Acc = M::Acc;
    type Output = M::Output;

    fn initialize(&self) -> Self::Acc {
        (**self).initialize()
    }

    fn accepts(&self, event: &Event, acc: &Self::Acc) -> Result<bool, MonitorError> {
        (**self).accepts(event, acc)
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        (**self).collect(event, acc)
    }

    fn post_process(&self, acc: Self::Acc) -> Self::Output {
        (**self).post_process(acc)
    }
}

impl<M: Monitor + ?Sized> Monitor for Box<M> {
    type Acc = M::Acc;
    type Output = M::Output;

    fn initialize(&self) -> Self::Acc {
        (**self).initialize()
    }

    fn accepts(&self, event: &Event, acc: &Self::Acc) -> Result<bool, MonitorError> {
        (**self).accepts(event, acc)
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        (**self).collect(event, acc)
    }

    fn post_process(&self, acc: Self::Acc) -> Self::Output {
        (**self).post_process(acc)
    }
}

/// Why a fold run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    EndOfTrace,
    /// The monitor refused the event with this chrono.
    CollectFailed {
        chrono: u64,
    },
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::EndOfTrace => f.write_str("end of trace"),
            StopReason::CollectFailed { chrono } => write!(f, "collect failed at chrono {chrono}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldOutcome<T> {
    pub result: T,
    pub stop_reason: StopReason,
    /// Accepted events only; a refused event is not counted.
    pub events_consumed: u64,
}

impl<T> FoldOutcome<T> {
    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> FoldOutcome<U> {
        FoldOutcome {
            result: f(self.result),
            stop_reason: self.stop_reason,
            events_consumed: self.events_consumed,
        }
    }

    pub fn ended(&self) -> bool {
        self.stop_reason == StopReason::EndOfTrace
    }
}

/// A cursor over a trace, shared by successive fold runs.
pub struct Session<S> {
    source: S,
    last_chrono: Option<u64>,
    delivered: u64,
    closed: bool,
}

impl<S: TraceSource> Session<S> {
    pub fn new(source: S) -> Self {
        Session {
            source,
            last_chrono: None,
            delivered: 0,
            closed: false,
        }
    }

    /// Chrono of the last event taken from the source.
    pub fn last_chrono(&self) -> Option<u64> {
        self.last_chrono
    }

    /// Events taken from the source so far, accepted or refused.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn into_source(self) -> S {
        self.source
    }

    fn next(&mut self) -> Result<Option<Event>, FoldError> {
        let Some(e) = self.source.next_event()? else {
            self.closed = true;
            return Ok(None);
        };
        if let Some(last) = self.last_chrono {
            if e.chrono <= last {
                return Err(TraceError::Integrity {
                    chrono: e.chrono,
                    message: format!("chrono does not increase (previous event was {last})"),
                }
                .into());
            }
        }
        self.last_chrono = Some(e.chrono);
        self.delivered += 1;
        Ok(Some(e))
    }

    /// One fold run, from the current position.
    pub fn run_foldt<M: Monitor>(
        &mut self,
        monitor: &M,
    ) -> Result<FoldOutcome<M::Output>, FoldError> {
        if self.closed {
            return Err(FoldError::SessionClosed);
        }
        let mut acc = monitor.initialize();
        let mut consumed = 0;
        while let Some(e) = self.next()? {
            if !monitor.accepts(&e, &acc)? {
                return Ok(FoldOutcome {
                    result: monitor.post_process(acc),
                    stop_reason: StopReason::CollectFailed { chrono: e.chrono },
                    events_consumed: consumed,
                });
            }
            monitor.collect(&e, &mut acc)?;
            consumed += 1;
        }
        Ok(FoldOutcome {
            result: monitor.post_process(acc),
            stop_reason: StopReason::EndOfTrace,
            events_consumed: consumed,
        })
    }

    /// Runs the monitor again and again until the trace ends, calling
    /// `on_interval` after each run.
    pub fn run_to_completion<M: Monitor>(
        &mut self,
        monitor: &M,
        mut on_interval: impl FnMut(&FoldOutcome<M::Output>),
    ) -> Result<Vec<FoldOutcome<M::Output>>, FoldError> {
        let mut out = Vec::new();
        loop {
            let o = self.run_foldt(monitor)?;
            on_interval(&o);
            let ended = o.ended();
            out.push(o);
            if ended {
                return Ok(out);
            }
        }
    }
}

/// Folds a whole source once.
pub fn foldt<M: Monitor>(
    source: impl TraceSource,
    monitor: &M,
) -> Result<FoldOutcome<M::Output>, FoldError> {
    Session::new(source).run_foldt(monitor)
}

/// A single fold run driven by a producer that pushes events, for folding
/// in the producer's own thread. Asks the producer to stop when the monitor
/// refuses an event or fails.
pub struct FoldSink<'m, M: Monitor> {
    monitor: &'m M,
    acc: Option<M::Acc>,
    consumed: u64,
    stop: Option<StopReason>,
    error: Option<MonitorError>,
}

impl<'m, M: Monitor> FoldSink<'m, M> {
    pub fn new(monitor: &'m M) -> Self {
        FoldSink {
            monitor,
            acc: Some(monitor.initialize()),
            consumed: 0,
            stop: None,
            error: None,
        }
    }

    /// The outcome so far. Without a refusal the run counts as having
    /// reached the end of the trace.
    pub fn finish(mut self) -> Result<FoldOutcome<M::Output>, FoldError> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        let acc = self.acc.take().expect("accumulator present until finish");
        Ok(FoldOutcome {
            result: self.monitor.post_process(acc),
            stop_reason: self.stop.unwrap_or(StopReason::EndOfTrace),
            events_consumed: self.consumed,
        })
    }
}

impl<M: Monitor> crate::trace_io::TraceSink for FoldSink<'_, M> {
    fn accept(&mut self, event: Event) -> std::ops::ControlFlow<()> {
        use std::ops::ControlFlow;
        if self.stop.is_some() || self.error.is_some() {
            return ControlFlow::Break(());
        }
        let acc = self.acc.as_mut().expect("accumulator present until finish");
        let step = self.monitor.accepts(&event, acc).and_then(|ok| {
            if ok {
                self.monitor.collect(&event, acc).map(|()| true)
            } else {
                Ok(false)
            }
        });
        match step {
            Ok(true) => {
                self.consumed += 1;
                ControlFlow::Continue(())
            }
            Ok(false) => {
                self.stop = Some(StopReason::CollectFailed {
                    chrono: event.chrono,
                });
                ControlFlow::Break(())
            }
            Err(e) => {
                self.error = Some(e);
                ControlFlow::Break(())
            }
        }
    }
}

/// Two monitors folded at once. Continues while both accept.
#[derive(Debug, Clone, Copy, Default)]
pub struct Product<A, B>(pub A, pub B);

pub fn product<A: Monitor, B: Monitor>(a: A, b: B) -> Product<A, B> {
    Product(a, b)
}

impl<A: Monitor, B: Monitor> Monitor for Product<A, B> {
    type Acc = (A::Acc, B::Acc);
    type Output = (A::Output, B::Output);

    fn initialize(&self) -> Self::Acc {
        (self.0.initialize(), self.1.initialize())
    }

    fn accepts(&self, event: &Event, acc: &Self::Acc) -> Result<bool, MonitorError> {
        Ok(self.0.accepts(event, &acc.0)? && self.1.accepts(event, &acc.1)?)
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        self.0.collect(event, &mut acc.0)?;
        self.1.collect(event, &mut acc.1)
    }

    fn post_process(&self, acc: Self::Acc) -> Self::Output {
        (self.0.post_process(acc.0), self.1.post_process(acc.1))
    }
}

/// Accepts everything and keeps nothing. Used to measure the cost of the
/// fold machinery itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyMonitor;

impl Monitor for EmptyMonitor {
    type Acc = ();
    type Output = ();

    fn initialize(&self) {}

    fn collect(&self, _event: &Event, _acc: &mut ()) -> Result<(), MonitorError> {
        Ok(())
    }

    fn post_process(&self, _acc: ()) {}
}

type Guard<A> = fn(&Event, &A) -> Result<bool, MonitorError>;

fn always<A>(_: &Event, _: &A) -> Result<bool, MonitorError> {
    Ok(true)
}

/// A monitor assembled from closures.
#[derive(Clone)]
pub struct FnMonitor<I, G, C, P> {
    init: I,
    guard: G,
    collect: C,
    post: P,
}

/// Builds a monitor that accepts every event.
pub fn from_fns<A, O, I, C, P>(init: I, collect: C, post: P) -> FnMonitor<I, Guard<A>, C, P>
where
    I: Fn() -> A,
    C: Fn(&Event, &mut A) -> Result<(), MonitorError>,
    P: Fn(A) -> O,
{
    FnMonitor {
        init,
        guard: always::<A>,
        collect,
        post,
    }
}

impl<I, G, C, P> FnMonitor<I, G, C, P> {
    /// Replaces the acceptance test.
    pub fn with_guard<A, G2>(self, guard: G2) -> FnMonitor<I, G2, C, P>
    where
        G2: Fn(&Event, &A) -> Result<bool, MonitorError>,
    {
        FnMonitor {
            init: self.init,
            guard,
            collect: self.collect,
            post: self.post,
        }
    }
}

impl<A, O, I, G, C, P> Monitor for FnMonitor<I, G, C, P>
where
    I: Fn() -> A,
    G: Fn(&Event, &A) -> Result<bool, MonitorError>,
    C: Fn(&Event, &mut A) -> Result<(), MonitorError>,
    P: Fn(A) -> O,
{
    type Acc = A;
    type Output = O;

    fn initialize(&self) -> A {
        (self.init)()
    }

    fn accepts(&self, event: &Event, acc: &A) -> Result<bool, MonitorError> {
        (self.guard)(event, acc)
    }

    fn collect(&self, event: &Event, acc: &mut A) -> Result<(), MonitorError> {
        (self.collect)(event, acc)
    }

    fn post_process(&self, acc: A) -> O {
        (self.post)(acc)
    }
}

/// Runs `accepts` and `collect` twice on every event and fails if the two
/// results differ. Meant for tests and debug builds.
#[derive(Debug, Clone, Copy)]
pub struct Checked<M>(pub M);

impl<M> Monitor for Checked<M>
where
    M: Monitor,
    M::Acc: Clone + PartialEq,
{
    type Acc = M::Acc;
    type Output = M::Output;

    fn initialize(&self) -> M::Acc {
        self.0.initialize()
    }

    fn accepts(&self, event: &Event, acc: &M::Acc) -> Result<bool, MonitorError> {
        let first = self.0.accepts(event, acc)?;
        if self.0.accepts(event, acc)? != first {
            return Err(MonitorError::Impure {
                chrono: event.chrono,
            });
        }
        Ok(first)
    }

    fn collect(&self, event: &Event, acc: &mut M::Acc) -> Result<(), MonitorError> {
        let mut twin = acc.clone();
        self.0.collect(event, acc)?;
        self.0.collect(event, &mut twin)?;
        if *acc != twin {
            return Err(MonitorError::Impure {
                chrono: event.chrono,
            });
        }
        Ok(())
    }

    fn post_process(&self, acc: M::Acc) -> M::Output {
        self.0.post_process(acc)
    }
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;
    use crate::event::{Determinism, Port, ProcId};
    use crate::trace_io::VecSource;
    use std::sync::Arc;

    fn trace(n: u64) -> Vec<Event> {
        let proc = Arc::new(ProcId::predicate("m", "p", 0));
        (1..=n)
            .map(|i| Event {
                chrono: i,
                call: i,
                depth: 1,
                port: Port::Call,
                det: Determinism::Det,
                proc: proc.clone(),
                goal_path: vec![],
                args: None,
                arg_types: None,
                local_vars: None,
                line_number: None,
            })
            .collect()
    }

    type Counter = FnMonitor<
        fn() -> u64,
        Guard<u64>,
        fn(&Event, &mut u64) -> Result<(), MonitorError>,
        fn(u64) -> u64,
    >;

    fn counter() -> Counter {
        fn bump(_: &Event, n: &mut u64) -> Result<(), MonitorError> {
            *n += 1;
            Ok(())
        }
        from_fns(|| 0, bump, |n| n)
    }

    #[test]
    fn empty_trace_ends_immediately() {
        let o = foldt(VecSource::default(), &counter()).unwrap();
        assert_eq!(o.result, 0);
        assert_eq!(o.stop_reason, StopReason::EndOfTrace);
        assert_eq!(o.events_consumed, 0);
    }

    #[test]
    fn refusing_every_event() {
        let m = counter().with_guard(|_, _: &u64| Ok(false));
        let mut s = Session::new(VecSource::new(trace(10)));
        let o = s.run_foldt(&m).unwrap();
        assert_eq!(o.result, 0);
        assert_eq!(o.stop_reason, StopReason::CollectFailed { chrono: 1 });
        assert_eq!(o.events_consumed, 0);
        let o = s.run_foldt(&counter()).unwrap();
        assert_eq!(o.events_consumed, 9);
        assert!(matches!(
            s.run_foldt(&counter()),
            Err(FoldError::SessionClosed)
        ));
    }

    #[test]
    fn interval_runs() {
        let m = counter().with_guard(|_, n: &u64| Ok(*n < 500));
        let mut s = Session::new(VecSource::new(trace(1200)));
        let mut seen = Vec::new();
        let outs = s
            .run_to_completion(&m, |o| seen.push(o.events_consumed))
            .unwrap();
        assert_eq!(seen, [500, 500, 198]);
        assert_eq!(
            outs[0].stop_reason,
            StopReason::CollectFailed { chrono: 501 }
        );
        assert_eq!(
            outs[1].stop_reason,
            StopReason::CollectFailed { chrono: 1002 }
        );
        assert!(outs[2].ended());

        let mut s = Session::new(VecSource::new(trace(500)));
        let outs = s.run_to_completion(&m, |_| {}).unwrap();
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].events_consumed, 500);
    }

    #[test]
    fn product_stops_at_first_refusal() {
        let always = counter();
        let never = counter().with_guard(|_, _: &u64| Ok(false));
        let o = foldt(VecSource::new(trace(5)), &product(always, never)).unwrap();
        assert_eq!(o.result, (0, 0));
        assert_eq!(o.stop_reason, StopReason::CollectFailed { chrono: 1 });
    }

    #[test]
    fn checked_detects_impure_collect() {
        let calls = Cell::new(0u64);
        let m = from_fns(
            || 0u64,
            |_, n: &mut u64| {
                calls.set(calls.get() + 1);
                *n += calls.get();
                Ok(())
            },
            |n| n,
        );
        let err = foldt(VecSource::new(trace(3)), &Checked(m)).unwrap_err();
        assert!(matches!(
            err,
            FoldError::Monitor(MonitorError::Impure { chrono: 1 })
        ));
        assert!(foldt(VecSource::new(trace(3)), &Checked(counter())).is_ok());
    }

    #[test]
    fn non_monotone_sources_are_rejected() {
        let mut events = trace(3);
        events[2].chrono = 2;
        let err = foldt(VecSource::new(events), &counter()).unwrap_err();
        assert!(matches!(
            err,
            FoldError::Source(TraceError::Integrity { chrono: 2, .. })
        ));
    }
}
