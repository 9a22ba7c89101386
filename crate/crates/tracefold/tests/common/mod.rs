#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use tracefold::event::{Determinism, Event, Port, ProcId};
use tracefold::foldt::{Monitor, MonitorError};
use tracefold::microlog::{bundled, parse_program, parse_query, Engine, SolveOptions};
use tracefold::trace_io::AttributeMask;

pub fn event(chrono: u64, call: u64, depth: u32, port: Port, name: &str, arity: u32) -> Event {
    Event {
        chrono,
        call,
        depth,
        port,
        det: Determinism::Nondet,
        proc: Arc::new(ProcId::predicate("synth", name, arity)),
        goal_path: vec![],
        args: None,
        arg_types: None,
        local_vars: None,
        line_number: None,
    }
}

const NAMES: &[(&str, u32)] = &[("p", 1), ("q", 2), ("r", 0), ("s", 3), ("t", 1)];

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    out: Vec<Event>,
    max: usize,
    calls: u64,
}

impl<R: Rng> Gen<'_, R> {
    fn push(&mut self, call: u64, depth: u32, port: Port, pred: (&str, u32)) {
        let chrono = self.out.len() as u64 + 1;
        self.out
            .push(event(chrono, call, depth, port, pred.0, pred.1));
    }

    /// Room for one more event while still closing `open` boxes.
    fn room(&self, open: usize) -> bool {
        self.out.len() + open + 1 < self.max
    }

    fn call(&mut self, depth: u32, open: usize) {
        self.calls += 1;
        let call = self.calls;
        let pred = NAMES[self.rng.gen_range(0..NAMES.len())];
        self.push(call, depth, Port::Call, pred);
        loop {
            while self.room(open + 1) && self.rng.gen_bool(0.6) {
                if self.rng.gen_bool(0.2) {
                    let port =
                        [Port::Cond, Port::Then, Port::Else, Port::Disj][self.rng.gen_range(0..4)];
                    self.push(call, depth, port, pred);
                } else if self.room(open + 2) {
                    self.call(depth + 1, open + 1);
                }
            }
            if self.rng.gen_bool(0.3) {
                self.push(call, depth, Port::Fail, pred);
                return;
            }
            self.push(call, depth, Port::Exit, pred);
            if !(self.room(open + 1) && self.rng.gen_bool(0.3)) {
                return;
            }
            self.push(call, depth, Port::Redo, pred);
        }
    }
}

/// A random trace of nested procedure boxes that follows the Byrd port
/// automaton, keeps a balanced call stack and has at most `max` events.
pub fn synthetic_trace(rng: &mut impl Rng, max: usize) -> Vec<Event> {
    assert!(max >= 2);
    let mut g = Gen {
        rng,
        out: Vec::new(),
        max,
        calls: 0,
    };
    while g.room(0) && (g.out.is_empty() || g.rng.gen_bool(0.5)) {
        g.call(1, 0);
    }
    g.out
}

pub struct Run {
    pub events: Vec<Event>,
    pub output: String,
}

/// Runs a bundled program's `main` with every event and the given mask.
pub fn run_bundled(file: &str, mask: AttributeMask) -> Run {
    run_source(
        bundled::lookup(file).expect("bundled program"),
        "main",
        mask,
        Some(1),
    )
}

pub fn run_source(
    src: &str,
    query: &str,
    mask: AttributeMask,
    max_solutions: Option<usize>,
) -> Run {
    let program = parse_program(src).expect("program parses");
    let query = parse_query(&program, query).expect("query parses");
    let engine = Engine::new(program);
    let options = SolveOptions {
        mask,
        max_solutions,
        ..SolveOptions::default()
    };
    let mut events = Vec::new();
    let mut output = Vec::new();
    engine
        .solve(&query, &options, &mut events, &mut output)
        .expect("program runs");
    Run {
        events,
        output: String::from_utf8(output).unwrap(),
    }
}

pub fn bundled_files() -> Vec<&'static str> {
    bundled::ALL.iter().map(|(f, _, _)| *f).collect()
}

/// Sums a per-port weight over accepted events and records their chronos.
/// Refuses events whose chrono is `residue` modulo `modulus`, once at least
/// `after` events were accepted in the current run.
#[derive(Debug, Clone)]
pub struct Probe {
    pub weights: [u64; 12],
    pub refuse: Option<(u64, u64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeResult {
    pub sum: u64,
    pub chronos: Vec<u64>,
    pub finished: bool,
}

impl Probe {
    pub fn refuses(&self, e: &Event, accepted: usize) -> bool {
        matches!(self.refuse, Some((m, r, after)) if accepted >= after && e.chrono % m == r)
    }

    pub fn weight(&self, e: &Event) -> u64 {
        self.weights[Port::ALL.iter().position(|&p| p == e.port).unwrap()]
    }
}

impl Monitor for Probe {
    type Acc = (u64, Vec<u64>);
    type Output = ProbeResult;

    fn initialize(&self) -> Self::Acc {
        (0, Vec::new())
    }

    fn accepts(&self, e: &Event, acc: &Self::Acc) -> Result<bool, MonitorError> {
        Ok(!self.refuses(e, acc.1.len()))
    }

    fn collect(&self, e: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        acc.0 += self.weight(e);
        acc.1.push(e.chrono);
        Ok(())
    }

    fn post_process(&self, (sum, chronos): Self::Acc) -> ProbeResult {
        ProbeResult {
            sum,
            chronos,
            finished: true,
        }
    }
}

/// Straight-line reading of the fold: accept events from `start` until one
/// is refused. Returns the result, the refused index and the next start.
pub fn reference(
    events: &[Event],
    start: usize,
    probe: &Probe,
) -> (ProbeResult, Option<usize>, usize) {
    let mut sum = 0;
    let mut chronos = Vec::new();
    for (i, e) in events.iter().enumerate().skip(start) {
        if probe.refuses(e, chronos.len()) {
            return (
                ProbeResult {
                    sum,
                    chronos,
                    finished: true,
                },
                Some(i),
                i + 1,
            );
        }
        sum += probe.weight(e);
        chronos.push(e.chrono);
    }
    (
        ProbeResult {
            sum,
            chronos,
            finished: true,
        },
        None,
        events.len(),
    )
}

impl Probe {
    pub fn random(rng: &mut impl Rng, stopping: bool) -> Probe {
        let mut weights = [0; 12];
        for w in &mut weights {
            *w = rng.gen_range(0..5);
        }
        let refuse = stopping.then(|| {
            let m = rng.gen_range(2..12);
            (m, rng.gen_range(0..m), rng.gen_range(0..20))
        });
        Probe { weights, refuse }
    }
}
