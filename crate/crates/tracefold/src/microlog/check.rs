//! Conformance checks over complete, unfiltered traces.

use std::collections::HashMap;
use std::fmt;

use crate::event::{Determinism, Event, Port, PredKey};

#[derive(Clone, Copy, PartialEq, Eq)]
enum BoxState {
    Active,
    Exited,
    Closed,
}

/// Checks every procedure box against the port automaton
/// `call (exit redo)* (fail | exception)?` with internal events only while
/// the box is active. Returns one message per violation.
pub fn byrd_violations(events: &[Event]) -> Vec<String> {
    let mut boxes: HashMap<u64, BoxState> = HashMap::new();
    let mut out = Vec::new();
    for e in events {
        let state = boxes.get(&e.call).copied();
        let next = match (state, e.port) {
            (None, Port::Call) => Some(BoxState::Active),
            (Some(_), Port::Call) => None,
            (Some(BoxState::Active), Port::Exit) => Some(BoxState::Exited),
            (Some(BoxState::Active), Port::Fail | Port::Exception) => Some(BoxState::Closed),
            (Some(BoxState::Exited), Port::Redo) => Some(BoxState::Active),
            // An exception can unwind a box that already exited once.
            (Some(BoxState::Exited), Port::Exception) => Some(BoxState::Closed),
            (Some(BoxState::Active), p) if !p.is_external() => Some(BoxState::Active),
            _ => None,
        };
        match next {
            Some(s) => {
                boxes.insert(e.call, s);
            }
            None => out.push(format!(
                "chrono {}: unexpected {} for call {} ({})",
                e.chrono, e.port, e.call, e.proc
            )),
        }
    }
    out
}

/// Structural invariants: strictly increasing chrono, new call numbers
/// increasing, constant depth and procedure per call number.
pub fn trace_invariant_violations(events: &[Event]) -> Vec<String> {
    let mut out = Vec::new();
    let mut last_chrono = 0;
    let mut last_call = 0;
    let mut seen: HashMap<u64, (u32, PredKey)> = HashMap::new();
    for e in events {
        if e.chrono <= last_chrono {
            out.push(format!(
                "chrono {} does not follow {}",
                e.chrono, last_chrono
            ));
        }
        last_chrono = e.chrono;
        match seen.get(&e.call) {
            None => {
                if e.call <= last_call {
                    out.push(format!(
                        "chrono {}: call number {} reused or out of order",
                        e.chrono, e.call
                    ));
                }
                last_call = last_call.max(e.call);
                seen.insert(e.call, (e.depth, PredKey::of(e)));
            }
            Some((depth, key)) => {
                if *depth != e.depth || *key != PredKey::of(e) {
                    out.push(format!(
                        "chrono {}: call {} changed depth or procedure",
                        e.chrono, e.call
                    ));
                }
            }
        }
    }
    out
}

/// A call whose observed exits and failures contradict its declared
/// determinism. Reported, never enforced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminismWarning {
    pub call: u64,
    pub pred: PredKey,
    pub det: Determinism,
    pub exits: u32,
    pub fails: u32,
}

impl fmt::Display for DeterminismWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "call {} of {} is declared {} but exited {} time(s) and failed {} time(s)",
            self.call, self.pred, self.det, self.exits, self.fails
        )
    }
}

pub fn determinism_warnings(events: &[Event]) -> Vec<DeterminismWarning> {
    let mut counts: HashMap<u64, (u32, u32, Determinism, PredKey)> = HashMap::new();
    let mut order = Vec::new();
    for e in events {
        let entry = counts.entry(e.call).or_insert_with(|| {
            order.push(e.call);
            (0, 0, e.det, PredKey::of(e))
        });
        match e.port {
            Port::Exit => entry.0 += 1,
            Port::Fail => entry.1 += 1,
            _ => {}
        }
    }
    order
        .into_iter()
        .filter_map(|call| {
            let (exits, fails, det, pred) = counts.remove(&call)?;
            let bad = match det {
                Determinism::Det => exits > 1 || (fails > 0 && exits == 0),
                Determinism::Semidet => exits > 1,
                Determinism::Multi => fails > 0 && exits == 0,
                Determinism::Nondet => false,
                Determinism::Failure => exits > 0,
                Determinism::Erroneous => exits > 0 || fails > 0,
            };
            bad.then_some(DeterminismWarning {
                call,
                pred,
                det,
                exits,
                fails,
            })
        })
        .collect()
}
