use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::event::{Determinism, Event, Port, PredKey};
use crate::foldt::{Monitor, MonitorError};
use crate::microlog::{is_builtin, Program};

/// Ports a predicate must show, given its determinism: one `exit` per
/// required success and a `fail` when failure is possible.
///
/// `failure` and `erroneous` are not in the classic table; `[fail]` and `[]`
/// are this crate's choice and are flagged in reports.
pub fn criteria_for(det: Determinism) -> Vec<Port> {
    match det {
        Determinism::Det => vec![Port::Exit],
        Determinism::Semidet => vec![Port::Exit, Port::Fail],
        Determinism::Multi => vec![Port::Exit, Port::Exit],
        Determinism::Nondet => vec![Port::Exit, Port::Exit, Port::Fail],
        Determinism::Failure => vec![Port::Fail],
        Determinism::Erroneous => vec![],
    }
}

fn is_extension(det: Determinism) -> bool {
    matches!(det, Determinism::Failure | Determinism::Erroneous)
}

/// Ports still to be seen for one key, plus the call numbers that exited.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredCriterion {
    pub seen_exit_calls: BTreeSet<u64>,
    pub remaining: Vec<Port>,
}

impl PredCriterion {
    pub fn new(remaining: Vec<Port>) -> Self {
        PredCriterion {
            seen_exit_calls: BTreeSet::new(),
            remaining,
        }
    }

    /// Applies an `exit` or `fail` of call `call`. Returns `true` once
    /// nothing remains.
    ///
    /// Before any exit was recorded, the port is simply ticked off. After
    /// that, an exit of an already exited call ticks off an exit; a fail of
    /// such a call ticks off nothing; an exit of a new call ticks off
    /// nothing but is recorded; a fail of a new call ticks off a fail.
    pub fn update(&mut self, port: Port, call: u64) -> bool {
        let remove = if self.seen_exit_calls.is_empty() {
            Some(port)
        } else if self.seen_exit_calls.contains(&call) {
            (port == Port::Exit).then_some(Port::Exit)
        } else {
            (port == Port::Fail).then_some(Port::Fail)
        };
        if let Some(p) = remove {
            if let Some(i) = self.remaining.iter().position(|&q| q == p) {
                self.remaining.remove(i);
            }
        }
        if self.remaining.is_empty() {
            return true;
        }
        if port == Port::Exit {
            self.seen_exit_calls.insert(call);
        }
        false
    }
}

/// What a coverage criterion is attached to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoverageKey {
    Pred(PredKey),
    Site {
        module: String,
        name: String,
        line: u32,
    },
}

impl fmt::Display for CoverageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverageKey::Pred(k) => write!(f, "{k}"),
            CoverageKey::Site { module, name, line } => write!(f, "{module}.{name}:{line}"),
        }
    }
}

/// Criteria still open. Covered keys are removed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageState {
    pub criteria: BTreeMap<CoverageKey, PredCriterion>,
    initial_ports: usize,
    initial_keys: usize,
    /// Keys whose criterion comes from `failure`/`erroneous` declarations.
    extensions: BTreeMap<CoverageKey, Determinism>,
}

impl CoverageState {
    /// Builds a state from keys and their determinism. Keys with an empty
    /// criterion (erroneous) count as covered from the start.
    pub fn from_determinisms(keys: impl IntoIterator<Item = (CoverageKey, Determinism)>) -> Self {
        let mut state = CoverageState::default();
        for (key, det) in keys {
            let ports = criteria_for(det);
            if is_extension(det) {
                state.extensions.insert(key.clone(), det);
            }
            state.initial_keys += 1;
            state.initial_ports += ports.len();
            if !ports.is_empty() {
                state.criteria.insert(key, PredCriterion::new(ports));
            }
        }
        state
    }

    pub fn get(&self, key: &CoverageKey) -> Option<&PredCriterion> {
        self.criteria.get(key)
    }

    pub fn remaining_ports(&self) -> usize {
        self.criteria.values().map(|c| c.remaining.len()).sum()
    }

    pub fn initial_ports(&self) -> usize {
        self.initial_ports
    }

    pub fn initial_keys(&self) -> usize {
        self.initial_keys
    }

    pub fn is_complete(&self) -> bool {
        self.criteria.is_empty()
    }

    /// Fraction of required ports that were seen. 1 when nothing is required.
    pub fn rate(&self) -> f64 {
        if self.initial_ports == 0 {
            return 1.0;
        }
        1.0 - self.remaining_ports() as f64 / self.initial_ports as f64
    }

    /// Fraction of keys fully covered. 1 when there are no keys.
    pub fn criterion_rate(&self) -> f64 {
        if self.initial_keys == 0 {
            return 1.0;
        }
        1.0 - self.criteria.len() as f64 / self.initial_keys as f64
    }

    fn apply(&mut self, key: &CoverageKey, port: Port, call: u64) {
        if let Some(c) = self.criteria.get_mut(key) {
            if c.update(port, call) {
                self.criteria.remove(key);
            }
        }
    }

    /// One line per open key, `key: remaining [exit, fail]`, then the rate.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (key, c) in &self.criteria {
            let ports: Vec<&str> = c.remaining.iter().map(|p| p.as_str()).collect();
            out.push_str(&format!("{key}: remaining [{}]", ports.join(", ")));
            if let Some(det) = self.extensions.get(key) {
                out.push_str(&format!(" (criterion for {det} is an extension)"));
            }
            out.push('\n');
        }
        out.push_str(&format!("rate: {:.1}%", self.rate() * 100.0));
        out
    }
}

impl fmt::Display for CoverageState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.report())
    }
}

/// One criterion per user predicate of the program.
pub fn generate_pred_criteria(program: &Program) -> CoverageState {
    CoverageState::from_determinisms(
        program
            .predicates
            .iter()
            .map(|k| (CoverageKey::Pred(k.clone()), program.determinism_of(k))),
    )
}

/// One criterion per call site of a user predicate.
pub fn generate_call_site_criteria(program: &Program) -> CoverageState {
    let mut keys = BTreeMap::new();
    for site in &program.call_sites {
        if is_builtin(&site.callee) {
            continue;
        }
        keys.insert(
            CoverageKey::Site {
                module: program.module.clone(),
                name: site.callee.name.clone(),
                line: site.line,
            },
            program.determinism_of(&site.callee),
        );
    }
    CoverageState::from_determinisms(keys)
}

/// Predicate coverage: criteria keyed by `name/arity`.
#[derive(Debug, Clone)]
pub struct PredicateCoverage {
    pub initial: CoverageState,
}

pub fn predicate_coverage(initial: CoverageState) -> PredicateCoverage {
    PredicateCoverage { initial }
}

impl Monitor for PredicateCoverage {
    type Acc = CoverageState;
    type Output = CoverageState;

    fn initialize(&self) -> CoverageState {
        self.initial.clone()
    }

    fn collect(&self, event: &Event, acc: &mut CoverageState) -> Result<(), MonitorError> {
        if matches!(event.port, Port::Exit | Port::Fail) {
            acc.apply(
                &CoverageKey::Pred(PredKey::of(event)),
                event.port,
                event.call,
            );
        }
        Ok(())
    }

    fn post_process(&self, acc: CoverageState) -> CoverageState {
        acc
    }
}

/// Call-site coverage: criteria keyed by `(module, name, line)` of the
/// call. Needs the `line_number` attribute.
#[derive(Debug, Clone)]
pub struct CallSiteCoverage {
    pub initial: CoverageState,
}

pub fn call_site_coverage(initial: CoverageState) -> CallSiteCoverage {
    CallSiteCoverage { initial }
}

impl Monitor for CallSiteCoverage {
    type Acc = CoverageState;
    type Output = CoverageState;

    fn initialize(&self) -> CoverageState {
        self.initial.clone()
    }

    fn collect(&self, event: &Event, acc: &mut CoverageState) -> Result<(), MonitorError> {
        if matches!(event.port, Port::Exit | Port::Fail) {
            let Some(line) = event.line_number()? else {
                return Ok(());
            };
            let key = CoverageKey::Site {
                module: event.proc.decl_module.clone(),
                name: event.proc.name.clone(),
                line,
            };
            acc.apply(&key, event.port, event.call);
        }
        Ok(())
    }

    fn post_process(&self, acc: CoverageState) -> CoverageState {
        acc
    }
}
