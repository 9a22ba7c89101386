use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::event::{Event, Port, PredKey};
use crate::foldt::{Monitor, MonitorError};

/// A directed graph over predicates. In a counted graph each arc carries
/// the number of times it was traversed; otherwise arcs form a set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    arcs: BTreeMap<(PredKey, PredKey), u64>,
    counted: bool,
}

impl Graph {
    pub fn new(counted: bool) -> Self {
        Graph {
            arcs: BTreeMap::new(),
            counted,
        }
    }

    pub fn is_counted(&self) -> bool {
        self.counted
    }

    pub fn add_arc(&mut self, from: PredKey, to: PredKey) {
        let n = self.arcs.entry((from, to)).or_insert(0);
        *n = if self.counted { *n + 1 } else { 1 };
    }

    pub fn arcs(&self) -> impl Iterator<Item = (&PredKey, &PredKey, u64)> {
        self.arcs.iter().map(|((a, b), n)| (a, b, *n))
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn contains(&self, from: &PredKey, to: &PredKey) -> bool {
        self.count(from, to) > 0
    }

    /// Arc by predicate names only, ignoring arities.
    pub fn contains_names(&self, from: &str, to: &str) -> bool {
        self.arcs
            .keys()
            .any(|(a, b)| a.name == from && b.name == to)
    }

    pub fn count(&self, from: &PredKey, to: &PredKey) -> u64 {
        self.arcs
            .get(&(from.clone(), to.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn nodes(&self) -> BTreeSet<&PredKey> {
        self.arcs.keys().flat_map(|(a, b)| [a, b]).collect()
    }

    /// DOT text with arcs in sorted order. Counted graphs label each arc
    /// with its count.
    pub fn to_dot(&self, title: &str) -> String {
        let mut out = String::new();
        writeln!(out, "digraph {} {{", dot_id(title)).unwrap();
        for ((a, b), n) in &self.arcs {
            let (a, b) = (dot_id(&a.to_string()), dot_id(&b.to_string()));
            if self.counted {
                writeln!(out, "  {a} -> {b} [label=\"{n}\"];").unwrap();
            } else {
                writeln!(out, "  {a} -> {b};").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}

fn dot_id(s: &str) -> String {
    if !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !s.starts_with(|c: char| c.is_ascii_digit())
    {
        return s.to_string();
    }
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dot("trace"))
    }
}

/// Control moves between predicates: an arc from the predicate of the
/// previous `call`/`exit`/`fail`/`redo` event to the current one.
#[derive(Debug, Clone, Copy, Default)]
pub struct ControlFlowGraph {
    pub counted: bool,
}

pub fn control_flow_graph(counted: bool) -> ControlFlowGraph {
    ControlFlowGraph { counted }
}

impl Monitor for ControlFlowGraph {
    type Acc = (PredKey, Graph);
    type Output = Graph;

    fn initialize(&self) -> Self::Acc {
        (PredKey::user(), Graph::new(self.counted))
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        if matches!(
            event.port,
            Port::Call | Port::Exit | Port::Fail | Port::Redo
        ) {
            let cur = PredKey::of(event);
            let prev = std::mem::replace(&mut acc.0, cur.clone());
            acc.1.add_arc(prev, cur);
        }
        Ok(())
    }

    fn post_process(&self, acc: Self::Acc) -> Graph {
        acc.1
    }
}

/// Who calls whom: an arc from the caller on top of the call stack to each
/// called predicate. The stack starts with `user/0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DynamicCallGraph;

pub fn dynamic_call_graph() -> DynamicCallGraph {
    DynamicCallGraph
}

/// Applies one event to a predicate call stack: push at `call` and `redo`,
/// pop at `exit`, `fail` and `exception`.
pub fn update_call_stack(stack: &mut Vec<PredKey>, event: &Event) -> Result<(), MonitorError> {
    match event.port {
        Port::Call | Port::Redo => stack.push(PredKey::of(event)),
        Port::Exit | Port::Fail | Port::Exception => {
            if stack.len() <= 1 {
                return Err(MonitorError::Integrity {
                    chrono: event.chrono,
                    message: format!("{} event with an empty call stack", event.port),
                });
            }
            stack.pop();
        }
        _ => {}
    }
    Ok(())
}

impl Monitor for DynamicCallGraph {
    type Acc = (Vec<PredKey>, Graph);
    type Output = Graph;

    fn initialize(&self) -> Self::Acc {
        (vec![PredKey::user()], Graph::new(false))
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        if event.port == Port::Call {
            let top = acc.0.last().cloned().unwrap_or_else(PredKey::user);
            acc.1.add_arc(top, PredKey::of(event));
        }
        update_call_stack(&mut acc.0, event)
    }

    fn post_process(&self, acc: Self::Acc) -> Graph {
        acc.1
    }
}
