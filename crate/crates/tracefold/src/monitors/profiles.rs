use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::event::{Event, Port, Term};
use crate::foldt::{Monitor, MonitorError};

/// Counts `call` events.
#[derive(Debug, Clone, Copy, Default)]
pub struct CountCalls;

pub fn count_calls() -> CountCalls {
    CountCalls
}

impl Monitor for CountCalls {
    type Acc = u64;
    type Output = u64;

    fn initialize(&self) -> u64 {
        0
    }

    fn collect(&self, event: &Event, acc: &mut u64) -> Result<(), MonitorError> {
        if event.port == Port::Call {
            *acc += 1;
        }
        Ok(())
    }

    fn post_process(&self, acc: u64) -> u64 {
        acc
    }
}

/// Number of events per port. Every port is present, possibly with zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortCounts(pub BTreeMap<Port, u64>);

impl PortCounts {
    pub fn get(&self, port: Port) -> u64 {
        self.0.get(&port).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

impl fmt::Display for PortCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (port, n)) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{port}: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PortHistogram;

pub fn port_histogram() -> PortHistogram {
    PortHistogram
}

impl Monitor for PortHistogram {
    type Acc = BTreeMap<Port, u64>;
    type Output = PortCounts;

    fn initialize(&self) -> Self::Acc {
        Port::ALL.iter().map(|&p| (p, 0)).collect()
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        *acc.entry(event.port).or_insert(0) += 1;
        Ok(())
    }

    fn post_process(&self, acc: Self::Acc) -> PortCounts {
        PortCounts(acc)
    }
}

/// Number of calls per depth.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DepthCounts(pub BTreeMap<u32, u64>);

impl DepthCounts {
    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

impl fmt::Display for DepthCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("no calls");
        }
        for (i, (depth, n)) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "depth {depth}: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DepthHistogram;

pub fn depth_histogram() -> DepthHistogram {
    DepthHistogram
}

impl Monitor for DepthHistogram {
    type Acc = BTreeMap<u32, u64>;
    type Output = DepthCounts;

    fn initialize(&self) -> Self::Acc {
        BTreeMap::new()
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        if event.port == Port::Call {
            *acc.entry(event.depth).or_insert(0) += 1;
        }
        Ok(())
    }

    fn post_process(&self, acc: Self::Acc) -> DepthCounts {
        DepthCounts(acc)
    }
}

/// Distinct `(procedure name, arguments)` pairs seen at `exit` events.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SolutionSet(pub BTreeSet<(String, Vec<Term>)>);

impl SolutionSet {
    pub fn contains(&self, name: &str, args: &[Term]) -> bool {
        self.0.contains(&(name.to_string(), args.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for SolutionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("no solutions");
        }
        for (i, (name, args)) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}", Term::Compound(name.clone(), args.clone()))?;
        }
        Ok(())
    }
}

/// Needs the `args` attribute.
#[derive(Debug, Clone, Copy, Default)]
pub struct CollectSolutions;

pub fn collect_solutions() -> CollectSolutions {
    CollectSolutions
}

impl Monitor for CollectSolutions {
    type Acc = BTreeSet<(String, Vec<Term>)>;
    type Output = SolutionSet;

    fn initialize(&self) -> Self::Acc {
        BTreeSet::new()
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        if event.port == Port::Exit {
            acc.insert((event.proc.name.clone(), event.args()?.to_vec()));
        }
        Ok(())
    }

    fn post_process(&self, acc: Self::Acc) -> SolutionSet {
        SolutionSet(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DepthInterval {
    pub events: u64,
    pub max_depth: u32,
}

impl fmt::Display for DepthInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "The maximal depth is {} ({} events)",
            self.max_depth, self.events
        )
    }
}

/// Maximal depth over at most `n` events; refuses the event after that, so
/// repeated runs give one result per interval.
#[derive(Debug, Clone, Copy)]
pub struct MaxDepthInterval {
    pub n: u64,
}

pub const DEFAULT_INTERVAL: u64 = 500;

pub fn max_depth_interval(n: u64) -> MaxDepthInterval {
    assert!(n > 0, "interval length must be positive");
    MaxDepthInterval { n }
}

impl Monitor for MaxDepthInterval {
    type Acc = DepthInterval;
    type Output = DepthInterval;

    fn initialize(&self) -> DepthInterval {
        DepthInterval::default()
    }

    fn accepts(&self, _event: &Event, acc: &DepthInterval) -> Result<bool, MonitorError> {
        Ok(acc.events < self.n)
    }

    fn collect(&self, event: &Event, acc: &mut DepthInterval) -> Result<(), MonitorError> {
        acc.events += 1;
        acc.max_depth = acc.max_depth.max(event.depth);
        Ok(())
    }

    fn post_process(&self, acc: DepthInterval) -> DepthInterval {
        acc
    }
}
