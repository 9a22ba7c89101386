use std::any::Any;
use std::fmt;

use crate::event::Event;

use super::{Monitor, MonitorError};

trait DynMonitor {
    fn initialize(&self) -> Box<dyn Any>;
    fn accepts(&self, event: &Event, acc: &dyn Any) -> Result<bool, MonitorError>;
    fn collect(&self, event: &Event, acc: &mut dyn Any) -> Result<(), MonitorError>;
    fn report(&self, acc: Box<dyn Any>) -> String;
}

struct Erased<M, R> {
    monitor: M,
    render: R,
}

impl<M, R> DynMonitor for Erased<M, R>
where
    M: Monitor,
    M::Acc: 'static,
    R: Fn(M::Output) -> String,
{
    fn initialize(&self) -> Box<dyn Any> {
        Box::new(self.monitor.initialize())
    }

    fn accepts(&self, event: &Event, acc: &dyn Any) -> Result<bool, MonitorError> {
        self.monitor
            .accepts(event, acc.downcast_ref().expect("accumulator type"))
    }

    fn collect(&self, event: &Event, acc: &mut dyn Any) -> Result<(), MonitorError> {
        self.monitor
            .collect(event, acc.downcast_mut().expect("accumulator type"))
    }

    fn report(&self, acc: Box<dyn Any>) -> String {
        let acc = *acc.downcast::<M::Acc>().expect("accumulator type");
        (self.render)(self.monitor.post_process(acc))
    }
}

/// A named monitor with its accumulator type erased and its result
/// rendered as text.
pub struct BoxedMonitor {
    name: String,
    inner: Box<dyn DynMonitor>,
}

impl BoxedMonitor {
    pub fn new<M, R>(name: impl Into<String>, monitor: M, render: R) -> Self
    where
        M: Monitor + 'static,
        M::Acc: 'static,
        R: Fn(M::Output) -> String + 'static,
    {
        BoxedMonitor {
            name: name.into(),
            inner: Box::new(Erased { monitor, render }),
        }
    }

    /// Renders the result with its `Display` implementation.
    pub fn display<M>(name: impl Into<String>, monitor: M) -> Self
    where
        M: Monitor + 'static,
        M::Acc: 'static,
        M::Output: fmt::Display,
    {
        BoxedMonitor::new(name, monitor, |o: M::Output| o.to_string())
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for BoxedMonitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoxedMonitor")
            .field("name", &self.name)
            .finish()
    }
}

impl Monitor for BoxedMonitor {
    type Acc = Box<dyn Any>;
    type Output = String;

    fn initialize(&self) -> Self::Acc {
        self.inner.initialize()
    }

    fn accepts(&self, event: &Event, acc: &Self::Acc) -> Result<bool, MonitorError> {
        self.inner.accepts(event, acc.as_ref())
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        self.inner.collect(event, acc.as_mut())
    }

    fn post_process(&self, acc: Self::Acc) -> String {
        self.inner.report(acc)
    }
}

/// The product of any number of named monitors. Continues while every
/// member accepts; the result lists each member's report in order.
#[derive(Debug, Default)]
pub struct MonitorSet {
    members: Vec<BoxedMonitor>,
}

impl MonitorSet {
    pub fn new(members: Vec<BoxedMonitor>) -> Self {
        MonitorSet { members }
    }

    pub fn push(&mut self, member: BoxedMonitor) {
        self.members.push(member);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|m| m.name())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl Monitor for MonitorSet {
    type Acc = Vec<Box<dyn Any>>;
    type Output = Vec<(String, String)>;

    fn initialize(&self) -> Self::Acc {
        self.members.iter().map(|m| m.initialize()).collect()
    }

    fn accepts(&self, event: &Event, acc: &Self::Acc) -> Result<bool, MonitorError> {
        for (m, a) in self.members.iter().zip(acc) {
            if !m.accepts(event, a)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn collect(&self, event: &Event, acc: &mut Self::Acc) -> Result<(), MonitorError> {
        for (m, a) in self.members.iter().zip(acc.iter_mut()) {
            m.collect(event, a)?;
        }
        Ok(())
    }

    fn post_process(&self, acc: Self::Acc) -> Self::Output {
        self.members
            .iter()
            .zip(acc)
            .map(|(m, a)| (m.name().to_string(), m.post_process(a)))
            .collect()
    }
}
