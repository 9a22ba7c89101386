use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::event::Port;

/// How many events a module produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Granularity {
    All,
    ExternalOnly,
    None,
    /// An explicit port set. Must contain `call`.
    Ports(Vec<Port>),
}

impl Granularity {
    pub fn admits(&self, port: Port) -> bool {
        match self {
            Granularity::All => true,
            Granularity::ExternalOnly => port.is_external(),
            Granularity::None => false,
            Granularity::Ports(ports) => ports.contains(&port),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::All => f.write_str("all"),
            Granularity::ExternalOnly => f.write_str("external"),
            Granularity::None => f.write_str("none"),
            Granularity::Ports(ports) => {
                let names: Vec<_> = ports.iter().map(|p| p.as_str()).collect();
                f.write_str(&names.join("+"))
            }
        }
    }
}

impl FromStr for Granularity {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Granularity::All),
            "external" | "external-only" => Ok(Granularity::ExternalOnly),
            "none" => Ok(Granularity::None),
            other => other
                .split('+')
                .map(|p| p.parse::<Port>())
                .collect::<Result<Vec<_>, _>>()
                .map(Granularity::Ports)
                .map_err(|_| FilterError::Syntax(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("filter for module `{module}` admits {port} events but not calls: call events must be present")]
    MissingCalls { module: String, port: Port },
    #[error("cannot parse filter `{0}` (expected MODULE=all|external|none|port+port...)")]
    Syntax(String),
}

/// Per-module event granularity. Modules not mentioned use the default
/// granularity (all events unless changed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFilter {
    default: Granularity,
    modules: BTreeMap<String, Granularity>,
}

impl Default for EventFilter {
    fn default() -> Self {
        EventFilter::all()
    }
}

impl EventFilter {
    pub fn all() -> Self {
        EventFilter {
            default: Granularity::All,
            modules: BTreeMap::new(),
        }
    }

    /// No events from any module.
    pub fn nothing() -> Self {
        EventFilter {
            default: Granularity::None,
            modules: BTreeMap::new(),
        }
    }

    pub fn with_default(mut self, granularity: Granularity) -> Result<Self, FilterError> {
        check("*", &granularity)?;
        self.default = granularity;
        Ok(self)
    }

    pub fn with_module(
        mut self,
        module: impl Into<String>,
        granularity: Granularity,
    ) -> Result<Self, FilterError> {
        let module = module.into();
        check(&module, &granularity)?;
        self.modules.insert(module, granularity);
        Ok(self)
    }

    /// Parses `module=level` items. `*=level` sets the default.
    pub fn parse_specs<'a>(specs: impl IntoIterator<Item = &'a str>) -> Result<Self, FilterError> {
        let mut filter = EventFilter::all();
        for spec in specs {
            for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
                let (module, level) = item
                    .split_once('=')
                    .ok_or_else(|| FilterError::Syntax(item.to_string()))?;
                let level: Granularity = level.trim().parse()?;
                filter = if module.trim() == "*" {
                    filter.with_default(level)?
                } else {
                    filter.with_module(module.trim(), level)?
                };
            }
        }
        Ok(filter)
    }

    pub fn granularity(&self, module: &str) -> &Granularity {
        self.modules.get(module).unwrap_or(&self.default)
    }

    pub fn admits(&self, module: &str, port: Port) -> bool {
        self.granularity(module).admits(port)
    }

    pub fn is_identity(&self) -> bool {
        self.default == Granularity::All && self.modules.values().all(|g| *g == Granularity::All)
    }
}

fn check(module: &str, granularity: &Granularity) -> Result<(), FilterError> {
    if let Granularity::Ports(ports) = granularity {
        if !ports.contains(&Port::Call) {
            if let Some(&port) = ports.first() {
                return Err(FilterError::MissingCalls {
                    module: module.to_string(),
                    port,
                });
            }
        }
    }
    Ok(())
}
