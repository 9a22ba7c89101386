//! A small Prolog-like interpreter instrumented to emit Byrd-box events.
//!
//! Supported: facts, rules, conjunction, disjunction, if-then-else (committed
//! condition), `=/2`, `is/2`, integer comparisons, `write/1`, `nl/0`, lists
//! and determinism declarations `:- determinism name/arity is nondet.`.
//! Cut, negation and the database builtins are rejected at parse time.

mod check;
mod engine;
mod live;
mod parser;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::event::{Determinism, PredKey, Term};

pub use check::{
    byrd_violations, determinism_warnings, trace_invariant_violations, DeterminismWarning,
};
pub use engine::{solve, Engine, SolveError, SolveOptions, SolveOutcome};
pub use live::LiveSource;
pub use parser::{parse_program, parse_query};

/// Module name reported for built-in predicates.
pub const BUILTIN_MODULE: &str = "builtin";

/// A clause-level term. Variables are numbered per clause (or per query).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PTerm {
    Var(u32),
    Int(i64),
    Atom(Arc<str>),
    Struct(Arc<str>, Vec<PTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Goal {
    Call {
        pred: PredKey,
        args: Vec<PTerm>,
        line: u32,
    },
    Conj(Vec<Goal>),
    Disj {
        branches: Vec<Goal>,
        line: u32,
    },
    IfThenElse {
        cond: Box<Goal>,
        then: Box<Goal>,
        els: Box<Goal>,
        line: u32,
    },
    True {
        line: u32,
    },
    Fail {
        line: u32,
    },
    Unify(PTerm, PTerm, u32),
    Builtin {
        name: String,
        args: Vec<PTerm>,
        line: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub head: PredKey,
    pub head_args: Vec<PTerm>,
    /// `None` for facts.
    pub body: Option<Goal>,
    /// Name of each clause variable, `_` for anonymous ones.
    pub var_names: Vec<String>,
    pub line: u32,
}

/// A call site in a clause body.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallSite {
    pub caller: PredKey,
    pub callee: PredKey,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub module: String,
    pub clauses: Vec<Clause>,
    /// Declared determinism per predicate.
    pub determinism: BTreeMap<PredKey, Determinism>,
    /// User predicates in order of first definition.
    pub predicates: Vec<PredKey>,
    /// Every body call site of a user predicate or builtin.
    pub call_sites: Vec<CallSite>,
}

impl Program {
    pub fn is_defined(&self, key: &PredKey) -> bool {
        self.predicates.contains(key)
    }

    /// Declared determinism; builtins use the builtin table, undeclared
    /// user predicates default to `nondet`.
    pub fn determinism_of(&self, key: &PredKey) -> Determinism {
        if let Some(d) = self.determinism.get(key) {
            return *d;
        }
        builtin_determinism(key).unwrap_or(Determinism::Nondet)
    }

    pub fn clauses_of<'a>(&'a self, key: &'a PredKey) -> impl Iterator<Item = &'a Clause> + 'a {
        self.clauses.iter().filter(move |c| &c.head == key)
    }
}

/// A parsed top-level query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub goal: Goal,
    pub var_names: Vec<String>,
    pub text: String,
}

/// Bindings of the named query variables, in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub bindings: Vec<(String, Term)>,
}

impl Solution {
    pub fn get(&self, name: &str) -> Option<&Term> {
        self.bindings
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bindings.is_empty() {
            return f.write_str("true");
        }
        for (i, (n, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n} = {t}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: u32,
        col: u32,
        message: String,
    },
    #[error("{line}:{col}: unsupported construct: {construct}")]
    Unsupported {
        construct: String,
        line: u32,
        col: u32,
    },
    #[error("{line}: call to undefined predicate {pred}")]
    Undefined { pred: PredKey, line: u32 },
    #[error("{line}: determinism declared for unknown predicate {pred}")]
    UnknownDeclaration { pred: PredKey, line: u32 },
    #[error("{line}: conflicting determinism declarations for {pred}")]
    DuplicateDeclaration { pred: PredKey, line: u32 },
    #[error("{line}: cannot redefine builtin {pred}")]
    BuiltinRedefinition { pred: PredKey, line: u32 },
}

const BUILTINS: &[(&str, u32, Determinism)] = &[
    ("is", 2, Determinism::Det),
    ("=", 2, Determinism::Semidet),
    ("<", 2, Determinism::Semidet),
    (">", 2, Determinism::Semidet),
    ("=<", 2, Determinism::Semidet),
    (">=", 2, Determinism::Semidet),
    ("=:=", 2, Determinism::Semidet),
    ("=\\=", 2, Determinism::Semidet),
    ("true", 0, Determinism::Det),
    ("fail", 0, Determinism::Failure),
    ("write", 1, Determinism::Det),
    ("nl", 0, Determinism::Det),
];

/// Built-in predicates and their determinism. Builtins trace only their
/// external events, under module `builtin`.
pub fn builtin_table() -> BTreeMap<PredKey, Determinism> {
    BUILTINS
        .iter()
        .map(|&(n, a, d)| (PredKey::new(n, a), d))
        .collect()
}

pub fn builtin_determinism(key: &PredKey) -> Option<Determinism> {
    BUILTINS
        .iter()
        .find(|(n, a, _)| *n == key.name && *a == key.arity)
        .map(|&(_, _, d)| d)
}

pub fn is_builtin(key: &PredKey) -> bool {
    builtin_determinism(key).is_some()
}

/// Programs shipped with the crate.
pub mod bundled {
    pub const QUEENS: &str = include_str!("../../programs/queens.mlg");
    pub const QSORT: &str = include_str!("../../programs/qsort.mlg");
    pub const QDELETE: &str = include_str!("../../programs/qdelete.mlg");
    pub const CALL_SITES: &str = include_str!("../../programs/call_sites.mlg");
    pub const ERRORS: &str = include_str!("../../programs/errors.mlg");

    /// `(file name, source, default query)` for each bundled program.
    pub const ALL: &[(&str, &str, &str)] = &[
        ("queens.mlg", QUEENS, "main"),
        ("qsort.mlg", QSORT, "main"),
        ("qdelete.mlg", QDELETE, "main"),
        ("call_sites.mlg", CALL_SITES, "main"),
    ];

    pub fn lookup(file_name: &str) -> Option<&'static str> {
        ALL.iter()
            .chain(std::iter::once(&("errors.mlg", ERRORS, "main")))
            .find(|(n, _, _)| *n == file_name)
            .map(|(_, s, _)| *s)
    }
}
