//! Trace event vocabulary: ports, determinism markers, procedure identities,
//! goal paths, term values and the [`Event`] record itself.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::trace_io::AttributeMask;

/// Kind of an execution event.
///
/// External ports mark crossings of a procedure box; internal ports mark
/// branch entries inside a procedure body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    Call,
    Exit,
    Fail,
    Redo,
    Exception,
    Disj,
    Switch,
    /// Entry into the condition of an if-then-else. Printed as `if`.
    Cond,
    Then,
    Else,
    First,
    Later,
}

impl Port {
    pub const ALL: [Port; 12] = [
        Port::Call,
        Port::Exit,
        Port::Fail,
        Port::Redo,
        Port::Exception,
        Port::Disj,
        Port::Switch,
        Port::Cond,
        Port::Then,
        Port::Else,
        Port::First,
        Port::Later,
    ];

    pub fn is_external(self) -> bool {
        matches!(
            self,
            Port::Call | Port::Exit | Port::Fail | Port::Redo | Port::Exception
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Port::Call => "call",
            Port::Exit => "exit",
            Port::Fail => "fail",
            Port::Redo => "redo",
            Port::Exception => "exception",
            Port::Disj => "disj",
            Port::Switch => "switch",
            Port::Cond => "if",
            Port::Then => "then",
            Port::Else => "else",
            Port::First => "first",
            Port::Later => "later",
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Port {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Port::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ParseError::new(format!("unknown port `{s}`"), 0))
    }
}

/// Declared solution-count class of a procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Determinism {
    Det,
    Semidet,
    Nondet,
    Multi,
    Failure,
    Erroneous,
}

impl Determinism {
    pub const ALL: [Determinism; 6] = [
        Determinism::Det,
        Determinism::Semidet,
        Determinism::Nondet,
        Determinism::Multi,
        Determinism::Failure,
        Determinism::Erroneous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Determinism::Det => "det",
            Determinism::Semidet => "semidet",
            Determinism::Nondet => "nondet",
            Determinism::Multi => "multi",
            Determinism::Failure => "failure",
            Determinism::Erroneous => "erroneous",
        }
    }
}

impl fmt::Display for Determinism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Determinism {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Determinism::ALL
            .iter()
            .copied()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| ParseError::new(format!("unknown determinism `{s}`"), 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProcType {
    Predicate,
    Function,
}

impl ProcType {
    pub fn as_str(self) -> &'static str {
        match self {
            ProcType::Predicate => "predicate",
            ProcType::Function => "function",
        }
    }
}

impl fmt::Display for ProcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProcType {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "predicate" => Ok(ProcType::Predicate),
            "function" => Ok(ProcType::Function),
            _ => Err(ParseError::new(format!("unknown proc type `{s}`"), 0)),
        }
    }
}

/// Identity of a traced procedure.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcId {
    pub proc_type: ProcType,
    pub def_module: String,
    pub decl_module: String,
    pub name: String,
    pub arity: u32,
    pub mode_number: u32,
}

impl ProcId {
    /// A single-mode predicate declared and defined in `module`.
    pub fn predicate(module: &str, name: &str, arity: u32) -> Self {
        ProcId {
            proc_type: ProcType::Predicate,
            def_module: module.to_string(),
            decl_module: module.to_string(),
            name: name.to_string(),
            arity,
            mode_number: 0,
        }
    }
}

impl fmt::Display for ProcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}/{}-{}",
            self.decl_module, self.name, self.arity, self.mode_number
        )
    }
}

/// A predicate identified by name and arity, printed `name/arity`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredKey {
    pub name: String,
    pub arity: u32,
}

impl PredKey {
    pub fn new(name: impl Into<String>, arity: u32) -> Self {
        PredKey {
            name: name.into(),
            arity,
        }
    }

    /// The caller of the top-level goal, used as a graph start node.
    pub fn user() -> Self {
        PredKey::new("user", 0)
    }

    pub fn of(event: &Event) -> Self {
        PredKey::new(event.proc.name.as_str(), event.proc.arity)
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// A term value as seen in the trace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Int(i64),
    Atom(String),
    /// A proper list. Partial lists are `Compound(".", [head, tail])`.
    List(Vec<Term>),
    Compound(String, Vec<Term>),
    /// Not live / not instantiated. Printed `-`.
    Unbound,
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(name.to_string())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Int(_) | Term::Atom(_) => true,
            Term::List(items) | Term::Compound(_, items) => items.iter().all(Term::is_ground),
            Term::Unbound => false,
        }
    }

    /// Coarse type name in the style of trace `arg_types`: `int`, `atom`,
    /// `list(int)`, `f/2`, or `-` for unbound slots.
    pub fn type_name(&self) -> String {
        match self {
            Term::Int(_) => "int".to_string(),
            Term::Atom(_) => "atom".to_string(),
            Term::List(items) => match items.first() {
                Some(first) => format!("list({})", first.type_name()),
                None => "list(_)".to_string(),
            },
            Term::Compound(f, args) if f == "." && args.len() == 2 => {
                format!("list({})", args[0].type_name())
            }
            Term::Compound(f, args) => format!("{}/{}", f, args.len()),
            Term::Unbound => "-".to_string(),
        }
    }

    /// Parse the textual form produced by `Display`.
    pub fn parse(text: &str) -> Result<Term, ParseError> {
        let mut p = TermParser {
            src: text.as_bytes(),
            pos: 0,
        };
        let t = p.term()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(ParseError::new("trailing input after term", p.pos));
        }
        Ok(t)
    }

    /// Writes the term the way `write/1` shows it: atoms unquoted.
    pub fn write_plain(&self, f: &mut impl fmt::Write) -> fmt::Result {
        self.write_with(f, false)
    }

    fn write_with(&self, f: &mut impl fmt::Write, quoted: bool) -> fmt::Result {
        match self {
            Term::Int(i) => write!(f, "{i}"),
            Term::Atom(a) if quoted => write_atom(f, a),
            Term::Atom(a) => f.write_str(a),
            Term::List(items) => {
                f.write_char('[')?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    t.write_with(f, quoted)?;
                }
                f.write_char(']')
            }
            Term::Compound(name, args) if name == "." && args.len() == 2 => {
                f.write_char('[')?;
                args[0].write_with(f, quoted)?;
                let mut tail = &args[1];
                loop {
                    match tail {
                        Term::Compound(n, a) if n == "." && a.len() == 2 => {
                            f.write_str(", ")?;
                            a[0].write_with(f, quoted)?;
                            tail = &a[1];
                        }
                        Term::List(rest) => {
                            for t in rest {
                                f.write_str(", ")?;
                                t.write_with(f, quoted)?;
                            }
                            return f.write_char(']');
                        }
                        other => {
                            f.write_char('|')?;
                            other.write_with(f, quoted)?;
                            return f.write_char(']');
                        }
                    }
                }
            }
            Term::Compound(name, args) => {
                if quoted {
                    write_atom(f, name)?;
                } else {
                    f.write_str(name)?;
                }
                f.write_char('(')?;
                for (i, t) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    t.write_with(f, quoted)?;
                }
                f.write_char(')')
            }
            Term::Unbound => f.write_char('-'),
        }
    }
}

fn is_plain_atom(a: &str) -> bool {
    let mut chars = a.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => false,
    }
}

fn write_atom(f: &mut impl fmt::Write, a: &str) -> fmt::Result {
    if is_plain_atom(a) {
        return f.write_str(a);
    }
    f.write_char('\'')?;
    for c in a.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('\'')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_with(f, true)
    }
}

impl FromStr for Term {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Term::parse(s)
    }
}

struct TermParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl TermParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::new(
                format!("expected `{}`", c as char),
                self.pos,
            ))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            None => Err(ParseError::new("unexpected end of term", self.pos)),
            Some(b'[') => self.list(),
            Some(b'-') => {
                let start = self.pos;
                self.pos += 1;
                if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos = start;
                    self.int()
                } else {
                    Ok(Term::Unbound)
                }
            }
            Some(c) if c.is_ascii_digit() => self.int(),
            Some(b'\'') => {
                let name = self.quoted()?;
                self.after_name(name)
            }
            Some(c) if c.is_ascii_lowercase() => {
                let start = self.pos;
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                self.after_name(name)
            }
            Some(c) => Err(ParseError::new(
                format!("unexpected character `{}`", c as char),
                self.pos,
            )),
        }
    }

    fn after_name(&mut self, name: String) -> Result<Term, ParseError> {
        // No whitespace between functor and `(`.
        if self.src.get(self.pos) == Some(&b'(') {
            self.pos += 1;
            let mut args = vec![self.term()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                args.push(self.term()?);
            }
            self.expect(b')')?;
            Ok(Term::Compound(name, args))
        } else {
            Ok(Term::Atom(name))
        }
    }

    fn int(&mut self) -> Result<Term, ParseError> {
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map(Term::Int)
            .ok_or_else(|| ParseError::new("invalid integer", start))
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let mut bytes = Vec::new();
        loop {
            match self.src.get(self.pos) {
                None => return Err(ParseError::new("unterminated quoted atom", start)),
                Some(b'\'') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    let c = match self.src.get(self.pos + 1) {
                        Some(b'n') => b'\n',
                        Some(&c) => c,
                        None => return Err(ParseError::new("unterminated escape", self.pos)),
                    };
                    bytes.push(c);
                    self.pos += 2;
                }
                Some(&c) => {
                    bytes.push(c);
                    self.pos += 1;
                }
            }
        }
        String::from_utf8(bytes).map_err(|_| ParseError::new("invalid utf-8 in atom", start))
    }

    fn list(&mut self) -> Result<Term, ParseError> {
        self.expect(b'[')?;
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(Term::List(Vec::new()));
        }
        let mut items = vec![self.term()?];
        loop {
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    items.push(self.term()?);
                }
                Some(b'|') => {
                    self.pos += 1;
                    let tail = self.term()?;
                    self.expect(b']')?;
                    return Ok(build_partial_list(items, tail));
                }
                _ => {
                    self.expect(b']')?;
                    return Ok(Term::List(items));
                }
            }
        }
    }
}

/// Builds `[items | tail]`, normalising to a proper list when `tail` is one.
pub fn build_partial_list(items: Vec<Term>, tail: Term) -> Term {
    match tail {
        Term::List(rest) => {
            let mut all = items;
            all.extend(rest);
            Term::List(all)
        }
        tail => items.into_iter().rev().fold(tail, |acc, head| {
            Term::Compound(".".to_string(), vec![head, acc])
        }),
    }
}

/// A live non-argument variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LiveVar {
    pub name: String,
    pub value: Term,
    pub type_name: String,
}

impl fmt::Display for LiveVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "live_var({:?}, {}, {})",
            self.name, self.value, self.type_name
        )
    }
}

/// One step of a goal path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoalPathStep {
    Conj(u32),
    Disj(u32),
    Switch(u32),
    Cond,
    Then,
    Else,
}

impl fmt::Display for GoalPathStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalPathStep::Conj(i) => write!(f, "c{i}"),
            GoalPathStep::Disj(i) => write!(f, "d{i}"),
            GoalPathStep::Switch(i) => write!(f, "s{i}"),
            GoalPathStep::Cond => f.write_str("?"),
            GoalPathStep::Then => f.write_str("t"),
            GoalPathStep::Else => f.write_str("e"),
        }
    }
}

impl FromStr for GoalPathStep {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseError::new(format!("malformed goal path step `{s}`"), 0);
        match s {
            "?" => return Ok(GoalPathStep::Cond),
            "t" => return Ok(GoalPathStep::Then),
            "e" => return Ok(GoalPathStep::Else),
            _ => {}
        }
        let mut chars = s.chars();
        let kind = chars.next().ok_or_else(bad)?;
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let index: u32 = digits.parse().map_err(|_| bad())?;
        if index == 0 {
            return Err(bad());
        }
        match kind {
            'c' => Ok(GoalPathStep::Conj(index)),
            'd' => Ok(GoalPathStep::Disj(index)),
            's' => Ok(GoalPathStep::Switch(index)),
            _ => Err(bad()),
        }
    }
}

/// Parses `[c3, e, d1]`. Steps are listed outermost first.
pub fn parse_goal_path(text: &str) -> Result<Vec<GoalPathStep>, ParseError> {
    let trimmed_start = text.len() - text.trim_start().len();
    let t = text.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| ParseError::new("goal path must be a bracketed list", trimmed_start))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut offset = trimmed_start + 1;
    let mut steps = Vec::new();
    for piece in inner.split(',') {
        let lead = piece.len() - piece.trim_start().len();
        let step = piece
            .trim()
            .parse::<GoalPathStep>()
            .map_err(|e| ParseError::new(e.message, offset + lead))?;
        steps.push(step);
        offset += piece.len() + 1;
    }
    Ok(steps)
}

pub struct GoalPathDisplay<'a>(pub &'a [GoalPathStep]);

impl fmt::Display for GoalPathDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at position {position}")]
pub struct ParseError {
    pub message: String,
    pub position: usize,
}

impl ParseError {
    pub fn new(message: impl Into<String>, position: usize) -> Self {
        ParseError {
            message: message.into(),
            position,
        }
    }
}

/// Access to an attribute that was disabled when the trace was produced.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "attribute `{attribute}` is unavailable at event {chrono} (disabled by the attribute mask)"
)]
pub struct AttributeUnavailable {
    pub attribute: Attribute,
    pub chrono: u64,
}

/// One trace record.
///
/// Optional attributes are `None` exactly when the trace mask disabled them;
/// the accessors turn that into [`AttributeUnavailable`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub chrono: u64,
    pub call: u64,
    pub depth: u32,
    pub port: Port,
    pub det: Determinism,
    pub proc: Arc<ProcId>,
    pub goal_path: Vec<GoalPathStep>,
    pub args: Option<Vec<Term>>,
    pub arg_types: Option<Vec<String>>,
    pub local_vars: Option<Vec<LiveVar>>,
    /// `Some(None)` when enabled but the goal has no call site (the top-level query).
    pub line_number: Option<Option<u32>>,
}

impl Event {
    pub fn proc_name(&self) -> &str {
        &self.proc.name
    }

    pub fn arity(&self) -> u32 {
        self.proc.arity
    }

    pub fn args(&self) -> Result<&[Term], AttributeUnavailable> {
        self.args
            .as_deref()
            .ok_or(self.unavailable(Attribute::Args))
    }

    pub fn arg_types(&self) -> Result<&[String], AttributeUnavailable> {
        self.arg_types
            .as_deref()
            .ok_or(self.unavailable(Attribute::ArgTypes))
    }

    pub fn local_vars(&self) -> Result<&[LiveVar], AttributeUnavailable> {
        self.local_vars
            .as_deref()
            .ok_or(self.unavailable(Attribute::LocalVars))
    }

    pub fn line_number(&self) -> Result<Option<u32>, AttributeUnavailable> {
        self.line_number
            .ok_or(self.unavailable(Attribute::LineNumber))
    }

    fn unavailable(&self, attribute: Attribute) -> AttributeUnavailable {
        AttributeUnavailable {
            attribute,
            chrono: self.chrono,
        }
    }

    /// The optional attributes present on this event.
    pub fn mask(&self) -> AttributeMask {
        AttributeMask {
            args: self.args.is_some(),
            arg_types: self.arg_types.is_some(),
            local_vars: self.local_vars.is_some(),
            line_number: self.line_number.is_some(),
        }
    }

    /// Drops every optional attribute not enabled in `mask`.
    pub fn masked(mut self, mask: AttributeMask) -> Event {
        if !mask.args {
            self.args = None;
        }
        if !mask.arg_types {
            self.arg_types = None;
        }
        if !mask.local_vars {
            self.local_vars = None;
        }
        if !mask.line_number {
            self.line_number = None;
        }
        self
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>6} {:>5} {:>4} {:<9} {} {}",
            self.chrono,
            self.call,
            self.depth,
            self.port,
            self.proc,
            GoalPathDisplay(&self.goal_path)
        )?;
        if let Some(args) = &self.args {
            f.write_str(" (")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Attribute names accepted by [`attribute_of`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attribute {
    Chrono,
    Call,
    Depth,
    Port,
    Det,
    ProcType,
    DefModule,
    DeclModule,
    Name,
    Arity,
    ModeNumber,
    Args,
    ArgTypes,
    LocalVars,
    GoalPath,
    LineNumber,
}

impl Attribute {
    pub const ALL: [Attribute; 16] = [
        Attribute::Chrono,
        Attribute::Call,
        Attribute::Depth,
        Attribute::Port,
        Attribute::Det,
        Attribute::ProcType,
        Attribute::DefModule,
        Attribute::DeclModule,
        Attribute::Name,
        Attribute::Arity,
        Attribute::ModeNumber,
        Attribute::Args,
        Attribute::ArgTypes,
        Attribute::LocalVars,
        Attribute::GoalPath,
        Attribute::LineNumber,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Chrono => "chrono",
            Attribute::Call => "call",
            Attribute::Depth => "depth",
            Attribute::Port => "port",
            Attribute::Det => "det",
            Attribute::ProcType => "proc_type",
            Attribute::DefModule => "def_module",
            Attribute::DeclModule => "decl_module",
            Attribute::Name => "name",
            Attribute::Arity => "arity",
            Attribute::ModeNumber => "mode_number",
            Attribute::Args => "args",
            Attribute::ArgTypes => "arg_types",
            Attribute::LocalVars => "local_vars",
            Attribute::GoalPath => "goal_path",
            Attribute::LineNumber => "line_number",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown event attribute `{0}`")]
pub struct UnknownAttribute(pub String);

impl FromStr for Attribute {
    type Err = UnknownAttribute;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| UnknownAttribute(s.to_string()))
    }
}

/// Value of a single attribute, as returned by [`attribute_of`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttrValue {
    Int(u64),
    Port(Port),
    Det(Determinism),
    ProcType(ProcType),
    Text(String),
    Terms(Vec<Term>),
    Texts(Vec<String>),
    LiveVars(Vec<LiveVar>),
    GoalPath(Vec<GoalPathStep>),
}

/// Looks an attribute up by name. `Ok(None)` means the attribute was masked
/// off (or, for `line_number`, that the goal has no call site).
pub fn attribute_of(event: &Event, name: &str) -> Result<Option<AttrValue>, UnknownAttribute> {
    let attr: Attribute = name.parse()?;
    let p = &event.proc;
    Ok(match attr {
        Attribute::Chrono => Some(AttrValue::Int(event.chrono)),
        Attribute::Call => Some(AttrValue::Int(event.call)),
        Attribute::Depth => Some(AttrValue::Int(event.depth.into())),
        Attribute::Port => Some(AttrValue::Port(event.port)),
        Attribute::Det => Some(AttrValue::Det(event.det)),
        Attribute::ProcType => Some(AttrValue::ProcType(p.proc_type)),
        Attribute::DefModule => Some(AttrValue::Text(p.def_module.clone())),
        Attribute::DeclModule => Some(AttrValue::Text(p.decl_module.clone())),
        Attribute::Name => Some(AttrValue::Text(p.name.clone())),
        Attribute::Arity => Some(AttrValue::Int(p.arity.into())),
        Attribute::ModeNumber => Some(AttrValue::Int(p.mode_number.into())),
        Attribute::Args => event.args.clone().map(AttrValue::Terms),
        Attribute::ArgTypes => event.arg_types.clone().map(AttrValue::Texts),
        Attribute::LocalVars => event.local_vars.clone().map(AttrValue::LiveVars),
        Attribute::GoalPath => Some(AttrValue::GoalPath(event.goal_path.clone())),
        Attribute::LineNumber => event
            .line_number
            .flatten()
            .map(|l| AttrValue::Int(l.into())),
    })
}
