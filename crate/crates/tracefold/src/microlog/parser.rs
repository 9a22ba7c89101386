use std::collections::BTreeMap;
use std::sync::Arc;

use crate::event::{Determinism, PredKey};

use super::{is_builtin, CallSite, Clause, Goal, PTerm, Program, ProgramError, Query};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    /// Quoted atoms never act as operators.
    Quoted(String),
    Var(String),
    Int(i64),
    /// `(` with a flag telling whether it directly follows the previous token.
    Open(bool),
    Close,
    OpenList,
    CloseList,
    Bar,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@#&$";

fn syntax(line: u32, col: u32, message: impl Into<String>) -> ProgramError {
    ProgramError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, ProgramError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut glued = false;
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            glued = false;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            glued = false;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(syntax(l0, c0, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            glued = false;
            continue;
        }
        let (tl, tc) = (line, col);
        let tok = if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            Tok::Int(
                text.parse()
                    .map_err(|_| syntax(tl, tc, format!("integer literal {text} is too large")))?,
            )
        } else if c == '_' || c.is_uppercase() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            Tok::Var(chars[start..i].iter().collect())
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            Tok::Atom(chars[start..i].iter().collect())
        } else if c == '\'' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(syntax(tl, tc, "unterminated quoted atom")),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        bump!();
                        bump!();
                    }
                    Some('\'') => {
                        bump!();
                        break;
                    }
                    Some('\\') => {
                        bump!();
                        let e = chars.get(i).copied();
                        s.push(match e {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some(c) => c,
                            None => return Err(syntax(tl, tc, "unterminated quoted atom")),
                        });
                        bump!();
                    }
                    Some(&c) => {
                        s.push(c);
                        bump!();
                    }
                }
            }
            Tok::Quoted(s)
        } else if c == '.'
            && chars
                .get(i + 1)
                .is_none_or(|n| n.is_whitespace() || *n == '%')
        {
            bump!();
            Tok::End
        } else if SYMBOL_CHARS.contains(c) {
            let start = i;
            while i < chars.len() && SYMBOL_CHARS.contains(chars[i]) {
                bump!();
            }
            Tok::Atom(chars[start..i].iter().collect())
        } else {
            bump!();
            match c {
                '(' => Tok::Open(glued),
                ')' => Tok::Close,
                '[' => Tok::OpenList,
                ']' => Tok::CloseList,
                '|' => Tok::Bar,
                ',' => Tok::Comma,
                '!' | ';' => Tok::Atom(c.to_string()),
                '"' => {
                    return Err(ProgramError::Unsupported {
                        construct: "string literal".into(),
                        line: tl,
                        col: tc,
                    })
                }
                other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
            }
        };
        glued = !matches!(tok, Tok::End);
        out.push(Token {
            tok,
            line: tl,
            col: tc,
        });
    }
    Ok(out)
}

/// Surface syntax tree with source positions.
#[derive(Debug, Clone)]
struct Ast {
    kind: AstKind,
    line: u32,
    col: u32,
}

#[derive(Debug, Clone)]
enum AstKind {
    Var(String),
    Int(i64),
    Atom(String),
    Compound(String, Vec<Ast>),
}

impl Ast {
    fn functor(&self) -> Option<(&str, usize)> {
        match &self.kind {
            AstKind::Atom(a) => Some((a, 0)),
            AstKind::Compound(f, args) => Some((f, args.len())),
            _ => None,
        }
    }

    fn args(&self) -> &[Ast] {
        match &self.kind {
            AstKind::Compound(_, args) => args,
            _ => &[],
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

fn infix_op(name: &str) -> Option<(u32, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        ";" => (1100, Assoc::Xfy),
        "->" => (1050, Assoc::Xfy),
        "," => (1000, Assoc::Xfy),
        "=" | "\\=" | "is" | "<" | ">" | "=<" | ">=" | "=:=" | "=\\=" | "==" | "\\==" => {
            (700, Assoc::Xfx)
        }
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "/" | "//" | "mod" | "rem" => (400, Assoc::Yfx),
        _ => return None,
    })
}

/// Prefix operators: priority and maximum argument priority.
fn prefix_op(name: &str) -> Option<(u32, u32)> {
    Some(match name {
        ":-" | "?-" => (1200, 1199),
        "determinism" | "module" => (1150, 1149),
        "\\+" => (900, 900),
        "-" => (200, 200),
        _ => return None,
    })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof_line: u32,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Token, ProgramError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| syntax(self.eof_line, 1, "unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ProgramError> {
        let t = self.next()?;
        if t.tok == want {
            Ok(t)
        } else {
            Err(syntax(t.line, t.col, format!("expected {what}")))
        }
    }

    /// Name of the next token when it can act as an infix operator.
    fn peek_infix(&self) -> Option<String> {
        match &self.peek()?.tok {
            Tok::Atom(a) if infix_op(a).is_some() => Some(a.clone()),
            Tok::Comma => Some(",".into()),
            _ => None,
        }
    }

    fn starts_term(&self) -> bool {
        match self.peek().map(|t| &t.tok) {
            None | Some(Tok::Close | Tok::CloseList | Tok::Bar | Tok::Comma | Tok::End) => false,
            Some(Tok::Atom(a)) => infix_op(a).is_none() || prefix_op(a).is_some(),
            Some(_) => true,
        }
    }

    fn parse(&mut self, max: u32) -> Result<Ast, ProgramError> {
        let (mut left, mut left_prec) = self.primary(max)?;
        while let Some(op) = self.peek_infix() {
            let (prec, assoc) = infix_op(&op).expect("infix operator");
            if prec > max {
                break;
            }
            let left_max = if assoc == Assoc::Yfx { prec } else { prec - 1 };
            if left_prec > left_max {
                break;
            }
            let right_max = if assoc == Assoc::Xfy { prec } else { prec - 1 };
            self.pos += 1;
            let right = self.parse(right_max)?;
            let (line, col) = (left.line, left.col);
            left = Ast {
                kind: AstKind::Compound(op, vec![left, right]),
                line,
                col,
            };
            left_prec = prec;
        }
        Ok(left)
    }

    fn primary(&mut self, max: u32) -> Result<(Ast, u32), ProgramError> {
        let t = self.next()?;
        let (line, col) = (t.line, t.col);
        let mk = |kind| Ast { kind, line, col };
        match t.tok {
            Tok::Int(n) => Ok((mk(AstKind::Int(n)), 0)),
            Tok::Var(v) => Ok((mk(AstKind::Var(v)), 0)),
            Tok::Open(_) => {
                let inner = self.parse(1200)?;
                self.expect(Tok::Close, "`)`")?;
                Ok((inner, 0))
            }
            Tok::OpenList => self.list(line, col).map(|a| (a, 0)),
            Tok::Quoted(name) => self.atom_or_compound(name, line, col).map(|a| (a, 0)),
            Tok::Atom(name) => {
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::Open(true))) {
                    return self.atom_or_compound(name, line, col).map(|a| (a, 0));
                }
                if name == "-" {
                    if let Some(Token {
                        tok: Tok::Int(n),
                        line: l2,
                        col: c2,
                    }) = self.peek().cloned()
                    {
                        if l2 == line && c2 == col + 1 {
                            self.pos += 1;
                            return Ok((mk(AstKind::Int(-n)), 0));
                        }
                    }
                }
                if let Some((prec, arg_max)) = prefix_op(&name) {
                    if self.starts_term() && prec <= max {
                        let arg = self.parse(arg_max)?;
                        return Ok((mk(AstKind::Compound(name, vec![arg])), prec));
                    }
                }
                let prec = infix_op(&name)
                    .map(|(p, _)| p)
                    .or(prefix_op(&name).map(|(p, _)| p))
                    .unwrap_or(0);
                Ok((mk(AstKind::Atom(name)), if prec > max { 0 } else { prec }))
            }
            Tok::Close | Tok::CloseList => Err(syntax(line, col, "unbalanced bracket")),
            Tok::Bar | Tok::Comma => Err(syntax(line, col, "unexpected separator")),
            Tok::End => Err(syntax(line, col, "unexpected end of clause")),
        }
    }

    fn atom_or_compound(&mut self, name: String, line: u32, col: u32) -> Result<Ast, ProgramError> {
        if !matches!(self.peek().map(|t| &t.tok), Some(Tok::Open(true))) {
            return Ok(Ast {
                kind: AstKind::Atom(name),
                line,
                col,
            });
        }
        self.pos += 1;
        let mut args = vec![self.parse(999)?];
        loop {
            let t = self.next()?;
            match t.tok {
                Tok::Comma => args.push(self.parse(999)?),
                Tok::Close => break,
                _ => {
                    return Err(syntax(
                        t.line,
                        t.col,
                        "expected `,` or `)` in argument list",
                    ))
                }
            }
        }
        Ok(Ast {
            kind: AstKind::Compound(name, args),
            line,
            col,
        })
    }

    fn list(&mut self, line: u32, col: u32) -> Result<Ast, ProgramError> {
        let nil = |line, col| Ast {
            kind: AstKind::Atom("[]".into()),
            line,
            col,
        };
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::CloseList)) {
            self.pos += 1;
            return Ok(nil(line, col));
        }
        let mut items = vec![self.parse(999)?];
        let tail = loop {
            let t = self.next()?;
            match t.tok {
                Tok::Comma => items.push(self.parse(999)?),
                Tok::Bar => {
                    let tail = self.parse(999)?;
                    self.expect(Tok::CloseList, "`]`")?;
                    break tail;
                }
                Tok::CloseList => break nil(t.line, t.col),
                _ => return Err(syntax(t.line, t.col, "expected `,`, `|` or `]` in list")),
            }
        };
        Ok(items.into_iter().rev().fold(tail, |acc, item| Ast {
            line: item.line,
            col: item.col,
            kind: AstKind::Compound(".".into(), vec![item, acc]),
        }))
    }

    /// Reads one clause-level term terminated by `.`.
    fn clause_term(&mut self) -> Result<Ast, ProgramError> {
        let t = self.parse(1200)?;
        match self.next() {
            Ok(Token { tok: Tok::End, .. }) => Ok(t),
            Ok(t) => Err(syntax(t.line, t.col, "operator expected or missing `.`")),
            Err(_) => Err(syntax(self.eof_line, 1, "missing `.` at end of clause")),
        }
    }
}

/// Per-clause variable numbering.
#[derive(Default)]
struct VarTable {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl VarTable {
    fn var(&mut self, name: &str) -> u32 {
        if name == "_" {
            self.names.push("_".into());
            return self.names.len() as u32 - 1;
        }
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }
}

fn unsupported(construct: &str, ast: &Ast) -> ProgramError {
    ProgramError::Unsupported {
        construct: construct.to_string(),
        line: ast.line,
        col: ast.col,
    }
}

fn to_term(ast: &Ast, vars: &mut VarTable) -> PTerm {
    match &ast.kind {
        AstKind::Var(v) => PTerm::Var(vars.var(v)),
        AstKind::Int(n) => PTerm::Int(*n),
        AstKind::Atom(a) => PTerm::Atom(Arc::from(a.as_str())),
        AstKind::Compound(f, args) => PTerm::Struct(
            Arc::from(f.as_str()),
            args.iter().map(|a| to_term(a, vars)).collect(),
        ),
    }
}

const BUILTIN_GOALS: &[(&str, usize)] = &[
    ("is", 2),
    ("<", 2),
    (">", 2),
    ("=<", 2),
    (">=", 2),
    ("=:=", 2),
    ("=\\=", 2),
    ("write", 1),
    ("nl", 0),
];

fn to_goal(ast: &Ast, vars: &mut VarTable) -> Result<Goal, ProgramError> {
    let line = ast.line;
    let (name, arity) = match &ast.kind {
        AstKind::Var(_) => return Err(unsupported("variable goal (meta-call)", ast)),
        AstKind::Int(_) => return Err(syntax(ast.line, ast.col, "an integer is not a goal")),
        _ => ast.functor().expect("callable"),
    };
    let args = ast.args();
    Ok(match (name, arity) {
        (",", 2) => {
            let mut goals = Vec::new();
            flatten(ast, ",", &mut |g| {
                goals.push(to_goal(g, vars)?);
                Ok(())
            })?;
            Goal::Conj(goals)
        }
        (";", 2) => {
            if args[0].functor() == Some(("->", 2)) {
                let c = &args[0].args();
                Goal::IfThenElse {
                    cond: Box::new(to_goal(&c[0], vars)?),
                    then: Box::new(to_goal(&c[1], vars)?),
                    els: Box::new(to_goal(&args[1], vars)?),
                    line,
                }
            } else {
                let mut branches = Vec::new();
                flatten(ast, ";", &mut |g| {
                    branches.push(to_goal(g, vars)?);
                    Ok(())
                })?;
                Goal::Disj { branches, line }
            }
        }
        ("->", 2) => Goal::IfThenElse {
            cond: Box::new(to_goal(&args[0], vars)?),
            then: Box::new(to_goal(&args[1], vars)?),
            els: Box::new(Goal::Fail { line }),
            line,
        },
        ("!", 0) => return Err(unsupported("cut (!)", ast)),
        ("\\+", 1) | ("not", 1) => return Err(unsupported("negation as failure", ast)),
        ("assert" | "asserta" | "assertz" | "retract" | "retractall" | "abolish", _) => {
            return Err(unsupported("dynamic database builtins", ast))
        }
        ("call", _) | ("findall" | "bagof" | "setof" | "forall", _) => {
            return Err(unsupported("higher-order call", ast))
        }
        ("true", 0) => Goal::True { line },
        ("fail" | "false", 0) => Goal::Fail { line },
        ("=", 2) => Goal::Unify(to_term(&args[0], vars), to_term(&args[1], vars), line),
        (n, a) if BUILTIN_GOALS.contains(&(n, a)) => Goal::Builtin {
            name: n.to_string(),
            args: args.iter().map(|a| to_term(a, vars)).collect(),
            line,
        },
        (n, a) => Goal::Call {
            pred: PredKey::new(n, a as u32),
            args: args.iter().map(|a| to_term(a, vars)).collect(),
            line,
        },
    })
}

/// Walks a right-nested chain of binary `op` terms, left to right.
fn flatten(
    ast: &Ast,
    op: &str,
    f: &mut dyn FnMut(&Ast) -> Result<(), ProgramError>,
) -> Result<(), ProgramError> {
    match ast.functor() {
        Some((name, 2)) if name == op => {
            flatten(&ast.args()[0], op, f)?;
            flatten(&ast.args()[1], op, f)
        }
        _ => f(ast),
    }
}

fn determinism_name(ast: &Ast) -> Result<Determinism, ProgramError> {
    let name = match &ast.kind {
        AstKind::Atom(a) => a.as_str(),
        _ => return Err(syntax(ast.line, ast.col, "expected a determinism category")),
    };
    Ok(match name {
        "cc_multi" => Determinism::Det,
        "cc_nondet" => Determinism::Semidet,
        other => other
            .parse()
            .map_err(|_| syntax(ast.line, ast.col, format!("unknown determinism `{other}`")))?,
    })
}

fn pred_indicator(ast: &Ast) -> Result<PredKey, ProgramError> {
    if let AstKind::Compound(f, args) = &ast.kind {
        if f == "/" {
            if let (AstKind::Atom(n), AstKind::Int(a)) = (&args[0].kind, &args[1].kind) {
                if *a >= 0 {
                    return Ok(PredKey::new(n.as_str(), *a as u32));
                }
            }
        }
    }
    Err(syntax(
        ast.line,
        ast.col,
        "expected a predicate indicator name/arity",
    ))
}

fn collect_sites(goal: &Goal, caller: &PredKey, out: &mut Vec<CallSite>) {
    let mut site = |callee: PredKey, line: u32| {
        out.push(CallSite {
            caller: caller.clone(),
            callee,
            line,
        })
    };
    match goal {
        Goal::Call { pred, line, .. } => site(pred.clone(), *line),
        Goal::Builtin { name, args, line } => {
            site(PredKey::new(name.as_str(), args.len() as u32), *line)
        }
        Goal::Unify(_, _, line) => site(PredKey::new("=", 2), *line),
        Goal::True { line } => site(PredKey::new("true", 0), *line),
        Goal::Fail { line } => site(PredKey::new("fail", 0), *line),
        Goal::Conj(gs) | Goal::Disj { branches: gs, .. } => {
            for g in gs {
                collect_sites(g, caller, out);
            }
        }
        Goal::IfThenElse {
            cond, then, els, ..
        } => {
            collect_sites(cond, caller, out);
            collect_sites(then, caller, out);
            collect_sites(els, caller, out);
        }
    }
}

fn tokens(src: &str) -> Result<Parser, ProgramError> {
    let toks = tokenize(src)?;
    let eof_line = src.lines().count().max(1) as u32;
    Ok(Parser {
        toks,
        pos: 0,
        eof_line,
    })
}

/// Parses program source into clauses, declarations and call sites, and
/// checks that every called predicate is defined.
pub fn parse_program(src: &str) -> Result<Program, ProgramError> {
    let mut p = tokens(src)?;
    let mut module = None;
    let mut clauses = Vec::new();
    let mut decls: Vec<(PredKey, Determinism, u32)> = Vec::new();
    while p.peek().is_some() {
        let ast = p.clause_term()?;
        if let Some((":-", 1)) = ast.functor() {
            let d = &ast.args()[0];
            match d.functor() {
                Some(("determinism", 1)) => {
                    let inner = &d.args()[0];
                    if inner.functor() != Some(("is", 2)) {
                        return Err(syntax(
                            d.line,
                            d.col,
                            "expected `determinism name/arity is category`",
                        ));
                    }
                    let key = pred_indicator(&inner.args()[0])?;
                    let det = determinism_name(&inner.args()[1])?;
                    decls.push((key, det, d.line));
                }
                Some(("module", 1)) => match &d.args()[0].kind {
                    AstKind::Atom(m) => module = Some(m.clone()),
                    _ => return Err(syntax(d.line, d.col, "expected a module name")),
                },
                _ => return Err(unsupported("directive", d)),
            }
            continue;
        }
        let (head, body) = match ast.functor() {
            Some((":-", 2)) => (&ast.args()[0], Some(&ast.args()[1])),
            _ => (&ast, None),
        };
        let (name, arity) = match head.functor() {
            Some(f) => f,
            None => {
                return Err(syntax(
                    head.line,
                    head.col,
                    "clause head must be an atom or compound term",
                ))
            }
        };
        if matches!(name, "," | ";" | "->" | ":-") {
            return Err(syntax(
                head.line,
                head.col,
                "clause head must be an atom or compound term",
            ));
        }
        let key = PredKey::new(name, arity as u32);
        if is_builtin(&key) || matches!((name, arity), ("false", 0)) {
            return Err(ProgramError::BuiltinRedefinition {
                pred: key,
                line: head.line,
            });
        }
        let mut vars = VarTable::default();
        let head_args = head.args().iter().map(|a| to_term(a, &mut vars)).collect();
        let body = body.map(|b| to_goal(b, &mut vars)).transpose()?;
        clauses.push(Clause {
            head: key,
            head_args,
            body,
            var_names: vars.names,
            line: head.line,
        });
    }

    let mut predicates: Vec<PredKey> = Vec::new();
    for c in &clauses {
        if !predicates.contains(&c.head) {
            predicates.push(c.head.clone());
        }
    }
    let mut determinism = BTreeMap::new();
    for (key, det, line) in decls {
        if !predicates.contains(&key) {
            return Err(ProgramError::UnknownDeclaration { pred: key, line });
        }
        if let Some(prev) = determinism.insert(key.clone(), det) {
            if prev != det {
                return Err(ProgramError::DuplicateDeclaration { pred: key, line });
            }
        }
    }
    let mut call_sites = Vec::new();
    for c in &clauses {
        if let Some(b) = &c.body {
            collect_sites(b, &c.head, &mut call_sites);
        }
    }
    for s in &call_sites {
        if !predicates.contains(&s.callee) && !is_builtin(&s.callee) {
            return Err(ProgramError::Undefined {
                pred: s.callee.clone(),
                line: s.line,
            });
        }
    }
    Ok(Program {
        module: module.unwrap_or_else(|| "main".to_string()),
        clauses,
        determinism,
        predicates,
        call_sites,
    })
}

/// Parses a query such as `qsort([3,1,2], X)`; the final `.` is optional.
pub fn parse_query(program: &Program, text: &str) -> Result<Query, ProgramError> {
    let trimmed = text.trim();
    let src = if trimmed.ends_with('.') {
        trimmed.to_string()
    } else {
        format!("{trimmed} .")
    };
    let mut p = tokens(&src)?;
    let ast = p.clause_term()?;
    if let Some(t) = p.peek() {
        return Err(syntax(t.line, t.col, "a query is a single goal"));
    }
    let mut vars = VarTable::default();
    let goal = to_goal(&ast, &mut vars)?;
    let mut sites = Vec::new();
    collect_sites(&goal, &PredKey::user(), &mut sites);
    for s in sites {
        if !program.is_defined(&s.callee) && !is_builtin(&s.callee) {
            return Err(ProgramError::Undefined {
                pred: s.callee,
                line: s.line,
            });
        }
    }
    Ok(Query {
        goal,
        var_names: vars.names,
        text: trimmed.trim_end_matches('.').trim().to_string(),
    })
}
