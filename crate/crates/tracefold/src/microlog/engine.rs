use std::collections::HashMap;
use std::io::Write;
use std::ops::ControlFlow;
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

use crate::event::{
    build_partial_list, Determinism, Event, GoalPathStep, LiveVar, Port, PredKey, ProcId, Term,
};
use crate::trace_io::{AttributeMask, EventFilter, TraceSink};

use super::{builtin_table, Goal, PTerm, Program, Query, Solution, BUILTIN_MODULE};

/// Options for one query execution.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub mask: AttributeMask,
    pub filter: EventFilter,
    /// Stop after this many solutions. `None` enumerates all of them.
    pub max_solutions: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mask: AttributeMask::default(),
            filter: EventFilter::all(),
            max_solutions: Some(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub solutions: Vec<Solution>,
    /// Number of events generated, filtered or not.
    pub events_generated: u64,
    /// `true` when the sink asked the engine to stop.
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    /// A builtin raised a runtime error. `exception` events were emitted for
    /// the failing goal and all its ancestors.
    #[error("runtime error in {pred}: {message}")]
    Runtime {
        pred: PredKey,
        message: String,
        solutions: Vec<Solution>,
    },
    #[error("program output failed: {0}")]
    Output(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Builtin {
    Is,
    Unify,
    Lt,
    Gt,
    Le,
    Ge,
    ArithEq,
    ArithNe,
    True,
    Fail,
    Write,
    Nl,
}

fn builtin_op(name: &str) -> Builtin {
    match name {
        "is" => Builtin::Is,
        "=" => Builtin::Unify,
        "<" => Builtin::Lt,
        ">" => Builtin::Gt,
        "=<" => Builtin::Le,
        ">=" => Builtin::Ge,
        "=:=" => Builtin::ArithEq,
        "=\\=" => Builtin::ArithNe,
        "true" => Builtin::True,
        "fail" => Builtin::Fail,
        "write" => Builtin::Write,
        "nl" => Builtin::Nl,
        other => unreachable!("not a builtin: {other}"),
    }
}

/// Clause-level term with interned atoms.
#[derive(Debug, Clone)]
enum CTerm {
    Var(u32),
    Int(i64),
    Atom(u32),
    Struct(u32, Box<[CTerm]>),
}

type NodeId = u32;

#[derive(Debug)]
enum Node {
    Call {
        pred: u32,
        args: Box<[CTerm]>,
        line: u32,
    },
    Conj(Box<[NodeId]>),
    Disj {
        branches: Box<[NodeId]>,
        paths: Box<[Box<[GoalPathStep]>]>,
    },
    Ite {
        cond: NodeId,
        then: NodeId,
        els: NodeId,
        cond_path: Box<[GoalPathStep]>,
        then_path: Box<[GoalPathStep]>,
        else_path: Box<[GoalPathStep]>,
    },
}

#[derive(Debug)]
struct CClause {
    head: Box<[CTerm]>,
    body: Option<NodeId>,
    nvars: u32,
    /// Named variables that do not occur in the head: `(index, name)`.
    locals: Box<[(u32, Arc<str>)]>,
}

#[derive(Debug)]
enum PredKind {
    User(Vec<CClause>),
    Builtin(Builtin),
}

#[derive(Debug)]
struct Pred {
    proc: Arc<ProcId>,
    det: Determinism,
    kind: PredKind,
}

/// A compiled program, ready to run queries. Cheap to share between runs.
#[derive(Debug)]
pub struct Engine {
    program: Program,
    preds: Vec<Pred>,
    pred_index: HashMap<PredKey, u32>,
    nodes: Vec<Node>,
    atoms: Vec<Arc<str>>,
    atom_index: HashMap<Arc<str>, u32>,
}

const NIL: u32 = 0;
const DOT: u32 = 1;
const NO_PRED: u32 = u32::MAX;

struct Compiler<'a> {
    engine: &'a mut Engine,
}

impl Compiler<'_> {
    fn atom(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.engine.atom_index.get(name) {
            return i;
        }
        let a: Arc<str> = Arc::from(name);
        let i = self.engine.atoms.len() as u32;
        self.engine.atoms.push(a.clone());
        self.engine.atom_index.insert(a, i);
        i
    }

    fn term(&mut self, t: &PTerm) -> CTerm {
        match t {
            PTerm::Var(v) => CTerm::Var(*v),
            PTerm::Int(n) => CTerm::Int(*n),
            PTerm::Atom(a) => CTerm::Atom(self.atom(a)),
            PTerm::Struct(f, args) => {
                let f = self.atom(f);
                CTerm::Struct(f, args.iter().map(|a| self.term(a)).collect())
            }
        }
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.engine.nodes.push(node);
        self.engine.nodes.len() as NodeId - 1
    }

    fn call(&mut self, key: PredKey, args: &[PTerm], line: u32) -> NodeId {
        let pred = self.engine.pred_index[&key];
        let args = args.iter().map(|a| self.term(a)).collect();
        self.push(Node::Call { pred, args, line })
    }

    fn goal(&mut self, g: &Goal, path: &[GoalPathStep]) -> NodeId {
        let ext = |step: GoalPathStep| {
            let mut p = path.to_vec();
            p.push(step);
            p
        };
        match g {
            Goal::Call { pred, args, line } => self.call(pred.clone(), args, *line),
            Goal::Builtin { name, args, line } => {
                self.call(PredKey::new(name.as_str(), args.len() as u32), args, *line)
            }
            Goal::Unify(a, b, line) => {
                self.call(PredKey::new("=", 2), &[a.clone(), b.clone()], *line)
            }
            Goal::True { line } => self.call(PredKey::new("true", 0), &[], *line),
            Goal::Fail { line } => self.call(PredKey::new("fail", 0), &[], *line),
            Goal::Conj(gs) => {
                let ids = gs
                    .iter()
                    .enumerate()
                    .map(|(i, g)| self.goal(g, &ext(GoalPathStep::Conj(i as u32 + 1))))
                    .collect();
                self.push(Node::Conj(ids))
            }
            Goal::Disj { branches, .. } => {
                let paths: Vec<Box<[GoalPathStep]>> = (0..branches.len())
                    .map(|i| ext(GoalPathStep::Disj(i as u32 + 1)).into())
                    .collect();
                let ids = branches
                    .iter()
                    .zip(&paths)
                    .map(|(b, p)| self.goal(b, p))
                    .collect();
                self.push(Node::Disj {
                    branches: ids,
                    paths: paths.into(),
                })
            }
            Goal::IfThenElse {
                cond, then, els, ..
            } => {
                let cond_path = ext(GoalPathStep::Cond);
                let then_path = ext(GoalPathStep::Then);
                let else_path = ext(GoalPathStep::Else);
                let cond = self.goal(cond, &cond_path);
                let then = self.goal(then, &then_path);
                let els = self.goal(els, &else_path);
                self.push(Node::Ite {
                    cond,
                    then,
                    els,
                    cond_path: cond_path.into(),
                    then_path: then_path.into(),
                    else_path: else_path.into(),
                })
            }
        }
    }
}

fn head_vars(t: &PTerm, out: &mut Vec<u32>) {
    match t {
        PTerm::Var(v) => out.push(*v),
        PTerm::Struct(_, args) => args.iter().for_each(|a| head_vars(a, out)),
        _ => {}
    }
}

impl Engine {
    pub fn new(program: Program) -> Engine {
        let mut engine = Engine {
            program: Program {
                module: String::new(),
                clauses: Vec::new(),
                determinism: Default::default(),
                predicates: Vec::new(),
                call_sites: Vec::new(),
            },
            preds: Vec::new(),
            pred_index: HashMap::new(),
            nodes: Vec::new(),
            atoms: Vec::new(),
            atom_index: HashMap::new(),
        };
        {
            let mut c = Compiler {
                engine: &mut engine,
            };
            assert_eq!(c.atom("[]"), NIL);
            assert_eq!(c.atom("."), DOT);
        }
        for key in &program.predicates {
            engine
                .pred_index
                .insert(key.clone(), engine.preds.len() as u32);
            engine.preds.push(Pred {
                proc: Arc::new(ProcId::predicate(&program.module, &key.name, key.arity)),
                det: program.determinism_of(key),
                kind: PredKind::User(Vec::new()),
            });
        }
        for (key, det) in builtin_table() {
            engine
                .pred_index
                .insert(key.clone(), engine.preds.len() as u32);
            engine.preds.push(Pred {
                proc: Arc::new(ProcId::predicate(BUILTIN_MODULE, &key.name, key.arity)),
                det,
                kind: PredKind::Builtin(builtin_op(&key.name)),
            });
        }
        for clause in &program.clauses {
            let mut c = Compiler {
                engine: &mut engine,
            };
            let head = clause.head_args.iter().map(|t| c.term(t)).collect();
            let body = clause.body.as_ref().map(|g| c.goal(g, &[]));
            let mut in_head = Vec::new();
            clause
                .head_args
                .iter()
                .for_each(|t| head_vars(t, &mut in_head));
            let locals = clause
                .var_names
                .iter()
                .enumerate()
                .filter(|(i, n)| !n.starts_with('_') && !in_head.contains(&(*i as u32)))
                .map(|(i, n)| (i as u32, Arc::from(n.as_str())))
                .collect();
            let idx = engine.pred_index[&clause.head];
            if let PredKind::User(cs) = &mut engine.preds[idx as usize].kind {
                cs.push(CClause {
                    head,
                    body,
                    nvars: clause.var_names.len() as u32,
                    locals,
                });
            }
        }
        engine.program = program;
        engine
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    /// Procedure identity used in events for a user predicate or builtin.
    pub fn proc_id(&self, key: &PredKey) -> Option<Arc<ProcId>> {
        self.pred_index
            .get(key)
            .map(|&i| self.preds[i as usize].proc.clone())
    }

    /// Runs `query`, pushing every admitted event into `sink`.
    pub fn solve(
        &self,
        query: &Query,
        options: &SolveOptions,
        sink: &mut dyn TraceSink,
        out: &mut dyn Write,
    ) -> Result<SolveOutcome, SolveError> {
        // Compile the query goal into a scratch copy of the node table.
        let mut scratch = Engine {
            program: Program {
                module: String::new(),
                clauses: Vec::new(),
                determinism: Default::default(),
                predicates: Vec::new(),
                call_sites: Vec::new(),
            },
            preds: Vec::new(),
            pred_index: self.pred_index.clone(),
            nodes: Vec::new(),
            atoms: self.atoms.clone(),
            atom_index: self.atom_index.clone(),
        };
        let root = Compiler {
            engine: &mut scratch,
        }
        .goal(&query.goal, &[]);
        let admit = self
            .preds
            .iter()
            .map(|p| {
                let mut row = [false; Port::ALL.len()];
                for port in Port::ALL {
                    row[port as usize] = options.filter.admits(&p.proc.decl_module, port);
                }
                row
            })
            .collect();
        let m = Machine {
            engine: self,
            query_nodes: &scratch.nodes,
            query_atoms: &scratch.atoms,
            query_vars: &query.var_names,
            heap: Vec::with_capacity(1024),
            trail: Vec::new(),
            frames: vec![Frame {
                call: 0,
                depth: 0,
                parent: 0,
                pred: NO_PRED,
                line: None,
                args_start: 0,
                arity: 0,
                call_args: None,
            }],
            cps: Vec::new(),
            cur: 0,
            chrono: 0,
            calls: 0,
            mask: options.mask,
            admit,
            sink,
            out,
        };
        m.run(root, options.max_solutions)
    }
}

/// Compiles `program` and runs `query` once.
pub fn solve(
    program: &Program,
    query: &Query,
    options: &SolveOptions,
    sink: &mut dyn TraceSink,
    out: &mut dyn Write,
) -> Result<SolveOutcome, SolveError> {
    Engine::new(program.clone()).solve(query, options, sink, out)
}

#[derive(Debug, Clone)]
enum Cell {
    /// Points to itself when unbound.
    Ref(usize),
    Int(i64),
    Atom(u32),
    Str(u32, u32, usize),
}

#[derive(Debug, Clone, Copy)]
struct Env {
    base: usize,
    frame: u32,
    pred: u32,
    clause: u32,
}

#[derive(Debug, Clone)]
enum Item {
    Goal(NodeId, Env),
    Exit(u32, Env),
    Commit(usize, NodeId, Env),
}

struct ContNode {
    item: Item,
    next: Cont,
}

type Cont = Option<Rc<ContNode>>;

fn push(item: Item, next: Cont) -> Cont {
    Some(Rc::new(ContNode { item, next }))
}

struct Frame {
    call: u64,
    depth: u32,
    parent: u32,
    pred: u32,
    line: Option<u32>,
    args_start: usize,
    arity: u32,
    /// Argument values at call time, kept for `fail` events.
    call_args: Option<Vec<Term>>,
}

enum CpKind {
    Clauses {
        frame: u32,
        candidates: Rc<[u32]>,
        next: usize,
        cont: Cont,
    },
    Disj {
        node: NodeId,
        next: usize,
        env: Env,
        cont: Cont,
    },
    Else {
        node: NodeId,
        env: Env,
        cont: Cont,
    },
}

struct ChoicePoint {
    kind: CpKind,
    heap_top: usize,
    trail_len: usize,
    frames_len: usize,
    owner: u32,
}

enum Step {
    Go(Cont),
    Backtrack,
}

enum Stop {
    Halted,
    Error(SolveError),
}

struct Machine<'a> {
    engine: &'a Engine,
    query_nodes: &'a [Node],
    query_atoms: &'a [Arc<str>],
    query_vars: &'a [String],
    heap: Vec<Cell>,
    trail: Vec<usize>,
    frames: Vec<Frame>,
    cps: Vec<ChoicePoint>,
    cur: u32,
    chrono: u64,
    calls: u64,
    mask: AttributeMask,
    admit: Vec<[bool; Port::ALL.len()]>,
    sink: &'a mut dyn TraceSink,
    out: &'a mut dyn Write,
}

impl<'a> Machine<'a> {
    fn node(&self, id: NodeId, env: Env) -> &'a Node {
        if env.pred == NO_PRED {
            &self.query_nodes[id as usize]
        } else {
            &self.engine.nodes[id as usize]
        }
    }

    fn atom_name(&self, id: u32) -> &str {
        // Query compilation may intern atoms the program never mentions.
        &self.query_atoms[id as usize]
    }

    fn run(
        mut self,
        root: NodeId,
        max_solutions: Option<usize>,
    ) -> Result<SolveOutcome, SolveError> {
        let base = self.alloc_vars(self.query_vars.len() as u32);
        let env = Env {
            base,
            frame: 0,
            pred: NO_PRED,
            clause: 0,
        };
        let mut solutions = Vec::new();
        let mut halted = false;
        let mut cont = push(Item::Goal(root, env), None);
        if max_solutions != Some(0) {
            loop {
                let step = match &cont {
                    None => {
                        solutions.push(self.solution(base));
                        if max_solutions.is_some_and(|m| solutions.len() >= m) {
                            break;
                        }
                        Ok(Step::Backtrack)
                    }
                    Some(node) => {
                        let item = node.item.clone();
                        let rest = node.next.clone();
                        self.exec(item, rest)
                    }
                };
                let step = match step {
                    Ok(Step::Backtrack) => self.backtrack(),
                    other => other.map(|s| match s {
                        Step::Go(c) => Some(c),
                        Step::Backtrack => unreachable!(),
                    }),
                };
                match step {
                    Ok(Some(c)) => cont = c,
                    Ok(None) => break,
                    Err(Stop::Halted) => {
                        halted = true;
                        break;
                    }
                    Err(Stop::Error(SolveError::Runtime { pred, message, .. })) => {
                        return Err(SolveError::Runtime {
                            pred,
                            message,
                            solutions,
                        })
                    }
                    Err(Stop::Error(e)) => return Err(e),
                }
            }
        }
        Ok(SolveOutcome {
            solutions,
            events_generated: self.chrono,
            halted,
        })
    }

    fn backtrack(&mut self) -> Result<Option<Cont>, Stop> {
        loop {
            let Some(cp) = self.cps.pop() else {
                let mut f = self.cur;
                while f != 0 {
                    self.emit(Port::Fail, f, &[], None)?;
                    f = self.frames[f as usize].parent;
                }
                self.cur = 0;
                return Ok(None);
            };
            let a = self.common_ancestor(self.cur, cp.owner);
            let mut f = self.cur;
            while f != a {
                self.emit(Port::Fail, f, &[], None)?;
                f = self.frames[f as usize].parent;
            }
            for &addr in &self.trail[cp.trail_len..] {
                self.heap[addr] = Cell::Ref(addr);
            }
            self.trail.truncate(cp.trail_len);
            self.heap.truncate(cp.heap_top);
            let mut redo = Vec::new();
            let mut f = cp.owner;
            while f != a {
                redo.push(f);
                f = self.frames[f as usize].parent;
            }
            for &f in redo.iter().rev() {
                self.emit(Port::Redo, f, &[], None)?;
            }
            self.frames.truncate(cp.frames_len);
            self.cur = cp.owner;
            let (heap_top, trail_len, frames_len, owner) =
                (cp.heap_top, cp.trail_len, cp.frames_len, cp.owner);
            match cp.kind {
                CpKind::Clauses {
                    frame,
                    candidates,
                    next,
                    cont,
                } => match self.try_clause(frame, candidates, next, cont) {
                    Step::Go(c) => return Ok(Some(c)),
                    Step::Backtrack => continue,
                },
                CpKind::Disj {
                    node,
                    next,
                    env,
                    cont,
                } => {
                    let Node::Disj { branches, paths } = self.node(node, env) else {
                        unreachable!()
                    };
                    let (branch, path) = (branches[next], paths[next].clone());
                    if next + 1 < branches.len() {
                        self.cps.push(ChoicePoint {
                            kind: CpKind::Disj {
                                node,
                                next: next + 1,
                                env,
                                cont: cont.clone(),
                            },
                            heap_top,
                            trail_len,
                            frames_len,
                            owner,
                        });
                    }
                    self.emit(Port::Disj, env.frame, &path, Some(env))?;
                    return Ok(Some(push(Item::Goal(branch, env), cont)));
                }
                CpKind::Else { node, env, cont } => {
                    let Node::Ite { els, else_path, .. } = self.node(node, env) else {
                        unreachable!()
                    };
                    let (els, path) = (*els, else_path.clone());
                    self.emit(Port::Else, env.frame, &path, Some(env))?;
                    return Ok(Some(push(Item::Goal(els, env), cont)));
                }
            }
        }
    }

    fn common_ancestor(&self, mut x: u32, mut y: u32) -> u32 {
        while x != y {
            let (dx, dy) = (self.frames[x as usize].depth, self.frames[y as usize].depth);
            if dx >= dy {
                x = self.frames[x as usize].parent;
            }
            if dy >= dx {
                y = self.frames[y as usize].parent;
            }
        }
        x
    }

    fn exec(&mut self, item: Item, rest: Cont) -> Result<Step, Stop> {
        match item {
            Item::Goal(id, env) => match self.node(id, env) {
                Node::Conj(children) => {
                    let mut cont = rest;
                    for &c in children.iter().rev() {
                        cont = push(Item::Goal(c, env), cont);
                    }
                    Ok(Step::Go(cont))
                }
                Node::Call { pred, args, line } => self.call(*pred, args, *line, env, rest),
                Node::Disj { branches, paths } => {
                    let (first, path) = (branches[0], &paths[0]);
                    if branches.len() > 1 {
                        self.push_cp(CpKind::Disj {
                            node: id,
                            next: 1,
                            env,
                            cont: rest.clone(),
                        });
                    }
                    self.emit(Port::Disj, env.frame, path, Some(env))?;
                    Ok(Step::Go(push(Item::Goal(first, env), rest)))
                }
                Node::Ite {
                    cond, cond_path, ..
                } => {
                    let (cond, path) = (*cond, &**cond_path);
                    let height = self.cps.len();
                    self.push_cp(CpKind::Else {
                        node: id,
                        env,
                        cont: rest.clone(),
                    });
                    self.emit(Port::Cond, env.frame, path, Some(env))?;
                    let cont = push(Item::Commit(height, id, env), rest);
                    Ok(Step::Go(push(Item::Goal(cond, env), cont)))
                }
            },
            Item::Exit(frame, env) => {
                self.emit(Port::Exit, frame, &[], Some(env))?;
                self.cur = self.frames[frame as usize].parent;
                Ok(Step::Go(rest))
            }
            Item::Commit(height, id, env) => {
                self.cps.truncate(height);
                let Node::Ite {
                    then, then_path, ..
                } = self.node(id, env)
                else {
                    unreachable!()
                };
                self.emit(Port::Then, env.frame, then_path, Some(env))?;
                let then = *then;
                Ok(Step::Go(push(Item::Goal(then, env), rest)))
            }
        }
    }

    fn push_cp(&mut self, kind: CpKind) {
        self.cps.push(ChoicePoint {
            kind,
            heap_top: self.heap.len(),
            trail_len: self.trail.len(),
            frames_len: self.frames.len(),
            owner: self.cur,
        });
    }

    fn call(
        &mut self,
        pred: u32,
        args: &'a [CTerm],
        line: u32,
        env: Env,
        rest: Cont,
    ) -> Result<Step, Stop> {
        let args_start = self.heap.len();
        self.heap
            .extend(std::iter::repeat_n(Cell::Int(0), args.len()));
        for (i, a) in args.iter().enumerate() {
            self.build_into(args_start + i, a, env);
        }
        self.calls += 1;
        let parent = &self.frames[env.frame as usize];
        let frame = Frame {
            call: self.calls,
            depth: parent.depth + 1,
            parent: env.frame,
            pred,
            line: (env.pred != NO_PRED).then_some(line),
            args_start,
            arity: args.len() as u32,
            call_args: None,
        };
        let fid = self.frames.len() as u32;
        self.frames.push(frame);
        if (self.mask.args || self.mask.arg_types) && self.admit[pred as usize][Port::Fail as usize]
        {
            let vals = self.frame_args(fid);
            self.frames[fid as usize].call_args = Some(vals);
        }
        self.emit(Port::Call, fid, &[], None)?;
        let engine: &'a Engine = self.engine;
        match &engine.preds[pred as usize].kind {
            PredKind::Builtin(op) => match self.builtin(*op, args_start) {
                Ok(true) => {
                    self.emit(Port::Exit, fid, &[], None)?;
                    Ok(Step::Go(rest))
                }
                Ok(false) => {
                    self.cur = fid;
                    Ok(Step::Backtrack)
                }
                Err(message) => {
                    let mut f = fid;
                    while f != 0 {
                        self.emit(Port::Exception, f, &[], None)?;
                        f = self.frames[f as usize].parent;
                    }
                    let key = &self.engine.preds[pred as usize].proc;
                    Err(Stop::Error(match message {
                        BuiltinError::Runtime(message) => SolveError::Runtime {
                            pred: PredKey::new(key.name.as_str(), key.arity),
                            message,
                            solutions: Vec::new(),
                        },
                        BuiltinError::Output(e) => SolveError::Output(e),
                    }))
                }
            },
            PredKind::User(clauses) => {
                self.cur = fid;
                let candidates: Vec<u32> = clauses
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| self.may_match(&c.head, args_start))
                    .map(|(i, _)| i as u32)
                    .collect();
                if candidates.is_empty() {
                    return Ok(Step::Backtrack);
                }
                Ok(self.try_clause(fid, candidates.into(), 0, rest))
            }
        }
    }

    /// First-argument-level indexing: can clause head possibly unify?
    fn may_match(&self, head: &[CTerm], args_start: usize) -> bool {
        head.iter().enumerate().all(|(i, h)| {
            let cell = &self.heap[self.deref(args_start + i)];
            match (h, cell) {
                (CTerm::Var(_), _) | (_, Cell::Ref(_)) => true,
                (CTerm::Int(a), Cell::Int(b)) => a == b,
                (CTerm::Atom(a), Cell::Atom(b)) => a == b,
                (CTerm::Struct(f, args), Cell::Str(g, n, _)) => f == g && args.len() as u32 == *n,
                _ => false,
            }
        })
    }

    fn try_clause(&mut self, frame: u32, candidates: Rc<[u32]>, idx: usize, cont: Cont) -> Step {
        let pred = self.frames[frame as usize].pred;
        let engine: &'a Engine = self.engine;
        let PredKind::User(clauses) = &engine.preds[pred as usize].kind else {
            unreachable!()
        };
        let clause = &clauses[candidates[idx] as usize];
        if idx + 1 < candidates.len() {
            self.push_cp(CpKind::Clauses {
                frame,
                candidates: candidates.clone(),
                next: idx + 1,
                cont: cont.clone(),
            });
        }
        let base = self.alloc_vars(clause.nvars);
        let args_start = self.frames[frame as usize].args_start;
        for (i, h) in clause.head.iter().enumerate() {
            if !self.unify_head(h, args_start + i, base) {
                return Step::Backtrack;
            }
        }
        let env = Env {
            base,
            frame,
            pred,
            clause: candidates[idx],
        };
        let cont = push(Item::Exit(frame, env), cont);
        Step::Go(match clause.body {
            Some(b) => push(Item::Goal(b, env), cont),
            None => cont,
        })
    }

    fn alloc_vars(&mut self, n: u32) -> usize {
        let base = self.heap.len();
        self.heap.extend((base..base + n as usize).map(Cell::Ref));
        base
    }

    fn deref(&self, mut addr: usize) -> usize {
        loop {
            match self.heap[addr] {
                Cell::Ref(next) if next != addr => addr = next,
                _ => return addr,
            }
        }
    }

    fn bind(&mut self, var: usize, target: usize) {
        self.heap[var] = Cell::Ref(target);
        self.trail.push(var);
    }

    fn build_into(&mut self, slot: usize, t: &CTerm, env: Env) {
        self.heap[slot] = match t {
            CTerm::Var(v) => Cell::Ref(env.base + *v as usize),
            CTerm::Int(n) => Cell::Int(*n),
            CTerm::Atom(a) => Cell::Atom(*a),
            CTerm::Struct(f, args) => {
                let start = self.heap.len();
                self.heap
                    .extend(std::iter::repeat_n(Cell::Int(0), args.len()));
                for (i, a) in args.iter().enumerate() {
                    self.build_into(start + i, a, env);
                }
                Cell::Str(*f, args.len() as u32, start)
            }
        };
    }

    fn build(&mut self, t: &CTerm, base: usize) -> usize {
        let slot = self.heap.len();
        self.heap.push(Cell::Int(0));
        let env = Env {
            base,
            frame: 0,
            pred: 0,
            clause: 0,
        };
        self.build_into(slot, t, env);
        slot
    }

    fn unify_head(&mut self, h: &CTerm, addr: usize, base: usize) -> bool {
        match h {
            CTerm::Var(v) => self.unify(base + *v as usize, addr),
            _ => {
                let a = self.deref(addr);
                match (h, self.heap[a].clone()) {
                    (_, Cell::Ref(_)) => {
                        let built = self.build(h, base);
                        self.bind(a, built);
                        true
                    }
                    (CTerm::Int(x), Cell::Int(y)) => *x == y,
                    (CTerm::Atom(x), Cell::Atom(y)) => *x == y,
                    (CTerm::Struct(f, args), Cell::Str(g, n, start)) => {
                        *f == g
                            && args.len() as u32 == n
                            && args
                                .iter()
                                .enumerate()
                                .all(|(i, t)| self.unify_head(t, start + i, base))
                    }
                    _ => false,
                }
            }
        }
    }

    fn unify(&mut self, a: usize, b: usize) -> bool {
        let mut stack = vec![(a, b)];
        while let Some((a, b)) = stack.pop() {
            let (a, b) = (self.deref(a), self.deref(b));
            if a == b {
                continue;
            }
            match (self.heap[a].clone(), self.heap[b].clone()) {
                (Cell::Ref(_), Cell::Ref(_)) => {
                    // Bind the younger variable to the older one.
                    if a > b {
                        self.bind(a, b)
                    } else {
                        self.bind(b, a)
                    }
                }
                (Cell::Ref(_), _) => self.bind(a, b),
                (_, Cell::Ref(_)) => self.bind(b, a),
                (Cell::Int(x), Cell::Int(y)) if x == y => {}
                (Cell::Atom(x), Cell::Atom(y)) if x == y => {}
                (Cell::Str(f, n, s1), Cell::Str(g, m, s2)) if f == g && n == m => {
                    for i in (0..n as usize).rev() {
                        stack.push((s1 + i, s2 + i));
                    }
                }
                _ => return false,
            }
        }
        true
    }

    fn resolve(&self, addr: usize) -> Term {
        let addr = self.deref(addr);
        match &self.heap[addr] {
            Cell::Ref(_) => Term::Unbound,
            Cell::Int(n) => Term::Int(*n),
            Cell::Atom(NIL) => Term::List(Vec::new()),
            Cell::Atom(a) => Term::Atom(self.atom_name(*a).to_string()),
            Cell::Str(DOT, 2, _) => {
                let mut items = Vec::new();
                let mut cur = addr;
                loop {
                    match &self.heap[cur] {
                        Cell::Str(DOT, 2, start) => {
                            items.push(self.resolve(*start));
                            cur = self.deref(start + 1);
                        }
                        Cell::Atom(NIL) => return Term::List(items),
                        _ => return build_partial_list(items, self.resolve(cur)),
                    }
                }
            }
            Cell::Str(f, n, start) => Term::Compound(
                self.atom_name(*f).to_string(),
                (0..*n as usize).map(|i| self.resolve(start + i)).collect(),
            ),
        }
    }

    fn frame_args(&self, f: u32) -> Vec<Term> {
        let fr = &self.frames[f as usize];
        (0..fr.arity as usize)
            .map(|i| self.resolve(fr.args_start + i))
            .collect()
    }

    fn solution(&self, base: usize) -> Solution {
        Solution {
            bindings: self
                .query_vars
                .iter()
                .enumerate()
                .filter(|(_, n)| !n.starts_with('_'))
                .map(|(i, n)| (n.clone(), self.resolve(base + i)))
                .collect(),
        }
    }

    fn emit(
        &mut self,
        port: Port,
        frame: u32,
        path: &[GoalPathStep],
        env: Option<Env>,
    ) -> Result<(), Stop> {
        self.chrono += 1;
        let fr = &self.frames[frame as usize];
        if fr.pred == NO_PRED {
            return Ok(());
        }
        if !self.admit[fr.pred as usize][port as usize] {
            return Ok(());
        }
        let pred = &self.engine.preds[fr.pred as usize];
        let mask = self.mask;
        let values = if mask.args || mask.arg_types {
            Some(match (&fr.call_args, port) {
                (Some(a), Port::Fail | Port::Call) => a.clone(),
                _ => self.frame_args(frame),
            })
        } else {
            None
        };
        let arg_types = if mask.arg_types {
            values
                .as_ref()
                .map(|v| v.iter().map(Term::type_name).collect())
        } else {
            None
        };
        let local_vars = mask.local_vars.then(|| match env {
            Some(env) if env.pred != NO_PRED => self.locals(env),
            _ => Vec::new(),
        });
        let event = Event {
            chrono: self.chrono,
            call: fr.call,
            depth: fr.depth,
            port,
            det: pred.det,
            proc: pred.proc.clone(),
            goal_path: path.to_vec(),
            args: if mask.args { values } else { None },
            arg_types,
            local_vars,
            line_number: mask.line_number.then_some(fr.line),
        };
        match self.sink.accept(event) {
            ControlFlow::Continue(()) => Ok(()),
            ControlFlow::Break(()) => Err(Stop::Halted),
        }
    }

    fn locals(&self, env: Env) -> Vec<LiveVar> {
        let PredKind::User(clauses) = &self.engine.preds[env.pred as usize].kind else {
            return Vec::new();
        };
        clauses[env.clause as usize]
            .locals
            .iter()
            .filter_map(|(i, name)| {
                let value = self.resolve(env.base + *i as usize);
                (value != Term::Unbound).then(|| LiveVar {
                    name: name.to_string(),
                    type_name: value.type_name(),
                    value,
                })
            })
            .collect()
    }

    fn builtin(&mut self, op: Builtin, args: usize) -> Result<bool, BuiltinError> {
        Ok(match op {
            Builtin::True => true,
            Builtin::Fail => false,
            Builtin::Unify => self.unify(args, args + 1),
            Builtin::Is => {
                let v = self.eval(args + 1)?;
                let slot = self.heap.len();
                self.heap.push(Cell::Int(v));
                self.unify(args, slot)
            }
            Builtin::Lt
            | Builtin::Gt
            | Builtin::Le
            | Builtin::Ge
            | Builtin::ArithEq
            | Builtin::ArithNe => {
                let (a, b) = (self.eval(args)?, self.eval(args + 1)?);
                match op {
                    Builtin::Lt => a < b,
                    Builtin::Gt => a > b,
                    Builtin::Le => a <= b,
                    Builtin::Ge => a >= b,
                    Builtin::ArithEq => a == b,
                    _ => a != b,
                }
            }
            Builtin::Write => {
                let mut s = String::new();
                self.resolve(args)
                    .write_plain(&mut s)
                    .expect("writing to a String");
                self.out
                    .write_all(s.as_bytes())
                    .map_err(|e| BuiltinError::Output(e.to_string()))?;
                true
            }
            Builtin::Nl => {
                self.out
                    .write_all(b"\n")
                    .map_err(|e| BuiltinError::Output(e.to_string()))?;
                true
            }
        })
    }

    fn eval(&self, addr: usize) -> Result<i64, BuiltinError> {
        let addr = self.deref(addr);
        let overflow = || BuiltinError::Runtime("integer overflow".into());
        match &self.heap[addr] {
            Cell::Int(n) => Ok(*n),
            Cell::Ref(_) => Err(BuiltinError::Runtime(
                "arguments are not sufficiently instantiated".into(),
            )),
            Cell::Atom(a) => Err(BuiltinError::Runtime(format!(
                "type error: `{}` is not a number",
                self.atom_name(*a)
            ))),
            Cell::Str(f, 1, start) => {
                let x = self.eval(*start)?;
                match self.atom_name(*f) {
                    "-" => x.checked_neg().ok_or_else(overflow),
                    "abs" => x.checked_abs().ok_or_else(overflow),
                    other => Err(BuiltinError::Runtime(format!(
                        "unknown arithmetic function {other}/1"
                    ))),
                }
            }
            Cell::Str(f, 2, start) => {
                let (x, y) = (self.eval(*start)?, self.eval(start + 1)?);
                let div_zero = || BuiltinError::Runtime("division by zero".into());
                match self.atom_name(*f) {
                    "+" => x.checked_add(y).ok_or_else(overflow),
                    "-" => x.checked_sub(y).ok_or_else(overflow),
                    "*" => x.checked_mul(y).ok_or_else(overflow),
                    "//" | "/" => {
                        if y == 0 {
                            Err(div_zero())
                        } else {
                            x.checked_div(y).ok_or_else(overflow)
                        }
                    }
                    "mod" => {
                        if y == 0 {
                            Err(div_zero())
                        } else {
                            Ok(x.rem_euclid(y) + if y < 0 && x.rem_euclid(y) != 0 { y } else { 0 })
                        }
                    }
                    "rem" => {
                        if y == 0 {
                            Err(div_zero())
                        } else {
                            x.checked_rem(y).ok_or_else(overflow)
                        }
                    }
                    "min" => Ok(x.min(y)),
                    "max" => Ok(x.max(y)),
                    other => Err(BuiltinError::Runtime(format!(
                        "unknown arithmetic function {other}/2"
                    ))),
                }
            }
            Cell::Str(f, n, _) => Err(BuiltinError::Runtime(format!(
                "unknown arithmetic function {}/{}",
                self.atom_name(*f),
                n
            ))),
        }
    }
}

enum BuiltinError {
    Runtime(String),
    Output(String),
}
