//! Small-step transition relation.
//!
//! Commands step compositionally: an inner command produces an action label,
//! and each enclosing construct (prefix, speculation, transient buffer, local
//! scope, process, global store) transforms, absorbs or blocks it on the way
//! up. Loads bind their value when they are promoted out of the innermost
//! local scope, reading the closest enclosing transient buffer or shared
//! memory, which keeps branching finite.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::lang::{append, eval, Action, BinOp, Closed, Cmd, Command, EvalError, Expr, Loc, Name};
use crate::machine::{Layout, MemoryImage, Registers, StateView, TransientStore};
use crate::model::{forward, MemoryModel};

/// How conditionals expose speculation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecMode {
    /// Plain guarded choice.
    Off,
    /// Speculate the branch that is eventually not taken.
    WrongBranch,
    /// Speculate either branch before the real one is taken.
    BothBranches,
    /// No speculation; every load in a branch first emits its cache fetch.
    AnnotatedLoads,
}

impl FromStr for SpecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(SpecMode::Off),
            "wrong" => Ok(SpecMode::WrongBranch),
            "both" => Ok(SpecMode::BothBranches),
            "annotated" => Ok(SpecMode::AnnotatedLoads),
            _ => Err(format!(
                "unknown speculation mode `{s}` (expected off, wrong, both or annotated)"
            )),
        }
    }
}

impl fmt::Display for SpecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpecMode::Off => "off",
            SpecMode::WrongBranch => "wrong",
            SpecMode::BothBranches => "both",
            SpecMode::AnnotatedLoads => "annotated",
        })
    }
}

/// Initial register valuation of a transient context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SpecLocals {
    #[default]
    Copy,
    Zero,
}

impl FromStr for SpecLocals {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "copy" => Ok(SpecLocals::Copy),
            "zero" => Ok(SpecLocals::Zero),
            _ => Err(format!(
                "unknown speculative-locals policy `{s}` (expected copy or zero)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Semantics {
    pub model: MemoryModel,
    pub mode: SpecMode,
    pub spec_locals: SpecLocals,
    /// Unfoldings allowed per loop entry.
    pub loop_bound: u32,
    /// Maximum nesting of speculation contexts.
    pub spec_depth: u32,
}

impl Semantics {
    pub fn new(model: MemoryModel, mode: SpecMode) -> Semantics {
        Semantics {
            model,
            mode,
            spec_locals: SpecLocals::Copy,
            loop_bound: 16,
            spec_depth: 2,
        }
    }
}

/// One command-level transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmdStep {
    pub action: Action,
    pub next: Cmd,
    /// Registers a silent control step depends on; an earlier action that
    /// writes one of them cannot be overtaken by it.
    deps: BTreeSet<Name>,
}

impl CmdStep {
    fn new(action: Action, next: Cmd) -> CmdStep {
        CmdStep {
            action,
            next,
            deps: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Steps<T> {
    pub items: Vec<T>,
    /// Some successor was cut off by the loop bound.
    pub truncated: bool,
}

impl<T> Steps<T> {
    fn new() -> Steps<T> {
        Steps {
            items: Vec::new(),
            truncated: false,
        }
    }
}

/// Expands a conditional according to `mode`. `ctx_regs` seeds the
/// transient contexts; `None` disables speculation (depth limit reached).
pub fn expand_if(b: &Expr, c1: &Cmd, c2: &Cmd, mode: SpecMode, ctx_regs: Option<&Registers>) -> Cmd {
    let yes = || Command::prefix(Action::Guard(b.clone()), c1.clone());
    let no = || Command::prefix(Action::Guard(Expr::not(b.clone())), c2.clone());
    let plain = || Command::choice(yes(), no());
    let Some(regs) = ctx_regs else {
        return plain();
    };
    match mode {
        SpecMode::Off => plain(),
        SpecMode::WrongBranch => Command::choice(
            Command::interrupt(Command::speculate(trans_ctx(c2, regs)), yes()),
            Command::interrupt(Command::speculate(trans_ctx(c1, regs)), no()),
        ),
        SpecMode::BothBranches => Command::choice(
            Command::interrupt(
                Command::speculate(trans_ctx(&Command::choice(c2.clone(), c1.clone()), regs)),
                yes(),
            ),
            Command::interrupt(
                Command::speculate(trans_ctx(&Command::choice(c1.clone(), c2.clone()), regs)),
                no(),
            ),
        ),
        SpecMode::AnnotatedLoads => Command::choice(
            Command::prefix(Action::Guard(b.clone()), annotate_loads(c1)),
            Command::prefix(Action::Guard(Expr::not(b.clone())), annotate_loads(c2)),
        ),
    }
}

/// Transient context: an empty buffer around a register copy.
pub fn trans_ctx(c: &Cmd, regs: &Registers) -> Cmd {
    Command::buffer(TransientStore::new(), Command::locals(regs.clone(), c.clone()))
}

/// Puts a cache fetch in front of every load in the straight-line part of
/// `c`. Nested conditionals are annotated when they are expanded.
pub fn annotate_loads(c: &Cmd) -> Cmd {
    let annotate = |a: &Action, k: Cmd, strict: bool| {
        let k = annotate_loads(&k);
        let rebuilt = if strict {
            Command::strict(a.clone(), k)
        } else {
            Command::prefix(a.clone(), k)
        };
        match a {
            Action::Assign(Loc::Reg(_), e) => e
                .global_reads()
                .into_iter()
                .rev()
                .fold(rebuilt, |k, l| Command::strict(Action::CacheFetch(l), k)),
            _ => rebuilt,
        }
    };
    match &**c {
        Command::Prefix(a, k) => annotate(a, k.clone(), false),
        Command::Strict(a, k) => annotate(a, k.clone(), true),
        Command::Choice(a, b) => Command::choice(annotate_loads(a), annotate_loads(b)),
        _ => c.clone(),
    }
}

struct Cx<'a> {
    sem: &'a Semantics,
    layout: &'a Layout,
    mem: &'a MemoryImage,
    /// Innermost first.
    buffers: Vec<&'a TransientStore>,
    /// Outermost first.
    regs: Vec<&'a Registers>,
    spec_depth: u32,
    under_reorder: bool,
}

impl<'a> Cx<'a> {
    fn root(sem: &'a Semantics, layout: &'a Layout, mem: &'a MemoryImage, regs: &'a Registers) -> Cx<'a> {
        Cx {
            sem,
            layout,
            mem,
            buffers: Vec::new(),
            regs: vec![regs],
            spec_depth: 0,
            under_reorder: false,
        }
    }

    fn child(&self) -> Cx<'a> {
        Cx {
            sem: self.sem,
            layout: self.layout,
            mem: self.mem,
            buffers: self.buffers.clone(),
            regs: self.regs.clone(),
            spec_depth: self.spec_depth,
            under_reorder: self.under_reorder,
        }
    }

    fn view(&self) -> StateView<'_> {
        StateView {
            layout: self.layout,
            regs: None,
            buffers: &self.buffers,
            mem: self.mem,
        }
    }

    fn merged_regs(&self) -> Registers {
        self.regs.iter().fold(Registers::new(), |acc, r| acc.overlay(r))
    }

    fn wrap(&self) -> impl Fn(i64) -> i64 {
        let w = self.layout.width();
        move |v| w.wrap(v)
    }

    /// Inside speculation a failed evaluation blocks the step instead of
    /// aborting exploration.
    fn soft<T>(&self, r: Result<T, EvalError>) -> Result<Option<T>, EvalError> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(_) if self.spec_depth > 0 => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn step_cmd<'a>(c: &'a Cmd, cx: &Cx<'a>) -> Result<Steps<CmdStep>, EvalError> {
    let mut out = Steps::new();
    match &**c {
        Command::Skip => {}
        Command::Prefix(a, k) => {
            out.items.push(CmdStep::new(a.clone(), k.clone()));
            let mut inner_cx = cx.child();
            inner_cx.under_reorder = true;
            let inner = step_cmd(k, &inner_cx)?;
            out.truncated |= inner.truncated;
            for s in inner.items {
                let (action, ok) = if s.action == Action::Tau {
                    (Action::Tau, !s.deps.iter().any(|r| a.writes_register(r)))
                } else {
                    let fwd = forward(a, &s.action);
                    let ok = cx
                        .sem
                        .model
                        .reorderable(&canonical(cx.layout, a), &canonical(cx.layout, &fwd));
                    (fwd, ok)
                };
                if ok {
                    out.items.push(CmdStep {
                        action,
                        next: Command::prefix(a.clone(), s.next),
                        deps: s.deps,
                    });
                }
            }
        }
        Command::Strict(a, k) => out.items.push(CmdStep::new(a.clone(), k.clone())),
        Command::Choice(c1, c2) => {
            out.items.push(CmdStep::new(Action::Tau, c1.clone()));
            out.items.push(CmdStep::new(Action::Tau, c2.clone()));
        }
        Command::If(b, c1, c2) => {
            let speculate = cx.spec_depth < cx.sem.spec_depth;
            let regs = speculate.then(|| {
                let merged = cx.merged_regs();
                match cx.sem.spec_locals {
                    SpecLocals::Copy => merged,
                    SpecLocals::Zero => merged.zeroed(),
                }
            });
            let next = expand_if(b, c1, c2, cx.sem.mode, regs.as_ref());
            out.items.push(CmdStep {
                action: Action::Tau,
                next,
                deps: c.registers(),
            });
        }
        Command::While {
            cond,
            body,
            exit,
            unfolded,
        } => {
            if cx.under_reorder {
                return Ok(out);
            }
            if *unfolded >= cx.sem.loop_bound {
                out.truncated = cx.spec_depth == 0;
                return Ok(out);
            }
            let again = Arc::new(Command::While {
                cond: cond.clone(),
                body: body.clone(),
                exit: exit.clone(),
                unfolded: unfolded + 1,
            });
            let next = Command::if_(cond.clone(), append(body, &again), exit.clone());
            out.items.push(CmdStep::new(Action::Tau, next));
        }
        Command::Speculate(k) => {
            if k.is_skip() {
                out.items.push(CmdStep::new(Action::Tau, Command::skip()));
                return Ok(out);
            }
            let mut inner_cx = cx.child();
            inner_cx.spec_depth += 1;
            let inner = step_cmd(k, &inner_cx)?;
            out.truncated |= inner.truncated;
            for s in inner.items {
                if let Some(step) = speculate_step(s)? {
                    out.items.push(step);
                }
            }
        }
        Command::Interrupt(c1, c2) => {
            // A finished c2 ends the whole construct; c1 may still act first.
            if c2.is_skip() {
                out.items.push(CmdStep::new(Action::Tau, Command::skip()));
            }
            let first = step_cmd(c1, cx)?;
            out.truncated |= first.truncated;
            for s in first.items {
                out.items.push(CmdStep {
                    action: s.action,
                    next: Command::interrupt(s.next, c2.clone()),
                    deps: s.deps,
                });
            }
            let second = step_cmd(c2, cx)?;
            out.truncated |= second.truncated;
            out.items.extend(second.items);
        }
        Command::Buffer(store, k) => {
            if k.is_skip() {
                out.items.push(CmdStep::new(Action::Tau, Command::skip()));
                return Ok(out);
            }
            let mut inner_cx = cx.child();
            inner_cx.buffers.insert(0, store);
            let inner = step_cmd(k, &inner_cx)?;
            out.truncated |= inner.truncated;
            for s in inner.items {
                if let Some(step) = buffer_step(store, s, cx)? {
                    out.items.push(step);
                }
            }
        }
        Command::Locals(regs, k) => {
            if k.is_skip() {
                out.items.push(CmdStep::new(Action::Tau, Command::skip()));
                return Ok(out);
            }
            let mut inner_cx = cx.child();
            inner_cx.regs.push(regs);
            let inner = step_cmd(k, &inner_cx)?;
            out.truncated |= inner.truncated;
            for s in inner.items {
                let Some((action, regs2)) = cx.soft(promote_locals(regs, &s.action, cx))? else {
                    continue;
                };
                let deps = s.deps.into_iter().filter(|r| !regs.contains(r)).collect();
                out.items.push(CmdStep {
                    action,
                    next: Command::locals(regs2, s.next),
                    deps,
                });
            }
        }
        Command::Seq(c1, c2) => {
            if c1.is_skip() {
                out.items.push(CmdStep::new(Action::Tau, c2.clone()));
                return Ok(out);
            }
            let first = step_cmd(c1, cx)?;
            out.truncated |= first.truncated;
            for s in first.items {
                out.items.push(CmdStep {
                    action: s.action,
                    next: Command::seq(s.next, c2.clone()),
                    deps: s.deps,
                });
            }
        }
    }
    Ok(out)
}

/// Resolved locations renamed to the declaration owning their cell, so
/// that syntactic alias checks see through aliases and out-of-bounds
/// indices.
fn canonical(layout: &Layout, a: &Action) -> Action {
    let expr = |e: &Expr| {
        e.map(&mut |n| match n {
            Expr::Var(_) | Expr::Elem(..) => {
                let l = match n {
                    Expr::Var(x) => Loc::Var(x),
                    Expr::Elem(x, i) => Loc::Elem(x, i),
                    _ => unreachable!(),
                };
                layout.canonicalize(&l).as_expr()
            }
            Expr::InCache(l) => Expr::InCache(layout.canonicalize(&l)),
            other => other,
        })
    };
    match a {
        Action::Assign(l, e) => Action::Assign(layout.canonicalize(l), expr(e)),
        Action::Guard(e) => Action::Guard(expr(e)),
        Action::DelayedGuard(e) => Action::DelayedGuard(expr(e)),
        Action::CacheFetch(l) => Action::CacheFetch(layout.canonicalize(l)),
        other => other.clone(),
    }
}

/// Speculation rules: loads surface as cache fetches with the load itself
/// delayed behind the continuing speculation; silent steps and nested
/// fetches pass; anything else (fences, flushes, cache queries) blocks.
fn speculate_step(s: CmdStep) -> Result<Option<CmdStep>, EvalError> {
    let wrap = |action, next: Cmd| {
        Some(CmdStep {
            action,
            next,
            deps: BTreeSet::new(),
        })
    };
    Ok(match s.action {
        Action::Tau => wrap(Action::Tau, Command::speculate(s.next)),
        Action::CacheFetch(l) => wrap(Action::CacheFetch(l), Command::speculate(s.next)),
        Action::Guard(e) | Action::DelayedGuard(e) => {
            if e.mentions_cache() {
                return Ok(None);
            }
            let reads = e.global_reads();
            if reads.is_empty() {
                if e.has_registers() {
                    return Ok(None);
                }
                return Ok(match eval(&e, &Closed) {
                    Ok(v) if v != 0 => wrap(Action::Tau, Command::speculate(s.next)),
                    _ => None,
                });
            }
            if !reads.iter().all(Loc::is_resolved) {
                return Ok(None);
            }
            let pending = Command::prefix(Action::DelayedGuard(e), Command::speculate(s.next));
            let next = reads[1..]
                .iter()
                .rev()
                .fold(pending, |k, l| Command::prefix(Action::CacheFetch(l.clone()), k));
            wrap(Action::CacheFetch(reads[0].clone()), next)
        }
        _ => None,
    })
}

/// Transient buffer rules: capture stores, service buffered loads and
/// suppress fetches of buffered locations; promote everything else.
fn buffer_step(store: &TransientStore, s: CmdStep, cx: &Cx<'_>) -> Result<Option<CmdStep>, EvalError> {
    let view = cx.view();
    let keep = |action, next| {
        Some(CmdStep {
            action,
            next: Command::buffer(store.clone(), next),
            deps: BTreeSet::new(),
        })
    };
    let delayed = matches!(s.action, Action::DelayedGuard(_));
    Ok(match s.action {
        Action::Assign(loc, value) if !loc.is_register() => {
            let Expr::Int(v) = value else { return Ok(None) };
            if !loc.is_resolved() {
                return Ok(None);
            }
            let Some(addr) = cx.soft(crate::machine::addr_of(cx.layout, &loc, &view))? else {
                return Ok(None);
            };
            Some(CmdStep {
                action: Action::Tau,
                next: Command::buffer(store.updated(addr, v), s.next),
                deps: BTreeSet::new(),
            })
        }
        Action::Guard(e) | Action::DelayedGuard(e) if !e.global_reads().is_empty() => {
            let mut e2 = e.clone();
            for l in e.global_reads() {
                if !l.is_resolved() {
                    continue;
                }
                let Some(addr) = cx.soft(crate::machine::addr_of(cx.layout, &l, &view))? else {
                    return Ok(None);
                };
                if let Some(v) = store.get(addr) {
                    e2 = e2.subst_global(&l, v);
                }
            }
            if e2.is_closed() {
                match eval(&e2, &Closed) {
                    Ok(v) if v != 0 => keep(Action::Tau, s.next),
                    _ => None,
                }
            } else if delayed {
                keep(Action::DelayedGuard(e2), s.next)
            } else {
                keep(Action::Guard(e2), s.next)
            }
        }
        Action::CacheFetch(loc) if loc.is_resolved() => {
            let Some(addr) = cx.soft(crate::machine::addr_of(cx.layout, &loc, &view))? else {
                return Ok(None);
            };
            if store.contains(addr) {
                keep(Action::Tau, s.next)
            } else {
                keep(Action::CacheFetch(loc), s.next)
            }
        }
        other => Some(CmdStep {
            action: other,
            next: Command::buffer(store.clone(), s.next),
            deps: s.deps,
        }),
    })
}

/// Local-scope rules: register updates go silent (or become value-binding
/// load guards when they read globals); other actions get this scope's
/// registers substituted before promotion.
fn promote_locals(regs: &Registers, action: &Action, cx: &Cx<'_>) -> Result<(Action, Registers), EvalError> {
    let wrap = cx.wrap();
    let view = cx.view();
    Ok(match action {
        Action::Assign(Loc::Reg(r), e) if regs.contains(r) => {
            let e = e.subst_registers(regs, &wrap);
            if let Some(free) = e.registers().into_iter().next() {
                return Err(EvalError::UnboundRegister(free));
            }
            let reads = e.global_reads();
            let mut bound = Vec::with_capacity(reads.len());
            for l in &reads {
                if !l.is_resolved() {
                    return Err(EvalError::Unresolved(l.to_string(), "index did not resolve"));
                }
                let addr = crate::machine::addr_of(cx.layout, l, &view)?;
                bound.push(Expr::bin(BinOp::Eq, l.as_expr(), Expr::Int(view.read(addr))));
            }
            let value = eval(&e, &view)?;
            let regs2 = regs.updated(r, value);
            let label = bound
                .into_iter()
                .reduce(|acc, g| Expr::bin(BinOp::And, acc, g))
                .map_or(Action::Tau, Action::Guard);
            (label, regs2)
        }
        Action::Assign(Loc::Reg(r), e) => (
            Action::Assign(Loc::Reg(r.clone()), e.subst_registers(regs, &wrap)),
            regs.clone(),
        ),
        Action::Assign(loc, e) => {
            let loc = loc.subst_registers(regs, &wrap);
            let e = e.subst_registers(regs, &wrap);
            let e = if e.is_closed() { Expr::Int(eval(&e, &view)?) } else { e };
            (Action::Assign(loc, e), regs.clone())
        }
        Action::Guard(e) => (Action::Guard(e.subst_registers(regs, &wrap)), regs.clone()),
        Action::DelayedGuard(e) => (Action::DelayedGuard(e.subst_registers(regs, &wrap)), regs.clone()),
        Action::CacheFetch(l) => (Action::CacheFetch(l.subst_registers(regs, &wrap)), regs.clone()),
        other => (other.clone(), regs.clone()),
    })
}

/// Command-level successors of `cmd` running in a process whose registers
/// are `regs`. Labels are raw actions, before the process scope resolves
/// them.
pub fn step_command(
    cmd: &Cmd,
    regs: &Registers,
    layout: &Layout,
    mem: &MemoryImage,
    sem: &Semantics,
) -> Result<Steps<(Action, Cmd)>, EvalError> {
    let cx = Cx::root(sem, layout, mem, regs);
    let steps = step_cmd(cmd, &cx)?;
    Ok(Steps {
        items: steps.items.into_iter().map(|s| (s.action, s.next)).collect(),
        truncated: steps.truncated,
    })
}

// ---------------------------------------------------------------------------
// Systems

/// Static description of one process.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProcessDecl {
    pub name: Name,
    pub regs: Registers,
    pub code: Cmd,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProcState {
    pub regs: Registers,
    pub cmd: Cmd,
}

/// Full system snapshot: shared memory (with cache) and every process.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub mem: MemoryImage,
    pub procs: Vec<ProcState>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct System {
    pub layout: Arc<Layout>,
    pub procs: Vec<ProcessDecl>,
    pub init_mem: MemoryImage,
}

impl System {
    pub fn initial(&self) -> Configuration {
        Configuration {
            mem: self.init_mem.clone(),
            procs: self
                .procs
                .iter()
                .map(|p| ProcState {
                    regs: p.regs.clone(),
                    cmd: p.code.clone(),
                })
                .collect(),
        }
    }

    pub fn process_index(&self, name: &str) -> Option<usize> {
        self.procs.iter().position(|p| &*p.name == name)
    }

    /// Same layout and processes with different code per process.
    pub fn with_code(&self, code: Vec<Cmd>) -> System {
        let mut s = self.clone();
        for (p, c) in s.procs.iter_mut().zip(code) {
            p.code = c;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Visible { proc: usize, action: Action },
    Silent,
}

/// System-level successors: interleaving of the processes, process-scope
/// promotion, then the global store and load rules.
pub fn step(sys: &System, cfg: &Configuration, sem: &Semantics) -> Result<Steps<(Label, Configuration)>, EvalError> {
    let mut out = Steps::new();
    let layout = &*sys.layout;
    for (i, p) in cfg.procs.iter().enumerate() {
        if p.cmd.is_skip() {
            continue;
        }
        let cx = Cx::root(sem, layout, &cfg.mem, &p.regs);
        let inner = step_cmd(&p.cmd, &cx)?;
        out.truncated |= inner.truncated;
        for s in inner.items {
            let (action, regs) = promote_locals(&p.regs, &s.action, &cx)?;
            let Some((label, mem)) = apply_global(layout, &cfg.mem, i, action)? else {
                continue;
            };
            let mut next = cfg.clone();
            next.mem = mem;
            next.procs[i] = ProcState { regs, cmd: s.next };
            let item = (label, next);
            if !out.items.contains(&item) {
                out.items.push(item);
            }
        }
    }
    Ok(out)
}

fn apply_global(
    layout: &Layout,
    mem: &MemoryImage,
    proc: usize,
    action: Action,
) -> Result<Option<(Label, MemoryImage)>, EvalError> {
    let view = StateView::new(layout, mem);
    let visible = |action| Label::Visible { proc, action };
    if let Some(r) = action.registers().into_iter().next() {
        return Err(EvalError::UnboundRegister(r));
    }
    Ok(match action {
        Action::Tau => Some((Label::Silent, mem.clone())),
        Action::Assign(ref loc, Expr::Int(v)) => {
            let addr = crate::machine::addr_of(layout, loc, &view)?;
            let mem2 = mem.write(addr, layout.width().wrap(v));
            Some((visible(action), mem2))
        }
        Action::Assign(_, ref e) => {
            return Err(EvalError::Unresolved(
                e.to_string(),
                "stored value must not read shared memory",
            ))
        }
        Action::Guard(ref e) => (eval(e, &view)? != 0).then(|| (visible(action), mem.clone())),
        Action::DelayedGuard(ref e) => (eval(e, &view)? != 0).then(|| (Label::Silent, mem.clone())),
        Action::CacheFetch(ref loc) => {
            let addr = crate::machine::addr_of(layout, loc, &view)?;
            Some((visible(action), mem.cache_fetch(addr)))
        }
        Action::CacheFlush => Some((visible(action), mem.cache_flush())),
        Action::SpecFence => Some((visible(action), mem.clone())),
    })
}

/// True iff every process has reduced to `Skip`.
pub fn terminated(cfg: &Configuration) -> bool {
    cfg.procs.iter().all(|p| p.cmd.is_skip())
}
