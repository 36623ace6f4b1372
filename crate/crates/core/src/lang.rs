//! Abstract syntax of actions, expressions and commands, plus expression
//! evaluation and the normalisation of surface sequencing into prefix form.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::machine::{Registers, TransientStore};

/// Identifier of a register, global scalar, array or alias.
pub type Name = Arc<str>;

/// Machine value. Arithmetic wraps to the layout's configured width.
pub type Value = i64;

/// Shared command tree node.
pub type Cmd = Arc<Command>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Lt,
    Le,
    Eq,
    Ne,
    And,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::And => 1,
            BinOp::Lt | BinOp::Le | BinOp::Eq | BinOp::Ne => 2,
            BinOp::Add | BinOp::Sub => 3,
        }
    }
}

/// A reference to a storage location.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Loc {
    Reg(Name),
    Var(Name),
    Elem(Name, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(Value),
    Reg(Name),
    Var(Name),
    Elem(Name, Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    InCache(Loc),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Assign(Loc, Expr),
    Guard(Expr),
    /// A load re-sequenced behind its cache fetch by a speculation. It is
    /// checked against shared memory like a guard but is not observable.
    DelayedGuard(Expr),
    SpecFence,
    CacheFetch(Loc),
    CacheFlush,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Skip,
    /// Reorderable prefix `a ; c`.
    Prefix(Action, Cmd),
    /// Ordering-enforced prefix `a ;; c`.
    Strict(Action, Cmd),
    Choice(Cmd, Cmd),
    If(Expr, Cmd, Cmd),
    /// Loop with its continuation; `unfolded` counts unfoldings of this entry.
    While {
        cond: Expr,
        body: Cmd,
        exit: Cmd,
        unfolded: u32,
    },
    Speculate(Cmd),
    Interrupt(Cmd, Cmd),
    Buffer(TransientStore, Cmd),
    Locals(Registers, Cmd),
    /// Surface sequencing. Only survives normalisation after heads that
    /// cannot absorb a continuation (speculation, buffers, local scopes).
    Seq(Cmd, Cmd),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound register `{0}`")]
    UnboundRegister(Name),
    #[error("unknown global `{0}`")]
    UnknownGlobal(Name),
    #[error("address {addr} of `{loc}` lies outside the memory image ({cells} cells)")]
    OutOfImage { loc: String, addr: i64, cells: usize },
    #[error("`{0}` is not an array")]
    NotAnArray(Name),
    #[error("`{0}` is an array and needs an index")]
    NeedsIndex(Name),
    #[error("expression `{0}` cannot be evaluated here: {1}")]
    Unresolved(String, &'static str),
}

fn push_unique(out: &mut Vec<Loc>, l: Loc) {
    if !out.contains(&l) {
        out.push(l);
    }
}

/// Read access to the state an expression is evaluated against.
pub trait Valuation {
    fn register(&self, name: &Name) -> Result<Value, EvalError>;
    /// Value of a global scalar (`index == None`) or array element.
    fn global(&self, name: &Name, index: Option<Value>) -> Result<Value, EvalError>;
    fn in_cache(&self, name: &Name, index: Option<Value>) -> Result<bool, EvalError>;
    fn wrap(&self, v: Value) -> Value {
        v
    }
}

pub fn truth(b: bool) -> Value {
    b as Value
}

/// Evaluates `e`; booleans come back as 0/1 and any nonzero value is true.
pub fn eval(e: &Expr, env: &dyn Valuation) -> Result<Value, EvalError> {
    Ok(match e {
        Expr::Int(v) => *v,
        Expr::Reg(r) => env.register(r)?,
        Expr::Var(x) => env.global(x, None)?,
        Expr::Elem(a, i) => {
            let i = eval(i, env)?;
            env.global(a, Some(i))?
        }
        Expr::Not(e) => truth(eval(e, env)? == 0),
        Expr::Bin(op, l, r) => {
            let l = eval(l, env)?;
            if *op == BinOp::And && l == 0 {
                return Ok(0);
            }
            let r = eval(r, env)?;
            match op {
                BinOp::Add => env.wrap(l.wrapping_add(r)),
                BinOp::Sub => env.wrap(l.wrapping_sub(r)),
                BinOp::Lt => truth(l < r),
                BinOp::Le => truth(l <= r),
                BinOp::Eq => truth(l == r),
                BinOp::Ne => truth(l != r),
                BinOp::And => truth(r != 0),
            }
        }
        Expr::InCache(loc) => match loc {
            Loc::Var(x) => truth(env.in_cache(x, None)?),
            Loc::Elem(a, i) => {
                let i = eval(i, env)?;
                truth(env.in_cache(a, Some(i))?)
            }
            Loc::Reg(r) => return Err(EvalError::Unresolved(r.to_string(), "registers have no address")),
        },
    })
}

/// Evaluation context with no state: only closed expressions evaluate.
pub struct Closed;

impl Valuation for Closed {
    fn register(&self, name: &Name) -> Result<Value, EvalError> {
        Err(EvalError::UnboundRegister(name.clone()))
    }
    fn global(&self, name: &Name, _: Option<Value>) -> Result<Value, EvalError> {
        Err(EvalError::Unresolved(name.to_string(), "global read in closed context"))
    }
    fn in_cache(&self, name: &Name, _: Option<Value>) -> Result<bool, EvalError> {
        Err(EvalError::Unresolved(name.to_string(), "cache query in closed context"))
    }
}

impl Expr {
    pub fn int(v: Value) -> Expr {
        Expr::Int(v)
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.into())
    }

    pub fn reg(name: &str) -> Expr {
        Expr::Reg(name.into())
    }

    pub fn is_closed(&self) -> bool {
        let mut closed = true;
        self.visit(&mut |e| {
            if matches!(e, Expr::Reg(_) | Expr::Var(_) | Expr::Elem(..) | Expr::InCache(_)) {
                closed = false;
            }
        });
        closed
    }

    pub fn mentions_cache(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::InCache(_)));
        found
    }

    pub fn has_registers(&self) -> bool {
        !self.registers().is_empty()
    }

    pub fn registers(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_registers(&mut out);
        out
    }

    fn collect_registers(&self, out: &mut BTreeSet<Name>) {
        self.visit(&mut |e| match e {
            Expr::Reg(r) => {
                out.insert(r.clone());
            }
            Expr::InCache(Loc::Reg(r)) => {
                out.insert(r.clone());
            }
            _ => {}
        });
    }

    /// Global locations read by this expression (data reads, not cache
    /// queries), in first-occurrence order.
    pub fn global_reads(&self) -> Vec<Loc> {
        let mut out: Vec<Loc> = Vec::new();
        self.reads_into(&mut out);
        out
    }

    fn reads_into(&self, out: &mut Vec<Loc>) {
        match self {
            Expr::Int(_) | Expr::Reg(_) => {}
            Expr::Var(x) => push_unique(out, Loc::Var(x.clone())),
            Expr::Elem(a, i) => {
                i.reads_into(out);
                push_unique(out, Loc::Elem(a.clone(), i.clone()));
            }
            Expr::Not(e) => e.reads_into(out),
            Expr::Bin(_, l, r) => {
                l.reads_into(out);
                r.reads_into(out);
            }
            Expr::InCache(loc) => {
                if let Loc::Elem(_, i) = loc {
                    i.reads_into(out);
                }
            }
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Elem(_, i) => i.visit(f),
            Expr::Not(e) => e.visit(f),
            Expr::Bin(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Expr::InCache(Loc::Elem(_, i)) => i.visit(f),
            _ => {}
        }
    }

    /// Bottom-up rewrite; `f` sees each node after its children.
    pub fn map(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let e = match self {
            Expr::Int(_) | Expr::Reg(_) | Expr::Var(_) => self.clone(),
            Expr::Elem(a, i) => Expr::Elem(a.clone(), Box::new(i.map(f))),
            Expr::Not(e) => Expr::Not(Box::new(e.map(f))),
            Expr::Bin(op, l, r) => Expr::Bin(*op, Box::new(l.map(f)), Box::new(r.map(f))),
            Expr::InCache(loc) => Expr::InCache(loc.map_index(f)),
        };
        f(e)
    }

    /// Replaces registers bound in `regs`, folding closed array indices to
    /// literals so resolved locations compare syntactically.
    pub fn subst_registers(&self, regs: &Registers, wrap: &dyn Fn(Value) -> Value) -> Expr {
        self.map(&mut |e| match e {
            Expr::Reg(r) => match regs.get(&r) {
                Some(v) => Expr::Int(v),
                None => Expr::Reg(r),
            },
            Expr::Elem(a, i) => Expr::Elem(a, Box::new(fold_closed(*i, wrap))),
            Expr::InCache(Loc::Elem(a, i)) => Expr::InCache(Loc::Elem(a, Box::new(fold_closed(*i, wrap)))),
            other => other,
        })
    }

    /// Replaces reads of global `loc` by `value` (forwarding).
    /// Replaces reads of `loc` by `value`.
    pub fn subst_global_expr(&self, loc: &Loc, value: &Expr) -> Expr {
        self.map(&mut |e| match (&e, loc) {
            (Expr::Var(x), Loc::Var(y)) if x == y => value.clone(),
            (Expr::Elem(a, i), Loc::Elem(b, j)) if a == b && i == j => value.clone(),
            _ => e,
        })
    }

    pub fn subst_global(&self, loc: &Loc, value: Value) -> Expr {
        self.map(&mut |e| match (&e, loc) {
            (Expr::Var(x), Loc::Var(y)) if x == y => Expr::Int(value),
            (Expr::Elem(a, i), Loc::Elem(b, j)) if a == b && i == j => Expr::Int(value),
            _ => e,
        })
    }
}

fn fold_closed(e: Expr, wrap: &dyn Fn(Value) -> Value) -> Expr {
    struct Wrapping<'a>(&'a dyn Fn(Value) -> Value);
    impl Valuation for Wrapping<'_> {
        fn register(&self, name: &Name) -> Result<Value, EvalError> {
            Closed.register(name)
        }
        fn global(&self, name: &Name, i: Option<Value>) -> Result<Value, EvalError> {
            Closed.global(name, i)
        }
        fn in_cache(&self, name: &Name, i: Option<Value>) -> Result<bool, EvalError> {
            Closed.in_cache(name, i)
        }
        fn wrap(&self, v: Value) -> Value {
            (self.0)(v)
        }
    }
    if e.is_closed() && !matches!(e, Expr::Int(_)) {
        if let Ok(v) = eval(&e, &Wrapping(wrap)) {
            return Expr::Int(v);
        }
    }
    e
}

impl Loc {
    pub fn var(name: &str) -> Loc {
        Loc::Var(name.into())
    }

    pub fn elem(name: &str, index: Value) -> Loc {
        Loc::Elem(name.into(), Box::new(Expr::Int(index)))
    }

    pub fn name(&self) -> &Name {
        match self {
            Loc::Reg(n) | Loc::Var(n) | Loc::Elem(n, _) => n,
        }
    }

    pub fn is_register(&self) -> bool {
        matches!(self, Loc::Reg(_))
    }

    /// True when the location is fully resolved (literal index, if any).
    pub fn is_resolved(&self) -> bool {
        match self {
            Loc::Reg(_) => false,
            Loc::Var(_) => true,
            Loc::Elem(_, i) => matches!(**i, Expr::Int(_)),
        }
    }

    pub fn index_registers(&self) -> BTreeSet<Name> {
        match self {
            Loc::Elem(_, i) => i.registers(),
            _ => BTreeSet::new(),
        }
    }

    pub fn as_expr(&self) -> Expr {
        match self {
            Loc::Reg(r) => Expr::Reg(r.clone()),
            Loc::Var(x) => Expr::Var(x.clone()),
            Loc::Elem(a, i) => Expr::Elem(a.clone(), i.clone()),
        }
    }

    fn map_index(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Loc {
        match self {
            Loc::Elem(a, i) => Loc::Elem(a.clone(), Box::new(i.map(f))),
            other => other.clone(),
        }
    }

    pub fn subst_registers(&self, regs: &Registers, wrap: &dyn Fn(Value) -> Value) -> Loc {
        match self {
            Loc::Elem(a, i) => Loc::Elem(a.clone(), Box::new(fold_closed(i.subst_registers(regs, wrap), wrap))),
            other => other.clone(),
        }
    }

    /// Aliasing between two locations, exact when both are canonical
    /// resolved cells. A symbolic index may reach any global cell, since
    /// out-of-bounds indices run into neighbouring declarations.
    pub fn may_alias(&self, other: &Loc) -> bool {
        match (self, other) {
            (Loc::Reg(a), Loc::Reg(b)) => a == b,
            (Loc::Reg(_), _) | (_, Loc::Reg(_)) => false,
            _ if !self.is_resolved() || !other.is_resolved() => true,
            _ => self == other,
        }
    }
}

impl Action {
    pub fn assign(loc: Loc, e: Expr) -> Action {
        Action::Assign(loc, e)
    }

    /// Locations (global or register) written by the action.
    pub fn writes_register(&self, r: &Name) -> bool {
        matches!(self, Action::Assign(Loc::Reg(x), _) if x == r)
    }

    pub fn is_store(&self) -> bool {
        matches!(self, Action::Assign(l, _) if !l.is_register())
    }

    /// A register assignment: a load when its expression reads globals,
    /// a local computation otherwise.
    pub fn is_register_assign(&self) -> bool {
        matches!(self, Action::Assign(Loc::Reg(_), _))
    }

    pub fn mentions_cache(&self) -> bool {
        match self {
            Action::Guard(e) | Action::DelayedGuard(e) => e.mentions_cache(),
            _ => false,
        }
    }

    /// Global locations the action reads.
    pub fn global_reads(&self) -> Vec<Loc> {
        match self {
            Action::Assign(l, e) => {
                let mut v = e.global_reads();
                if let Loc::Elem(_, i) = l {
                    for r in i.global_reads() {
                        if !v.contains(&r) {
                            v.push(r)
                        }
                    }
                }
                v
            }
            Action::Guard(e) | Action::DelayedGuard(e) => e.global_reads(),
            Action::CacheFetch(Loc::Elem(_, i)) => i.global_reads(),
            _ => Vec::new(),
        }
    }

    pub fn registers(&self) -> BTreeSet<Name> {
        match self {
            Action::Assign(l, e) => {
                let mut s = e.registers();
                s.extend(l.index_registers());
                if let Loc::Reg(r) = l {
                    s.insert(r.clone());
                }
                s
            }
            Action::Guard(e) | Action::DelayedGuard(e) => e.registers(),
            Action::CacheFetch(l) => l.index_registers(),
            _ => BTreeSet::new(),
        }
    }

    /// Trace rendering: `x := 1`, `[z = 42]`, `fetch z`, `flush`, `fence`.
    pub fn label(&self) -> String {
        match self {
            Action::CacheFetch(l) => format!("fetch {l}"),
            other => other.to_string(),
        }
    }
}

impl Command {
    pub fn skip() -> Cmd {
        Arc::new(Command::Skip)
    }

    pub fn prefix(a: Action, c: Cmd) -> Cmd {
        Arc::new(Command::Prefix(a, c))
    }

    pub fn strict(a: Action, c: Cmd) -> Cmd {
        Arc::new(Command::Strict(a, c))
    }

    pub fn choice(c1: Cmd, c2: Cmd) -> Cmd {
        Arc::new(Command::Choice(c1, c2))
    }

    pub fn if_(b: Expr, c1: Cmd, c2: Cmd) -> Cmd {
        Arc::new(Command::If(b, c1, c2))
    }

    pub fn while_(cond: Expr, body: Cmd) -> Cmd {
        Arc::new(Command::While {
            cond,
            body,
            exit: Command::skip(),
            unfolded: 0,
        })
    }

    pub fn speculate(c: Cmd) -> Cmd {
        Arc::new(Command::Speculate(c))
    }

    pub fn interrupt(c1: Cmd, c2: Cmd) -> Cmd {
        Arc::new(Command::Interrupt(c1, c2))
    }

    pub fn buffer(s: TransientStore, c: Cmd) -> Cmd {
        Arc::new(Command::Buffer(s, c))
    }

    pub fn locals(r: Registers, c: Cmd) -> Cmd {
        Arc::new(Command::Locals(r, c))
    }

    pub fn seq(c1: Cmd, c2: Cmd) -> Cmd {
        Arc::new(Command::Seq(c1, c2))
    }

    /// Reorderable prefix chain of `actions` ending in `Skip`.
    pub fn chain(actions: impl IntoIterator<Item = Action>) -> Cmd {
        let actions: Vec<Action> = actions.into_iter().collect();
        actions
            .into_iter()
            .rev()
            .fold(Command::skip(), |c, a| Command::prefix(a, c))
    }

    /// Ordering-enforced chain of `actions` followed by `tail`.
    pub fn strict_chain(actions: impl IntoIterator<Item = Action>, tail: Cmd) -> Cmd {
        let actions: Vec<Action> = actions.into_iter().collect();
        actions.into_iter().rev().fold(tail, |c, a| Command::strict(a, c))
    }

    pub fn is_skip(&self) -> bool {
        matches!(self, Command::Skip)
    }

    /// Registers referenced anywhere in the command, excluding those bound
    /// by nested local scopes.
    pub fn registers(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_registers(&mut out);
        out
    }

    fn collect_registers(&self, out: &mut BTreeSet<Name>) {
        match self {
            Command::Skip => {}
            Command::Prefix(a, c) | Command::Strict(a, c) => {
                out.extend(a.registers());
                c.collect_registers(out);
            }
            Command::Choice(a, b) | Command::Interrupt(a, b) | Command::Seq(a, b) => {
                a.collect_registers(out);
                b.collect_registers(out);
            }
            Command::If(e, a, b) => {
                out.extend(e.registers());
                a.collect_registers(out);
                b.collect_registers(out);
            }
            Command::While { cond, body, exit, .. } => {
                out.extend(cond.registers());
                body.collect_registers(out);
                exit.collect_registers(out);
            }
            Command::Speculate(c) | Command::Buffer(_, c) => c.collect_registers(out),
            Command::Locals(regs, c) => {
                let mut inner = BTreeSet::new();
                c.collect_registers(&mut inner);
                out.extend(inner.into_iter().filter(|r| !regs.contains(r)));
            }
        }
    }

    /// Number of `Seq` nodes in the tree.
    pub fn seq_count(&self) -> usize {
        match self {
            Command::Skip => 0,
            Command::Prefix(_, c) | Command::Strict(_, c) => c.seq_count(),
            Command::Choice(a, b) | Command::Interrupt(a, b) => a.seq_count() + b.seq_count(),
            Command::Seq(a, b) => 1 + a.seq_count() + b.seq_count(),
            Command::If(_, a, b) => a.seq_count() + b.seq_count(),
            Command::While { body, exit, .. } => body.seq_count() + exit.seq_count(),
            Command::Speculate(c) | Command::Buffer(_, c) | Command::Locals(_, c) => c.seq_count(),
        }
    }

    /// Every action occurring in the tree, in left-to-right order.
    pub fn actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        self.collect_actions(&mut out);
        out
    }

    fn collect_actions(&self, out: &mut Vec<Action>) {
        match self {
            Command::Skip => {}
            Command::Prefix(a, c) | Command::Strict(a, c) => {
                out.push(a.clone());
                c.collect_actions(out);
            }
            Command::Choice(a, b) | Command::Interrupt(a, b) | Command::Seq(a, b) => {
                a.collect_actions(out);
                b.collect_actions(out);
            }
            Command::If(_, a, b) => {
                a.collect_actions(out);
                b.collect_actions(out);
            }
            Command::While { body, exit, .. } => {
                body.collect_actions(out);
                exit.collect_actions(out);
            }
            Command::Speculate(c) | Command::Buffer(_, c) | Command::Locals(_, c) => c.collect_actions(out),
        }
    }
}

/// Eliminates surface `Seq` nodes by pushing each continuation into the
/// tails of prefix chains, both arms of choices and conditionals, and the
/// exit of loops. Idempotent.
pub fn normalize(c: &Cmd) -> Cmd {
    match &**c {
        Command::Skip => c.clone(),
        Command::Prefix(a, k) => Command::prefix(a.clone(), normalize(k)),
        Command::Strict(a, k) => Command::strict(a.clone(), normalize(k)),
        Command::Choice(a, b) => Command::choice(normalize(a), normalize(b)),
        Command::If(e, a, b) => Command::if_(e.clone(), normalize(a), normalize(b)),
        Command::While {
            cond,
            body,
            exit,
            unfolded,
        } => Arc::new(Command::While {
            cond: cond.clone(),
            body: normalize(body),
            exit: normalize(exit),
            unfolded: *unfolded,
        }),
        Command::Speculate(k) => Command::speculate(normalize(k)),
        Command::Interrupt(a, b) => Command::interrupt(normalize(a), normalize(b)),
        Command::Buffer(s, k) => Command::buffer(s.clone(), normalize(k)),
        Command::Locals(r, k) => Command::locals(r.clone(), normalize(k)),
        Command::Seq(a, b) => append(&normalize(a), &normalize(b)),
    }
}

/// Sequential composition of two normalised commands.
pub fn append(c: &Cmd, tail: &Cmd) -> Cmd {
    if tail.is_skip() {
        return c.clone();
    }
    match &**c {
        Command::Skip => tail.clone(),
        Command::Prefix(a, k) => Command::prefix(a.clone(), append(k, tail)),
        Command::Strict(a, k) => Command::strict(a.clone(), append(k, tail)),
        Command::Choice(a, b) => Command::choice(append(a, tail), append(b, tail)),
        Command::If(e, a, b) => Command::if_(e.clone(), append(a, tail), append(b, tail)),
        Command::While {
            cond,
            body,
            exit,
            unfolded,
        } => Arc::new(Command::While {
            cond: cond.clone(),
            body: body.clone(),
            exit: append(exit, tail),
            unfolded: *unfolded,
        }),
        Command::Interrupt(a, b) => Command::interrupt(a.clone(), append(b, tail)),
        Command::Seq(a, b) => append(a, &append(b, tail)),
        Command::Speculate(_) | Command::Buffer(..) | Command::Locals(..) => Command::seq(c.clone(), tail.clone()),
    }
}

// ---------------------------------------------------------------------------
// Printing. The output is valid concrete syntax for surface constructs.

struct Prec<'a>(&'a Expr, u8);

impl fmt::Display for Prec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Prec(e, min) = *self;
        match e {
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                let body = format!("{} {} {}", Prec(l, p), op.symbol(), Prec(r, p + 1));
                if p < min {
                    write!(f, "({body})")
                } else {
                    f.write_str(&body)
                }
            }
            Expr::Not(inner) => write!(f, "!{}", Prec(inner, 4)),
            Expr::Int(v) if *v < 0 && min > 0 => write!(f, "({v})"),
            other => fmt_atom(other, f),
        }
    }
}

fn fmt_atom(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Int(v) => write!(f, "{v}"),
        Expr::Reg(n) | Expr::Var(n) => f.write_str(n),
        Expr::Elem(a, i) => write!(f, "{a}[{i}]"),
        Expr::InCache(l) => write!(f, "in_cache({l})"),
        _ => unreachable!("compound expressions are handled by Prec"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Prec(self, 0))
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Reg(n) | Loc::Var(n) => f.write_str(n),
            Loc::Elem(a, i) => write!(f, "{a}[{i}]"),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Assign(l, e) => write!(f, "{l} := {e}"),
            Action::Guard(e) => write!(f, "[{e}]"),
            Action::DelayedGuard(e) => write!(f, "delayed[{e}]"),
            Action::SpecFence => f.write_str("fence"),
            Action::CacheFetch(l) => write!(f, "fetch({l})"),
            Action::CacheFlush => f.write_str("flush"),
            Action::Tau => f.write_str("tau"),
        }
    }
}

struct CmdPrec<'a>(&'a Command, u8);

impl fmt::Display for CmdPrec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let CmdPrec(c, min) = *self;
        // 0: choice, 1: sequence, 2: atom
        let (p, body) = match c {
            Command::Skip => (2, "skip".to_string()),
            Command::Prefix(a, k) => (1, seq_text(a, ";", k)),
            Command::Strict(a, k) => (1, seq_text(a, ";;", k)),
            Command::Seq(a, b) => (1, format!("{} ; {}", CmdPrec(a, 2), CmdPrec(b, 1))),
            Command::Choice(a, b) => (0, format!("{} |~| {}", CmdPrec(a, 1), CmdPrec(b, 0))),
            Command::If(e, a, b) => (2, format!("if {e} then {a} else {b} fi")),
            Command::While { cond, body, exit, .. } => {
                let w = format!("while {cond} do {body} od");
                if exit.is_skip() {
                    (2, w)
                } else {
                    (1, format!("{w} ; {}", CmdPrec(exit, 1)))
                }
            }
            Command::Speculate(k) => (2, format!("speculate({k})")),
            Command::Interrupt(a, b) => (2, format!("interrupt({a}, {b})")),
            Command::Buffer(s, k) => (2, format!("buffer({s}, {k})")),
            Command::Locals(r, k) => (2, format!("locals({r}, {k})")),
        };
        if p < min {
            write!(f, "({body})")
        } else {
            f.write_str(&body)
        }
    }
}

fn seq_text(a: &Action, sep: &str, k: &Command) -> String {
    if k.is_skip() {
        a.to_string()
    } else {
        format!("{a} {sep} {}", CmdPrec(k, 1))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", CmdPrec(self, 0))
    }
}
