//! Concrete program syntax: lexer, parser and printer.
//!
//! ```text
//! globals { x = 0  A[4] = [1, 2, 3, 4]  alias k = A[4] }
//! process P1 {
//!   locals { r1 = 0 }
//!   code { r1 := x ; if r1 < 4 then y := r1 else skip fi }
//! }
//! ```
//!
//! `;` is the reorderable prefix, `;;` the ordering-enforced one and `|~|`
//! nondeterministic choice (loosest). After a compound command both
//! separators mean plain sequencing.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::lang::{append, Action, BinOp, Cmd, Command, Expr, Loc, Name, Value};
use crate::machine::{Decl, Layout, Registers, Width};
use crate::semantics::{ProcessDecl, System};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(Value),
    Ident(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

// Longest first.
const SYMBOLS: &[&str] = &[
    "|~|", ":=", ";;", "<=", "!=", "&&", ";", "[", "]", "(", ")", "{", "}", ",", "=", "<", "+", "-", "!",
];

const KEYWORDS: &[&str] = &[
    "globals", "process", "locals", "code", "alias", "skip", "if", "then", "else", "fi", "while", "do", "od", "fence",
    "flush", "fetch", "in_cache",
];

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let err = |line, col, msg: String| ParseError { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_digit() {
            let s: String = chars[i..].iter().take_while(|c| c.is_ascii_digit()).collect();
            let v = s
                .parse::<Value>()
                .map_err(|_| err(line, col, format!("integer literal `{s}` is too large")))?;
            i += s.len();
            col += s.len();
            out.push(Spanned {
                tok: Tok::Int(v),
                line,
                col: start_col,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let s: String = chars[i..]
                .iter()
                .take_while(|c| c.is_alphanumeric() || **c == '_' || **c == '.')
                .collect();
            i += s.chars().count();
            col += s.chars().count();
            out.push(Spanned {
                tok: Tok::Ident(s),
                line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
            return Err(err(line, col, format!("unexpected character `{c}`")));
        };
        i += sym.len();
        col += sym.len();
        out.push(Spanned {
            tok: Tok::Sym(sym),
            line,
            col: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

/// How names in expressions resolve.
enum Scope {
    Process {
        layout: Arc<Layout>,
        regs: Registers,
    },
    /// Final-state predicates: `proc.reg` names registers, others globals.
    Predicate {
        layout: Arc<Layout>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ExprUse {
    Guard,
    /// Right-hand side of a register assignment.
    Load,
    /// Stored value or array index: registers and literals only.
    Pure,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    scope: Option<Scope>,
}

impl Parser {
    fn new(src: &str) -> Result<Parser, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            scope: None,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, pos: usize, msg: impl Into<String>) -> ParseError {
        let s = &self.toks[pos];
        ParseError {
            line: s.line,
            col: s.col,
            msg: msg.into(),
        }
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        self.error_at(self.pos, msg)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.bump();
        }
        hit
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        let hit = self.is_kw(k);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`, found {}", self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{k}`, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => Err(self.error(format!("expected a name, found {t}"))),
        }
    }

    fn int(&mut self) -> Result<Value, ParseError> {
        let neg = self.eat_sym("-");
        match self.bump() {
            Tok::Int(v) => Ok(if neg { -v } else { v }),
            t => Err(self.error_at(self.pos.saturating_sub(1), format!("expected an integer, found {t}"))),
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            t => Err(self.error(format!("unexpected {t}"))),
        }
    }

    // -- declarations ------------------------------------------------------

    fn globals(&mut self) -> Result<Vec<Decl>, ParseError> {
        let mut decls = Vec::new();
        if !self.eat_kw("globals") {
            return Ok(decls);
        }
        self.expect_sym("{")?;
        while !self.eat_sym("}") {
            if self.eat_kw("alias") {
                let name = self.ident()?;
                self.expect_sym("=")?;
                let array = self.ident()?;
                self.expect_sym("[")?;
                let index = self.int()?;
                self.expect_sym("]")?;
                decls.push(Decl::Alias {
                    name: name.into(),
                    array: array.into(),
                    index,
                });
            } else {
                let at = self.pos;
                let name = self.ident()?;
                if self.eat_sym("[") {
                    let len = self.int()?;
                    if len <= 0 {
                        return Err(self.error_at(at, format!("array `{name}` must have a positive length")));
                    }
                    self.expect_sym("]")?;
                    let mut init = Vec::new();
                    if self.eat_sym("=") {
                        self.expect_sym("[")?;
                        while !self.eat_sym("]") {
                            init.push(self.int()?);
                            if !self.is_sym("]") {
                                self.expect_sym(",")?;
                            }
                        }
                    }
                    decls.push(Decl::Array {
                        name: name.into(),
                        len: len as usize,
                        init,
                    });
                } else {
                    self.expect_sym("=")?;
                    let init = self.int()?;
                    decls.push(Decl::Scalar {
                        name: name.into(),
                        init,
                    });
                }
            }
            while self.eat_sym(",") || self.eat_sym(";") {}
        }
        Ok(decls)
    }

    fn locals(&mut self, layout: &Layout) -> Result<Registers, ParseError> {
        let mut regs = Registers::new();
        if !self.eat_kw("locals") {
            return Ok(regs);
        }
        self.expect_sym("{")?;
        while !self.eat_sym("}") {
            let at = self.pos;
            let name = self.ident()?;
            if regs.contains(&name) {
                return Err(self.error_at(at, format!("duplicate register `{name}`")));
            }
            if layout.is_global(&name) {
                return Err(self.error_at(at, format!("register `{name}` shadows a global")));
            }
            let v = if self.eat_sym("=") { self.int()? } else { 0 };
            regs.set(name.into(), layout.width().wrap(v));
            while self.eat_sym(",") || self.eat_sym(";") {}
        }
        Ok(regs)
    }

    fn system(&mut self) -> Result<System, ParseError> {
        let decls_at = self.pos;
        let decls = self.globals()?;
        let (layout, init_mem) =
            Layout::build(decls, Width::default()).map_err(|e| self.error_at(decls_at, e.to_string()))?;
        let layout = Arc::new(layout);
        let mut procs: Vec<ProcessDecl> = Vec::new();
        while !matches!(self.peek(), Tok::Eof) {
            self.expect_kw("process")?;
            let at = self.pos;
            let name = self.ident()?;
            if procs.iter().any(|p| *p.name == *name) {
                return Err(self.error_at(at, format!("duplicate process `{name}`")));
            }
            self.expect_sym("{")?;
            let regs = self.locals(&layout)?;
            self.expect_kw("code")?;
            self.expect_sym("{")?;
            self.scope = Some(Scope::Process {
                layout: layout.clone(),
                regs: regs.clone(),
            });
            let code = self.cmd()?;
            self.expect_sym("}")?;
            self.expect_sym("}")?;
            procs.push(ProcessDecl {
                name: name.into(),
                regs,
                code,
            });
        }
        if procs.is_empty() {
            return Err(self.error("a program needs at least one process"));
        }
        Ok(System {
            layout,
            procs,
            init_mem,
        })
    }

    // -- commands ----------------------------------------------------------

    fn cmd(&mut self) -> Result<Cmd, ParseError> {
        let left = self.seq()?;
        if self.eat_sym("|~|") {
            let right = self.cmd()?;
            return Ok(Command::choice(left, right));
        }
        Ok(left)
    }

    fn seq(&mut self) -> Result<Cmd, ParseError> {
        let head = self.unit()?;
        let strict = if self.eat_sym(";;") {
            true
        } else if self.eat_sym(";") {
            false
        } else {
            return Ok(match head {
                Unit::Action(a) => Command::prefix(a, Command::skip()),
                Unit::Cmd(c) => c,
            });
        };
        let tail = self.seq()?;
        Ok(match head {
            Unit::Action(a) if strict => Command::strict(a, tail),
            Unit::Action(a) => Command::prefix(a, tail),
            Unit::Cmd(c) => append(&c, &tail),
        })
    }

    fn unit(&mut self) -> Result<Unit, ParseError> {
        if self.eat_kw("skip") {
            return Ok(Unit::Cmd(Command::skip()));
        }
        if self.eat_kw("if") {
            let b = self.expr(ExprUse::Guard)?;
            self.expect_kw("then")?;
            let c1 = self.cmd()?;
            let c2 = if self.eat_kw("else") {
                self.cmd()?
            } else {
                Command::skip()
            };
            self.expect_kw("fi")?;
            return Ok(Unit::Cmd(Command::if_(b, c1, c2)));
        }
        if self.eat_kw("while") {
            let b = self.expr(ExprUse::Guard)?;
            self.expect_kw("do")?;
            let body = self.cmd()?;
            self.expect_kw("od")?;
            return Ok(Unit::Cmd(Command::while_(b, body)));
        }
        if self.eat_sym("(") {
            let c = self.cmd()?;
            self.expect_sym(")")?;
            return Ok(Unit::Cmd(c));
        }
        Ok(Unit::Action(self.action()?))
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        if self.eat_kw("fence") {
            return Ok(Action::SpecFence);
        }
        if self.eat_kw("flush") {
            return Ok(Action::CacheFlush);
        }
        if self.eat_kw("fetch") {
            self.expect_sym("(")?;
            let at = self.pos;
            let l = self.loc()?;
            if l.is_register() {
                return Err(self.error_at(at, format!("cannot fetch register `{l}`")));
            }
            self.expect_sym(")")?;
            return Ok(Action::CacheFetch(l));
        }
        if self.eat_sym("[") {
            let e = self.expr(ExprUse::Guard)?;
            self.expect_sym("]")?;
            return Ok(Action::Guard(e));
        }
        if !matches!(self.peek(), Tok::Ident(_)) {
            return Err(self.error(format!("expected a command, found {}", self.peek())));
        }
        let l = self.loc()?;
        self.expect_sym(":=")?;
        let use_ = if l.is_register() { ExprUse::Load } else { ExprUse::Pure };
        let e = self.expr(use_)?;
        Ok(Action::Assign(l, e))
    }

    fn loc(&mut self) -> Result<Loc, ParseError> {
        let at = self.pos;
        let name = self.ident()?;
        let index = if self.eat_sym("[") {
            let i = self.expr(ExprUse::Pure)?;
            self.expect_sym("]")?;
            Some(i)
        } else {
            None
        };
        match (self.classify(&name, at)?, index) {
            (NameKind::Reg, None) => Ok(Loc::Reg(name.into())),
            (NameKind::Scalar, None) => Ok(Loc::Var(name.into())),
            (NameKind::Array, Some(i)) => Ok(Loc::Elem(name.into(), Box::new(i))),
            (NameKind::Array, None) => Err(self.error_at(at, format!("array `{name}` needs an index"))),
            (_, Some(_)) => Err(self.error_at(at, format!("`{name}` is not an array"))),
        }
    }

    fn classify(&self, name: &str, at: usize) -> Result<NameKind, ParseError> {
        let (layout, is_reg) = match self.scope.as_ref().expect("scope set while parsing code") {
            Scope::Process { layout, regs } => (layout, regs.contains(name)),
            Scope::Predicate { layout } => (layout, name.contains('.')),
        };
        if is_reg {
            Ok(NameKind::Reg)
        } else if layout.is_array(name) {
            Ok(NameKind::Array)
        } else if layout.is_global(name) {
            Ok(NameKind::Scalar)
        } else {
            Err(self.error_at(at, format!("use of undeclared name `{name}`")))
        }
    }

    // -- expressions -------------------------------------------------------

    fn expr(&mut self, use_: ExprUse) -> Result<Expr, ParseError> {
        let at = self.pos;
        let e = self.conj(use_)?;
        if use_ == ExprUse::Pure && !e.global_reads().is_empty() {
            return Err(self.error_at(at, "stored values and indices may not read shared memory"));
        }
        Ok(e)
    }

    fn conj(&mut self, use_: ExprUse) -> Result<Expr, ParseError> {
        let mut l = self.cmp(use_)?;
        while self.eat_sym("&&") {
            let r = self.cmp(use_)?;
            l = Expr::bin(BinOp::And, l, r);
        }
        Ok(l)
    }

    fn cmp(&mut self, use_: ExprUse) -> Result<Expr, ParseError> {
        let mut l = self.sum(use_)?;
        loop {
            let op = match self.peek() {
                Tok::Sym("<") => BinOp::Lt,
                Tok::Sym("<=") => BinOp::Le,
                Tok::Sym("=") => BinOp::Eq,
                Tok::Sym("!=") => BinOp::Ne,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.sum(use_)?;
            l = Expr::bin(op, l, r);
        }
    }

    fn sum(&mut self, use_: ExprUse) -> Result<Expr, ParseError> {
        let mut l = self.unary(use_)?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.unary(use_)?;
            l = Expr::bin(op, l, r);
        }
    }

    fn unary(&mut self, use_: ExprUse) -> Result<Expr, ParseError> {
        if self.eat_sym("!") {
            return Ok(Expr::not(self.unary(use_)?));
        }
        if self.is_sym("-") && matches!(self.peek2(), Tok::Int(_)) {
            return Ok(Expr::Int(self.int()?));
        }
        self.atom(use_)
    }

    fn atom(&mut self, use_: ExprUse) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.conj(use_)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(k) if k == "in_cache" => {
                if use_ != ExprUse::Guard {
                    return Err(self.error("in_cache may only appear in guards and conditions"));
                }
                self.bump();
                self.expect_sym("(")?;
                let at = self.pos;
                let l = self.loc()?;
                if l.is_register() {
                    return Err(self.error_at(at, format!("register `{l}` has no cache line")));
                }
                self.expect_sym(")")?;
                Ok(Expr::InCache(l))
            }
            Tok::Ident(_) => Ok(self.loc()?.as_expr()),
            t => Err(self.error(format!("expected an expression, found {t}"))),
        }
    }
}

enum Unit {
    Action(Action),
    Cmd(Cmd),
}

enum NameKind {
    Reg,
    Scalar,
    Array,
}

/// Parses a program file.
pub fn parse(src: &str) -> Result<System, ParseError> {
    let mut p = Parser::new(src)?;
    let sys = p.system()?;
    p.expect_eof()?;
    Ok(sys)
}

/// Parses a final-state predicate over `sys`: plain names are globals,
/// `proc.reg` names a process register.
pub fn parse_predicate(sys: &System, src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    p.scope = Some(Scope::Predicate {
        layout: sys.layout.clone(),
    });
    let e = p.conj(ExprUse::Guard)?;
    p.expect_eof()?;
    for r in e.registers() {
        let (proc, reg) = r.split_once('.').unwrap_or((&r, ""));
        match sys.procs.iter().find(|p| &*p.name == proc) {
            Some(p) if p.regs.contains(reg) => {}
            Some(_) => return Err(p.error_at(0, format!("process `{proc}` has no register `{reg}`"))),
            None => return Err(p.error_at(0, format!("unknown process `{proc}`"))),
        }
    }
    Ok(e)
}

/// Parses a single command in the scope of `proc` of `sys`.
pub fn parse_command(sys: &System, proc: usize, src: &str) -> Result<Cmd, ParseError> {
    let mut p = Parser::new(src)?;
    p.scope = Some(Scope::Process {
        layout: sys.layout.clone(),
        regs: sys.procs[proc].regs.clone(),
    });
    let c = p.cmd()?;
    p.expect_eof()?;
    Ok(c)
}

/// Renders a system in the syntax accepted by [`parse`].
pub fn print(sys: &System) -> String {
    let mut out = String::new();
    let decls = sys.layout.decls();
    if !decls.is_empty() {
        out.push_str("globals {\n");
        for d in decls {
            match d {
                Decl::Scalar { name, init } => writeln!(out, "  {name} = {init}"),
                Decl::Array { name, len, init } if init.is_empty() => writeln!(out, "  {name}[{len}]"),
                Decl::Array { name, len, init } => {
                    let vals: Vec<String> = init.iter().map(|v| v.to_string()).collect();
                    writeln!(out, "  {name}[{len}] = [{}]", vals.join(", "))
                }
                Decl::Alias { name, array, index } => writeln!(out, "  alias {name} = {array}[{index}]"),
            }
            .expect("writing to a string");
        }
        out.push_str("}\n");
    }
    for p in &sys.procs {
        writeln!(out, "\nprocess {} {{", p.name).expect("writing to a string");
        if !p.regs.is_empty() {
            let regs: Vec<String> = p.regs.iter().map(|(r, v)| format!("{r} = {v}")).collect();
            writeln!(out, "  locals {{ {} }}", regs.join(", ")).expect("writing to a string");
        }
        writeln!(out, "  code {{ {} }}\n}}", p.code).expect("writing to a string");
    }
    out
}

/// Qualified register name used in predicates and final-state reports.
pub fn qualified(proc: &Name, reg: &Name) -> String {
    format!("{proc}.{reg}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "
        globals { x = 0, y = 1  A[2] = [5, 6, 7]  alias k = A[2] }
        process P1 {
          locals { r1 = 0 r2 = 3 }
          code { x := 1 ; r1 := y ;; [r1 = 1] ; A[r2 - 3] := r1 }
        }
        process P2 {
          code { if in_cache(A[0]) then fetch(k) else flush fi ; fence |~| skip }
        }";

    #[test]
    fn parses_prefix_chains() {
        let sys = parse(SRC).unwrap();
        let Command::Prefix(a, rest) = &*sys.procs[0].code else {
            panic!()
        };
        assert_eq!(a.to_string(), "x := 1");
        let Command::Strict(b, rest) = &**rest else { panic!() };
        assert_eq!(*b, Action::Assign(Loc::Reg("r1".into()), Expr::var("y")));
        let Command::Prefix(g, _) = &**rest else { panic!() };
        assert_eq!(g.to_string(), "[r1 = 1]");
    }

    #[test]
    fn choice_binds_loosest() {
        let sys = parse(SRC).unwrap();
        assert!(matches!(&*sys.procs[1].code, Command::Choice(..)));
    }

    #[test]
    fn compound_head_absorbs_continuation() {
        let sys = parse(SRC).unwrap();
        let Command::Choice(first, _) = &*sys.procs[1].code else {
            panic!()
        };
        let Command::If(_, t, e) = &**first else { panic!() };
        assert_eq!(t.to_string(), "fetch(k) ; fence");
        assert_eq!(e.to_string(), "flush ; fence");
    }

    #[test]
    fn round_trip() {
        let sys = parse(SRC).unwrap();
        let again = parse(&print(&sys)).unwrap();
        assert_eq!(sys, again);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("process P {\n  code { x := 1 }\n}").unwrap_err();
        assert_eq!((e.line, e.col), (2, 10));
        assert!(e.msg.contains("undeclared"), "{e}");
        let e = parse("globals { x = 0 x = 1 } process P { code { skip } }").unwrap_err();
        assert!(e.msg.contains("duplicate"), "{e}");
        let e = parse("globals { x = 0 } process P { code { x := 1 ;; } }").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn stores_may_not_read_globals() {
        let e = parse("globals { x = 0 y = 0 } process P { code { x := y } }").unwrap_err();
        assert!(e.msg.contains("shared memory"), "{e}");
    }

    #[test]
    fn in_cache_only_in_conditions() {
        assert!(parse("globals { x = 0 } process P { locals { r = 0 } code { r := in_cache(x) } }").is_err());
        assert!(parse("globals { x = 0 } process P { code { [in_cache(x)] } }").is_ok());
    }

    #[test]
    fn predicates_name_process_registers() {
        let sys = parse(SRC).unwrap();
        let e = parse_predicate(&sys, "P1.r1 = 0 && x = 1").unwrap();
        assert_eq!(e.to_string(), "P1.r1 = 0 && x = 1");
        assert!(parse_predicate(&sys, "P1.q = 0").is_err());
        assert!(parse_predicate(&sys, "Q.r1 = 0").is_err());
    }

    #[test]
    fn negative_literals_and_precedence() {
        let sys =
            parse("globals { x = -2 } process P { locals { r = 0 } code { r := x - -1 + 2 ; [!(r < 0) && r != 1] } }")
                .unwrap();
        let again = parse(&print(&sys)).unwrap();
        assert_eq!(sys, again);
        assert_eq!(sys.init_mem.read(0), -2);
    }
}
