//! Independent reference models and program generators for the
//! integration tests. Nothing here reuses the engine's semantics.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use specsim::explorer::{explore, final_values, Settings};
use specsim::semantics::System;

pub type Outcome = BTreeMap<String, i64>;
pub type Behaviours = BTreeSet<(Vec<String>, Outcome)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OVal {
    Const(i64),
    Reg(&'static str),
    RegPlus(&'static str, i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OInstr {
    Store(&'static str, OVal),
    Load(&'static str, &'static str),
    Local(&'static str, OVal),
    /// Blocks unless `reg < bound`.
    Guard(&'static str, i64),
}

#[derive(Debug, Clone)]
pub struct OProc {
    pub name: String,
    pub regs: Vec<&'static str>,
    pub code: Vec<OInstr>,
    /// Separator after each instruction: `;` or `;;`.
    pub seps: Vec<&'static str>,
}

#[derive(Debug, Clone)]
pub struct OProg {
    pub globals: Vec<(&'static str, i64)>,
    pub procs: Vec<OProc>,
}

fn val_text(v: OVal) -> String {
    match v {
        OVal::Const(k) => k.to_string(),
        OVal::Reg(r) => r.to_string(),
        OVal::RegPlus(r, k) => format!("{r} + {k}"),
    }
}

impl OProg {
    pub fn render(&self) -> String {
        let mut s = String::from("globals {");
        for (g, v) in &self.globals {
            s.push_str(&format!(" {g} = {v}"));
        }
        s.push_str(" }\n");
        for p in &self.procs {
            let regs: Vec<String> = p.regs.iter().map(|r| format!("{r} = 0")).collect();
            let mut code = String::new();
            for (i, ins) in p.code.iter().enumerate() {
                if i > 0 {
                    code.push_str(&format!(" {} ", p.seps[i - 1]));
                }
                code.push_str(&match ins {
                    OInstr::Store(x, v) => format!("{x} := {}", val_text(*v)),
                    OInstr::Load(r, x) => format!("{r} := {x}"),
                    OInstr::Local(r, v) => format!("{r} := {}", val_text(*v)),
                    OInstr::Guard(r, k) => format!("[{r} < {k}]"),
                });
            }
            if code.is_empty() {
                code.push_str("skip");
            }
            s.push_str(&format!(
                "process {} {{ locals {{ {} }} code {{ {} }} }}\n",
                p.name,
                regs.join(", "),
                code
            ));
        }
        s
    }
}

#[derive(Clone)]
struct OState {
    pcs: Vec<usize>,
    mem: BTreeMap<&'static str, i64>,
    regs: Vec<BTreeMap<&'static str, i64>>,
}

impl OState {
    fn init(p: &OProg) -> OState {
        OState {
            pcs: vec![0; p.procs.len()],
            mem: p.globals.iter().cloned().collect(),
            regs: p
                .procs
                .iter()
                .map(|q| q.regs.iter().map(|r| (*r, 0)).collect())
                .collect(),
        }
    }

    fn val(&self, i: usize, v: OVal) -> i64 {
        match v {
            OVal::Const(k) => k,
            OVal::Reg(r) => self.regs[i][r],
            OVal::RegPlus(r, k) => self.regs[i][r] + k,
        }
    }

    fn outcome(&self, p: &OProg) -> Outcome {
        let mut out: Outcome = self.mem.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (q, regs) in p.procs.iter().zip(&self.regs) {
            for (r, v) in regs {
                out.insert(format!("{}.{r}", q.name), *v);
            }
        }
        out
    }
}

/// Every interleaving of the processes' instruction lists, in program
/// order, with labels rendered the way the engine prints them.
pub fn sc_oracle(p: &OProg) -> Behaviours {
    let mut out = Behaviours::new();
    let mut trace = Vec::new();
    sc_walk(p, OState::init(p), &mut trace, &mut out);
    out
}

fn sc_walk(p: &OProg, st: OState, trace: &mut Vec<String>, out: &mut Behaviours) {
    if st.pcs.iter().zip(&p.procs).all(|(pc, q)| *pc == q.code.len()) {
        out.insert((trace.clone(), st.outcome(p)));
        return;
    }
    for i in 0..p.procs.len() {
        let q = &p.procs[i];
        let Some(ins) = q.code.get(st.pcs[i]) else { continue };
        let mut next = st.clone();
        next.pcs[i] += 1;
        let label = match ins {
            OInstr::Store(x, v) => {
                let v = st.val(i, *v);
                next.mem.insert(x, v);
                Some(format!("{}: {x} := {v}", q.name))
            }
            OInstr::Load(r, x) => {
                let v = st.mem[x];
                next.regs[i].insert(r, v);
                Some(format!("{}: [{x} = {v}]", q.name))
            }
            OInstr::Local(r, v) => {
                let v = st.val(i, *v);
                next.regs[i].insert(r, v);
                None
            }
            OInstr::Guard(r, k) => {
                let v = st.regs[i][r];
                if v >= *k {
                    continue;
                }
                Some(format!("{}: [{v} < {k}]", q.name))
            }
        };
        if let Some(l) = &label {
            trace.push(l.clone());
        }
        sc_walk(p, next, trace, out);
        if label.is_some() {
            trace.pop();
        }
    }
}

/// Final outcomes under a FIFO store-buffer machine: stores enter the
/// issuing process's buffer and drain to memory in order at any time; loads
/// read the newest buffered value for the location, else memory.
pub fn tso_oracle(p: &OProg) -> BTreeSet<Outcome> {
    #[derive(Clone)]
    struct T {
        st: OState,
        bufs: Vec<VecDeque<(&'static str, i64)>>,
    }
    let mut out = BTreeSet::new();
    let mut stack = vec![T {
        st: OState::init(p),
        bufs: vec![VecDeque::new(); p.procs.len()],
    }];
    while let Some(t) = stack.pop() {
        let done = t.st.pcs.iter().zip(&p.procs).all(|(pc, q)| *pc == q.code.len());
        if done && t.bufs.iter().all(VecDeque::is_empty) {
            out.insert(t.st.outcome(p));
            continue;
        }
        for i in 0..p.procs.len() {
            if let Some(&(x, v)) = t.bufs[i].front() {
                let mut n = t.clone();
                n.bufs[i].pop_front();
                n.st.mem.insert(x, v);
                stack.push(n);
            }
            let Some(ins) = p.procs[i].code.get(t.st.pcs[i]) else {
                continue;
            };
            let mut n = t.clone();
            n.st.pcs[i] += 1;
            match ins {
                OInstr::Store(x, v) => {
                    let v = t.st.val(i, *v);
                    n.bufs[i].push_back((x, v));
                }
                OInstr::Load(r, x) => {
                    let v = t.bufs[i]
                        .iter()
                        .rev()
                        .find(|(y, _)| y == x)
                        .map(|(_, v)| *v)
                        .unwrap_or(t.st.mem[x]);
                    n.st.regs[i].insert(r, v);
                }
                OInstr::Local(r, v) => {
                    let v = t.st.val(i, *v);
                    n.st.regs[i].insert(r, v);
                }
                OInstr::Guard(r, k) => {
                    if t.st.regs[i][r] >= *k {
                        continue;
                    }
                }
            }
            stack.push(n);
        }
    }
    out
}

const GLOBALS: [&str; 3] = ["x", "y", "z"];
const REGS: [&str; 2] = ["r1", "r2"];

/// Straight-line programs with at most `max_actions` instructions over at
/// most `max_procs` processes.
pub fn random_oprog(rng: &mut ChaCha8Rng, max_actions: usize, max_procs: usize, guards: bool) -> OProg {
    let nprocs = rng.gen_range(1..=max_procs);
    let total = rng.gen_range(1..=max_actions);
    let mut counts = vec![0; nprocs];
    for _ in 0..total {
        counts[rng.gen_range(0..nprocs)] += 1;
    }
    let procs = counts
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let code: Vec<OInstr> = (0..n)
                .map(|_| {
                    let g = GLOBALS[rng.gen_range(0..GLOBALS.len())];
                    let r = REGS[rng.gen_range(0..REGS.len())];
                    let s = REGS[rng.gen_range(0..REGS.len())];
                    match rng.gen_range(0..if guards { 7 } else { 6 }) {
                        0 | 1 => OInstr::Store(g, OVal::Const(rng.gen_range(0..3))),
                        2 => OInstr::Store(g, OVal::Reg(r)),
                        3 | 4 => OInstr::Load(r, g),
                        5 => OInstr::Local(r, OVal::RegPlus(s, rng.gen_range(0..3))),
                        _ => OInstr::Guard(r, rng.gen_range(1..3)),
                    }
                })
                .collect();
            let seps = (0..n).map(|_| if rng.gen_bool(0.3) { ";;" } else { ";" }).collect();
            OProc {
                name: format!("P{}", i + 1),
                regs: REGS.to_vec(),
                code,
                seps,
            }
        })
        .collect();
    OProg {
        globals: vec![("x", 0), ("y", 0), ("z", rng.gen_range(0..3))],
        procs,
    }
}

/// Programs for the speculation transparency check: at most 8 actions, at
/// most one conditional, at most two processes; no cache instructions.
pub fn random_spec_program(rng: &mut ChaCha8Rng) -> String {
    let nprocs = rng.gen_range(1..=2);
    let total = rng.gen_range(1..=8);
    let cond_proc = rng.gen_range(0..nprocs);
    let mut counts = vec![0usize; nprocs];
    for _ in 0..total {
        counts[rng.gen_range(0..nprocs)] += 1;
    }
    let mut s = format!(
        "globals {{ x = 0 y = {} z = {} A[2] = [{}, {}] }}\n",
        rng.gen_range(0..2),
        rng.gen_range(0..3),
        rng.gen_range(0..2),
        rng.gen_range(0..3)
    );
    for (i, n) in counts.into_iter().enumerate() {
        let mut actions: Vec<String> = (0..n).map(|_| spec_action(rng)).collect();
        let code = if i == cond_proc && rng.gen_bool(0.85) {
            // Split the actions into prefix / then / else / suffix.
            let cut = |rng: &mut ChaCha8Rng, v: &mut Vec<String>| {
                let k = rng.gen_range(0..=v.len());
                v.drain(..k).collect::<Vec<_>>()
            };
            let pre = cut(rng, &mut actions);
            let then = cut(rng, &mut actions);
            let els = cut(rng, &mut actions);
            let post = actions;
            let cond = match rng.gen_range(0..3) {
                0 => format!("r1 < {}", rng.gen_range(0..2)),
                1 => format!("x = {}", rng.gen_range(0..2)),
                _ => format!("y != {}", rng.gen_range(0..2)),
            };
            let mut parts = Vec::new();
            parts.extend(pre);
            parts.push(format!("if {cond} then {} else {} fi", seq(&then), seq(&els)));
            parts.extend(post);
            join(rng, &parts)
        } else if actions.is_empty() {
            "skip".to_string()
        } else {
            join(rng, &actions)
        };
        s.push_str(&format!(
            "process P{} {{ locals {{ r1 = 0, r2 = 0 }} code {{ {code} }} }}\n",
            i + 1
        ));
    }
    s
}

fn seq(v: &[String]) -> String {
    if v.is_empty() {
        "skip".to_string()
    } else {
        v.join(" ; ")
    }
}

fn join(rng: &mut ChaCha8Rng, parts: &[String]) -> String {
    let mut s = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            s.push_str(if rng.gen_bool(0.2) { " ;; " } else { " ; " });
        }
        s.push_str(p);
    }
    s
}

fn spec_action(rng: &mut ChaCha8Rng) -> String {
    let g = ["x", "y", "z"][rng.gen_range(0..3)];
    let r = ["r1", "r2"][rng.gen_range(0..2)];
    match rng.gen_range(0..9) {
        0 | 1 => format!("{g} := {}", rng.gen_range(0..3)),
        2 => format!("{g} := {r}"),
        3 | 4 => format!("{r} := {g}"),
        5 => format!("{r} := A[{}]", rng.gen_range(0..2)),
        6 => format!("{r} := {g} + 1"),
        7 => format!("[{r} < {}]", rng.gen_range(1..3)),
        _ => "fence".to_string(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Engine behaviours as (rendered labels, final values).
pub fn engine_behaviours(sys: &System, settings: &Settings) -> Behaviours {
    let ex = explore(sys, settings).expect("exploration succeeds");
    assert!(ex.exhausted.is_none(), "bounds hit: {:?}", ex.exhausted);
    ex.behaviours
        .iter()
        .map(|b| {
            (
                b.trace.iter().map(|l| l.to_string()).collect(),
                final_values(sys, &b.finals),
            )
        })
        .collect()
}

/// Same as [`engine_behaviours`] with cache-fetch labels removed.
pub fn without_fetches(b: &Behaviours) -> Behaviours {
    b.iter()
        .map(|(t, f)| {
            (
                t.iter().filter(|l| !l.contains(": fetch ")).cloned().collect(),
                f.clone(),
            )
        })
        .collect()
}
