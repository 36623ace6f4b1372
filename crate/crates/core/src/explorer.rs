//! Bounded exhaustive exploration: trace sets, reachability, refinement,
//! replay and seeded single runs.
//!
//! The state graph is built breadth first with configurations deduplicated
//! on their full structure (speculation contexts and buffers included).
//! Trace sets are then assembled bottom-up over the graph, recording only
//! visible labels.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::lang::{eval, Action, EvalError, Expr, Name, Valuation, Value};
use crate::machine::MemoryImage;
use crate::model::MemoryModel;
use crate::semantics::{step, terminated, Configuration, Label, Semantics, SpecLocals, SpecMode, Steps, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bounds {
    /// Longest path explored, counted in steps (silent ones included).
    pub max_depth: usize,
    pub loop_bound: u32,
    pub spec_depth: u32,
    /// Cap on distinct configurations.
    pub max_states: usize,
}

impl Default for Bounds {
    fn default() -> Bounds {
        Bounds {
            max_depth: 2000,
            loop_bound: 16,
            spec_depth: 2,
            max_states: 500_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Settings {
    pub model: MemoryModel,
    pub mode: SpecMode,
    pub spec_locals: SpecLocals,
    pub bounds: Bounds,
    /// Worker threads for frontier expansion; 1 runs on the calling thread.
    pub jobs: usize,
}

impl Settings {
    pub fn new(model: MemoryModel, mode: SpecMode) -> Settings {
        Settings {
            model,
            mode,
            spec_locals: SpecLocals::Copy,
            bounds: Bounds::default(),
            jobs: 1,
        }
    }

    pub fn semantics(&self) -> Semantics {
        Semantics {
            model: self.model,
            mode: self.mode,
            spec_locals: self.spec_locals,
            loop_bound: self.bounds.loop_bound,
            spec_depth: self.bounds.spec_depth,
        }
    }
}

/// Which bound cut exploration short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exhaustion {
    Depth,
    LoopBound,
    States,
    Cycle,
}

impl fmt::Display for Exhaustion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Exhaustion::Depth => "max-depth reached",
            Exhaustion::LoopBound => "loop-bound reached",
            Exhaustion::States => "max-states reached",
            Exhaustion::Cycle => "cyclic state graph",
        })
    }
}

/// A visible step of one process.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceLabel {
    pub proc: Name,
    pub action: Action,
}

impl fmt::Display for TraceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.proc, self.action.label())
    }
}

pub type Trace = Vec<TraceLabel>;

/// A terminating run: its visible trace and final configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Behaviour {
    pub trace: Trace,
    pub finals: Configuration,
}

#[derive(Debug, Clone)]
pub struct Exploration {
    pub behaviours: BTreeSet<Behaviour>,
    /// Set when some bound was hit; the behaviours are then a lower
    /// approximation.
    pub exhausted: Option<Exhaustion>,
    pub states: usize,
}

impl Exploration {
    pub fn traces(&self) -> BTreeSet<Trace> {
        self.behaviours.iter().map(|b| b.trace.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub trace: Trace,
    pub finals: Configuration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails(Witness),
    BoundExhausted(Exhaustion),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Fails(w) => Some(w),
            _ => None,
        }
    }
}

fn visible(sys: &System, label: &Label) -> Option<TraceLabel> {
    match label {
        Label::Visible { proc, action } => Some(TraceLabel {
            proc: sys.procs[*proc].name.clone(),
            action: action.clone(),
        }),
        Label::Silent => None,
    }
}

type Edge = (Option<u32>, usize);

struct Graph {
    nodes: Vec<Configuration>,
    edges: Vec<Vec<Edge>>,
    parent: Vec<Option<(usize, Option<u32>)>>,
    labels: Vec<TraceLabel>,
    exhausted: Option<Exhaustion>,
    /// Terminated node satisfying the stop predicate, if one was asked for.
    hit: Option<usize>,
}

type StopFn<'a> = &'a (dyn Fn(&Configuration) -> Result<bool, EvalError> + Sync);

fn flag(slot: &mut Option<Exhaustion>, e: Exhaustion) {
    if slot.is_none() {
        *slot = Some(e);
    }
}

fn build(sys: &System, settings: &Settings, stop: Option<StopFn<'_>>) -> Result<Graph, EvalError> {
    let sem = settings.semantics();
    let bounds = settings.bounds;
    let init = sys.initial();
    let mut g = Graph {
        nodes: vec![init.clone()],
        edges: vec![Vec::new()],
        parent: vec![None],
        labels: Vec::new(),
        exhausted: None,
        hit: None,
    };
    if let Some(stop) = stop {
        if terminated(&init) && stop(&init)? {
            g.hit = Some(0);
            return Ok(g);
        }
    }
    let mut index: HashMap<Configuration, usize> = HashMap::from([(init, 0)]);
    let mut label_ids: HashMap<TraceLabel, u32> = HashMap::new();
    let pool = (settings.jobs > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(settings.jobs).build())
        .transpose()
        .expect("thread pool");
    let mut frontier = vec![0usize];
    let mut depth = 0;
    while !frontier.is_empty() {
        if depth >= bounds.max_depth {
            if frontier.iter().any(|&n| !terminated(&g.nodes[n])) {
                flag(&mut g.exhausted, Exhaustion::Depth);
            }
            break;
        }
        let expand = |n: &usize| step(sys, &g.nodes[*n], &sem);
        let results: Vec<Result<Steps<(Label, Configuration)>, EvalError>> = match &pool {
            Some(pool) => pool.install(|| frontier.par_iter().map(expand).collect()),
            None => frontier.iter().map(expand).collect(),
        };
        let mut next = Vec::new();
        for (&n, res) in frontier.iter().zip(results) {
            let steps = res?;
            if steps.truncated {
                flag(&mut g.exhausted, Exhaustion::LoopBound);
            }
            for (label, cfg) in steps.items {
                let lab = visible(sys, &label).map(|l| {
                    let fresh = g.labels.len() as u32;
                    *label_ids.entry(l.clone()).or_insert_with(|| {
                        g.labels.push(l);
                        fresh
                    })
                });
                let m = match index.get(&cfg) {
                    Some(&m) => m,
                    None => {
                        if g.nodes.len() >= bounds.max_states {
                            flag(&mut g.exhausted, Exhaustion::States);
                            continue;
                        }
                        let m = g.nodes.len();
                        let done = terminated(&cfg);
                        let is_hit = match stop {
                            Some(stop) if done => stop(&cfg)?,
                            _ => false,
                        };
                        index.insert(cfg.clone(), m);
                        g.nodes.push(cfg);
                        g.edges.push(Vec::new());
                        g.parent.push(Some((n, lab)));
                        if is_hit {
                            g.edges[n].push((lab, m));
                            g.hit = Some(m);
                            return Ok(g);
                        }
                        if !done {
                            next.push(m);
                        }
                        m
                    }
                };
                g.edges[n].push((lab, m));
            }
        }
        frontier = next;
        depth += 1;
    }
    Ok(g)
}

type TraceSet = BTreeSet<(Vec<u32>, usize)>;

/// All terminating traces from the root, bottom-up over the graph.
fn trace_sets(g: &mut Graph) -> TraceSet {
    let n = g.nodes.len();
    let mut memo: Vec<Option<Arc<TraceSet>>> = vec![None; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    on_stack[0] = true;
    while let Some(&mut (v, ref mut i)) = stack.last_mut() {
        if *i < g.edges[v].len() {
            let (_, w) = g.edges[v][*i];
            *i += 1;
            if on_stack[w] {
                flag(&mut g.exhausted, Exhaustion::Cycle);
            } else if memo[w].is_none() {
                on_stack[w] = true;
                stack.push((w, 0));
            }
            continue;
        }
        stack.pop();
        on_stack[v] = false;
        let mut set = TraceSet::new();
        if terminated(&g.nodes[v]) {
            set.insert((Vec::new(), v));
        }
        for &(lab, w) in &g.edges[v] {
            let Some(sub) = &memo[w] else { continue };
            for (t, f) in sub.iter() {
                let t = match lab {
                    Some(l) => std::iter::once(l).chain(t.iter().copied()).collect(),
                    None => t.clone(),
                };
                set.insert((t, *f));
            }
        }
        memo[v] = Some(Arc::new(set));
    }
    Arc::try_unwrap(memo[0].take().expect("root visited")).unwrap_or_else(|a| (*a).clone())
}

/// All terminating behaviours of `sys` within the bounds.
pub fn explore(sys: &System, settings: &Settings) -> Result<Exploration, EvalError> {
    let mut g = build(sys, settings, None)?;
    let set = trace_sets(&mut g);
    let behaviours = set
        .into_iter()
        .map(|(t, f)| Behaviour {
            trace: t.iter().map(|&l| g.labels[l as usize].clone()).collect(),
            finals: g.nodes[f].clone(),
        })
        .collect();
    Ok(Exploration {
        behaviours,
        exhausted: g.exhausted,
        states: g.nodes.len(),
    })
}

/// Final-state valuation: `proc.reg` names registers, other names globals.
pub struct FinalView<'a> {
    pub sys: &'a System,
    pub cfg: &'a Configuration,
}

impl Valuation for FinalView<'_> {
    fn register(&self, name: &Name) -> Result<Value, EvalError> {
        let unbound = || EvalError::UnboundRegister(name.clone());
        let (p, r) = name.split_once('.').ok_or_else(unbound)?;
        let i = self.sys.process_index(p).ok_or_else(unbound)?;
        self.cfg.procs[i].regs.get(r).ok_or_else(unbound)
    }

    fn global(&self, name: &Name, index: Option<Value>) -> Result<Value, EvalError> {
        Ok(self.cfg.mem.read(self.sys.layout.address(name, index)?))
    }

    fn in_cache(&self, name: &Name, index: Option<Value>) -> Result<bool, EvalError> {
        Ok(self.cfg.mem.cache_query(self.sys.layout.address(name, index)?))
    }

    fn wrap(&self, v: Value) -> Value {
        self.sys.layout.width().wrap(v)
    }
}

/// Searches for a terminating run whose final state satisfies `pred`. The
/// witness is a shortest such run.
pub fn check_reach(sys: &System, pred: &Expr, settings: &Settings) -> Result<Verdict, EvalError> {
    let stop = |cfg: &Configuration| -> Result<bool, EvalError> { Ok(eval(pred, &FinalView { sys, cfg })? != 0) };
    let g = build(sys, settings, Some(&stop))?;
    if let Some(hit) = g.hit {
        let mut trace = Vec::new();
        let mut at = hit;
        while let Some((p, lab)) = g.parent[at] {
            if let Some(l) = lab {
                trace.push(g.labels[l as usize].clone());
            }
            at = p;
        }
        trace.reverse();
        return Ok(Verdict::Fails(Witness {
            trace,
            finals: g.nodes[hit].clone(),
        }));
    }
    Ok(match g.exhausted {
        Some(e) => Verdict::BoundExhausted(e),
        None => Verdict::Holds,
    })
}

/// Trace-set inclusion: every terminating trace of `concrete` is one of
/// `abstract_`. The witness is a shortest missing trace.
pub fn refines(abstract_: &System, concrete: &System, settings: &Settings) -> Result<Verdict, EvalError> {
    let a = explore(abstract_, settings)?;
    if let Some(e) = a.exhausted {
        return Ok(Verdict::BoundExhausted(e));
    }
    let c = explore(concrete, settings)?;
    if let Some(e) = c.exhausted {
        return Ok(Verdict::BoundExhausted(e));
    }
    let allowed = a.traces();
    let missing = c
        .behaviours
        .into_iter()
        .filter(|b| !allowed.contains(&b.trace))
        .min_by(|x, y| x.trace.len().cmp(&y.trace.len()).then_with(|| x.cmp(y)));
    Ok(match missing {
        Some(b) => Verdict::Fails(Witness {
            trace: b.trace,
            finals: b.finals,
        }),
        None => Verdict::Holds,
    })
}

/// Re-executes `trace` through the step relation, taking silent steps
/// freely. Returns a terminated configuration reached by exactly these
/// visible labels, if any.
pub fn replay(sys: &System, trace: &[TraceLabel], settings: &Settings) -> Result<Option<Configuration>, EvalError> {
    let sem = settings.semantics();
    let mut seen: HashSet<(Configuration, usize)> = HashSet::new();
    let mut queue = VecDeque::from([(sys.initial(), 0usize)]);
    while let Some((cfg, pos)) = queue.pop_front() {
        if pos == trace.len() && terminated(&cfg) {
            return Ok(Some(cfg));
        }
        if !seen.insert((cfg.clone(), pos)) || seen.len() > settings.bounds.max_states {
            continue;
        }
        for (label, next) in step(sys, &cfg, &sem)?.items {
            match visible(sys, &label) {
                None => queue.push_back((next, pos)),
                Some(l) if pos < trace.len() && l == trace[pos] => queue.push_back((next, pos + 1)),
                Some(_) => {}
            }
        }
    }
    Ok(None)
}

/// One terminating execution chosen by a seeded scheduler, backtracking
/// out of blocked branches.
#[derive(Debug, Clone)]
pub struct Run {
    pub trace: Trace,
    /// Every step including silent ones, for `--verbose` output.
    pub steps: Vec<Option<TraceLabel>>,
    pub finals: Configuration,
}

pub fn run(sys: &System, seed: u64, settings: &Settings) -> Result<Result<Run, Option<Exhaustion>>, EvalError> {
    let sem = settings.semantics();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Configuration> = HashSet::new();
    let mut exhausted = None;
    // Each frame: configuration, label that led to it, untried successors.
    struct Frame {
        cfg: Configuration,
        label: Option<Option<TraceLabel>>,
        todo: Vec<(Label, Configuration)>,
    }
    let init = sys.initial();
    seen.insert(init.clone());
    let mut stack = vec![Frame {
        todo: Vec::new(),
        label: None,
        cfg: init,
    }];
    let mut fresh = true;
    while !stack.is_empty() {
        if fresh {
            fresh = false;
            let depth = stack.len();
            let top = stack.last_mut().expect("non-empty");
            if terminated(&top.cfg) {
                let steps: Vec<Option<TraceLabel>> = stack.iter().filter_map(|f| f.label.clone()).collect();
                let trace = steps.iter().flatten().cloned().collect();
                let finals = stack.last().expect("non-empty").cfg.clone();
                return Ok(Ok(Run { trace, steps, finals }));
            }
            if depth > settings.bounds.max_depth {
                flag(&mut exhausted, Exhaustion::Depth);
                stack.pop();
                continue;
            }
            let s = step(sys, &top.cfg, &sem)?;
            if s.truncated {
                flag(&mut exhausted, Exhaustion::LoopBound);
            }
            let mut items = s.items;
            items.shuffle(&mut rng);
            top.todo = items;
        }
        let top = stack.last_mut().expect("non-empty");
        match top.todo.pop() {
            Some((label, cfg)) => {
                if seen.len() >= settings.bounds.max_states {
                    flag(&mut exhausted, Exhaustion::States);
                    continue;
                }
                if seen.insert(cfg.clone()) {
                    stack.push(Frame {
                        label: Some(visible(sys, &label)),
                        cfg,
                        todo: Vec::new(),
                    });
                    fresh = true;
                }
            }
            None => {
                stack.pop();
            }
        }
    }
    Ok(Err(exhausted))
}

/// Final globals by canonical cell name and registers as `proc.reg`.
pub fn final_values(sys: &System, cfg: &Configuration) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    for (a, v) in cfg.mem.cells().iter().enumerate() {
        out.insert(sys.layout.describe(a), *v);
    }
    for (p, st) in sys.procs.iter().zip(&cfg.procs) {
        for (r, v) in st.regs.iter() {
            out.insert(crate::syntax::qualified(&p.name, r), *v);
        }
    }
    out
}

/// Cached cells by canonical name, in address order.
pub fn cache_names(sys: &System, mem: &MemoryImage) -> Vec<String> {
    mem.cache().iter().map(|a| sys.layout.describe(*a)).collect()
}
