//! Architecture-parametric reordering relation and forwarding.
//!
//! A model only decides the ordering of basic instruction pairs; the cache,
//! fence and silent-step constraints are shared by every model.

use std::fmt;
use std::str::FromStr;

use crate::lang::{Action, Expr, Loc};

/// Models are identified by name.
#[derive(Clone, Copy)]
pub struct MemoryModel {
    name: &'static str,
    basic: fn(&Action, &Action) -> bool,
}

impl MemoryModel {
    /// Sequential consistency: no basic pair reorders.
    pub fn sc() -> MemoryModel {
        MemoryModel {
            name: "sc",
            basic: |_, _| false,
        }
    }

    /// TSO: a register assignment (load) may overtake an earlier store it
    /// does not depend on.
    pub fn tso() -> MemoryModel {
        MemoryModel {
            name: "tso",
            basic: tso_basic,
        }
    }

    /// A model with a custom basic-pair relation.
    pub fn custom(name: &'static str, basic: fn(&Action, &Action) -> bool) -> MemoryModel {
        MemoryModel { name, basic }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// True iff `later` may execute before `earlier`.
    pub fn reorderable(&self, earlier: &Action, later: &Action) -> bool {
        use Action::*;
        if matches!(earlier, Tau) || matches!(later, Tau) {
            return true;
        }
        if matches!(earlier, CacheFlush) || matches!(later, CacheFlush) {
            return false;
        }
        if earlier.mentions_cache() || later.mentions_cache() {
            return false;
        }
        if let CacheFetch(x) = later {
            return match earlier {
                Assign(y, _) => {
                    !y.may_alias(x)
                        && match y {
                            Loc::Reg(r) => !x.index_registers().contains(r),
                            _ => true,
                        }
                }
                Guard(g) | DelayedGuard(g) => !g.global_reads().iter().any(|l| l.may_alias(x)),
                _ => false,
            };
        }
        if matches!(earlier, SpecFence | CacheFetch(_)) || matches!(later, SpecFence) {
            return false;
        }
        (self.basic)(earlier, later)
    }
}

fn tso_basic(earlier: &Action, later: &Action) -> bool {
    let (Action::Assign(stored, _), Action::Assign(Loc::Reg(target), value)) = (earlier, later) else {
        return false;
    };
    if stored.is_register() {
        return false;
    }
    !earlier.registers().contains(target) && !value.global_reads().iter().any(|l| l.may_alias(stored))
}

/// Substitutes the value expression of an earlier store into a later action
/// that reads the stored location. Stores whose target is not resolved to a
/// fixed cell are not forwarded.
pub fn forward(earlier: &Action, later: &Action) -> Action {
    let Action::Assign(loc, value) = earlier else {
        return later.clone();
    };
    if loc.is_register() || !loc.is_resolved() || !value.global_reads().is_empty() {
        return later.clone();
    }
    let subst = |e: &Expr| e.subst_global_expr(loc, value);
    match later {
        Action::Assign(l, e) => {
            let l = match l {
                Loc::Elem(a, i) => Loc::Elem(a.clone(), Box::new(subst(i))),
                other => other.clone(),
            };
            Action::Assign(l, subst(e))
        }
        Action::Guard(e) => Action::Guard(subst(e)),
        Action::DelayedGuard(e) => Action::DelayedGuard(subst(e)),
        other => other.clone(),
    }
}

impl PartialEq for MemoryModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Eq for MemoryModel {}

impl std::hash::Hash for MemoryModel {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.name.hash(state);
    }
}

impl fmt::Debug for MemoryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MemoryModel({})", self.name)
    }
}

impl fmt::Display for MemoryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

impl FromStr for MemoryModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sc" => Ok(MemoryModel::sc()),
            "tso" => Ok(MemoryModel::tso()),
            _ => Err(format!("unknown memory model `{s}` (expected sc or tso)")),
        }
    }
}
