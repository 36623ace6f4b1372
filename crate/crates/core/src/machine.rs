//! Global and local stores, the abstract cache, and the flat address model.
//!
//! Globals live in one linear memory image. Arrays occupy contiguous cells
//! in declaration order, so an out-of-bounds index lands on whatever was
//! declared next; that is how a bounds-check bypass reads a neighbouring
//! secret.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lang::{eval, EvalError, Expr, Loc, Name, Valuation, Value};

pub type Addr = usize;

/// Two's-complement value width in bits (1..=64).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Width(u32);

impl Width {
    pub fn new(bits: u32) -> Option<Width> {
        (1..=64).contains(&bits).then_some(Width(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn wrap(self, v: Value) -> Value {
        if self.0 == 64 {
            v
        } else {
            let shift = 64 - self.0;
            (v << shift) >> shift
        }
    }
}

impl Default for Width {
    fn default() -> Self {
        Width(64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Scalar {
        addr: Addr,
    },
    /// `len` is the stated length; `extent` the cells actually allocated,
    /// which may be larger when the initialiser runs past the stated length.
    Array {
        base: Addr,
        len: usize,
        extent: usize,
    },
    Alias {
        addr: Addr,
    },
}

/// One global declaration, kept for printing and initial state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Decl {
    Scalar { name: Name, init: Value },
    Array { name: Name, len: usize, init: Vec<Value> },
    Alias { name: Name, array: Name, index: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("duplicate declaration of `{0}`")]
    Duplicate(Name),
    #[error("alias `{name}` refers to unknown array `{array}`")]
    UnknownArray { name: Name, array: Name },
    #[error("alias `{name}` = {array}[{index}] lies outside the memory image")]
    AliasOutOfImage { name: Name, array: Name, index: i64 },
    #[error("array `{0}` must have a positive length")]
    EmptyArray(Name),
}

/// Address map: a pure function of the declaration list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    width: Width,
    cells: usize,
    symbols: BTreeMap<Name, Symbol>,
    decls: Vec<Decl>,
    owners: Vec<(Name, Option<usize>)>,
}

impl Layout {
    /// Allocates the declarations in order and returns the layout with the
    /// initial memory image.
    pub fn build(decls: Vec<Decl>, width: Width) -> Result<(Layout, MemoryImage), LayoutError> {
        let mut symbols = BTreeMap::new();
        let mut cells: Vec<Value> = Vec::new();
        let mut owners = Vec::new();
        for d in &decls {
            match d {
                Decl::Scalar { name, init } => {
                    if symbols
                        .insert(name.clone(), Symbol::Scalar { addr: cells.len() })
                        .is_some()
                    {
                        return Err(LayoutError::Duplicate(name.clone()));
                    }
                    owners.push((name.clone(), None));
                    cells.push(width.wrap(*init));
                }
                Decl::Array { name, len, init } => {
                    if *len == 0 {
                        return Err(LayoutError::EmptyArray(name.clone()));
                    }
                    let extent = (*len).max(init.len());
                    let sym = Symbol::Array {
                        base: cells.len(),
                        len: *len,
                        extent,
                    };
                    if symbols.insert(name.clone(), sym).is_some() {
                        return Err(LayoutError::Duplicate(name.clone()));
                    }
                    for i in 0..extent {
                        owners.push((name.clone(), Some(i)));
                        cells.push(width.wrap(init.get(i).copied().unwrap_or(0)));
                    }
                }
                Decl::Alias { .. } => {}
            }
        }
        // Aliases resolve against the complete image.
        for d in &decls {
            if let Decl::Alias { name, array, index } = d {
                let base = match symbols.get(array) {
                    Some(Symbol::Array { base, .. }) => *base as i64,
                    _ => {
                        return Err(LayoutError::UnknownArray {
                            name: name.clone(),
                            array: array.clone(),
                        })
                    }
                };
                let addr = base + index;
                if addr < 0 || addr as usize >= cells.len() {
                    return Err(LayoutError::AliasOutOfImage {
                        name: name.clone(),
                        array: array.clone(),
                        index: *index,
                    });
                }
                if symbols
                    .insert(name.clone(), Symbol::Alias { addr: addr as usize })
                    .is_some()
                {
                    return Err(LayoutError::Duplicate(name.clone()));
                }
            }
        }
        let layout = Layout {
            width,
            cells: cells.len(),
            symbols,
            decls,
            owners,
        };
        Ok((layout, MemoryImage::new(cells)))
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn decls(&self) -> &[Decl] {
        &self.decls
    }

    pub fn symbol(&self, name: &str) -> Option<Symbol> {
        self.symbols.get(name).copied()
    }

    pub fn is_array(&self, name: &str) -> bool {
        matches!(self.symbol(name), Some(Symbol::Array { .. }))
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.symbols.contains_key(name)
    }

    /// Stated length of an array.
    pub fn array_len(&self, name: &str) -> Option<usize> {
        match self.symbol(name)? {
            Symbol::Array { len, .. } => Some(len),
            _ => None,
        }
    }

    /// Address of a global scalar/alias (`index == None`) or array element.
    pub fn address(&self, name: &Name, index: Option<Value>) -> Result<Addr, EvalError> {
        let sym = self
            .symbols
            .get(name)
            .ok_or_else(|| EvalError::UnknownGlobal(name.clone()))?;
        let (addr, shown) = match (sym, index) {
            (Symbol::Scalar { addr } | Symbol::Alias { addr }, None) => (*addr as i64, name.to_string()),
            (Symbol::Array { base, .. }, Some(i)) => ((*base as i64).wrapping_add(i), format!("{name}[{i}]")),
            (Symbol::Array { .. }, None) => return Err(EvalError::NeedsIndex(name.clone())),
            (_, Some(_)) => return Err(EvalError::NotAnArray(name.clone())),
        };
        if addr < 0 || addr as usize >= self.cells {
            return Err(EvalError::OutOfImage {
                loc: shown,
                addr,
                cells: self.cells,
            });
        }
        Ok(addr as usize)
    }

    /// The location naming `addr` in its allocating declaration.
    pub fn canonical(&self, addr: Addr) -> Option<Loc> {
        self.owners.get(addr).map(|(n, i)| match i {
            None => Loc::Var(n.clone()),
            Some(i) => Loc::Elem(n.clone(), Box::new(Expr::Int(*i as Value))),
        })
    }

    /// Rewrites a resolved global location to its canonical form; other
    /// locations are returned unchanged.
    pub fn canonicalize(&self, loc: &Loc) -> Loc {
        let addr = match loc {
            Loc::Var(x) => self.address(x, None),
            Loc::Elem(a, i) => match **i {
                Expr::Int(i) => self.address(a, Some(i)),
                _ => return loc.clone(),
            },
            Loc::Reg(_) => return loc.clone(),
        };
        addr.ok().and_then(|a| self.canonical(a)).unwrap_or_else(|| loc.clone())
    }

    /// Canonical name of an address: the declaration that allocated it.
    pub fn describe(&self, addr: Addr) -> String {
        match self.owners.get(addr) {
            Some((n, None)) => n.to_string(),
            Some((n, Some(i))) => format!("{n}[{i}]"),
            None => format!("@{addr}"),
        }
    }
}

/// `addr_of`: address of a global location, evaluating any index in `env`.
pub fn addr_of(layout: &Layout, loc: &Loc, env: &dyn Valuation) -> Result<Addr, EvalError> {
    match loc {
        Loc::Reg(r) => Err(EvalError::Unresolved(r.to_string(), "registers have no address")),
        Loc::Var(x) => layout.address(x, None),
        Loc::Elem(a, i) => {
            let i = eval(i, env)?;
            layout.address(a, Some(i))
        }
    }
}

/// Data cells plus the distinguished cache set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemoryImage {
    cells: Vec<Value>,
    cache: BTreeSet<Addr>,
}

impl MemoryImage {
    pub fn new(cells: Vec<Value>) -> MemoryImage {
        MemoryImage {
            cells,
            cache: BTreeSet::new(),
        }
    }

    pub fn cells(&self) -> &[Value] {
        &self.cells
    }

    pub fn cache(&self) -> &BTreeSet<Addr> {
        &self.cache
    }

    pub fn read(&self, a: Addr) -> Value {
        self.cells[a]
    }

    pub fn write(&self, a: Addr, v: Value) -> MemoryImage {
        let mut next = self.clone();
        next.cells[a] = v;
        next
    }

    pub fn cache_fetch(&self, a: Addr) -> MemoryImage {
        let mut next = self.clone();
        next.cache.insert(a);
        next
    }

    pub fn cache_flush(&self) -> MemoryImage {
        MemoryImage {
            cells: self.cells.clone(),
            cache: BTreeSet::new(),
        }
    }

    pub fn cache_query(&self, a: Addr) -> bool {
        self.cache.contains(&a)
    }

    pub fn with_cache(&self, cache: BTreeSet<Addr>) -> MemoryImage {
        MemoryImage {
            cells: self.cells.clone(),
            cache,
        }
    }
}

/// Register valuation of one local scope.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Registers(BTreeMap<Name, Value>);

impl Registers {
    pub fn new() -> Registers {
        Registers::default()
    }

    pub fn get(&self, r: &str) -> Option<Value> {
        self.0.get(r).copied()
    }

    pub fn contains(&self, r: &str) -> bool {
        self.0.contains_key(r)
    }

    pub fn set(&mut self, r: Name, v: Value) {
        self.0.insert(r, v);
    }

    pub fn with(mut self, r: &str, v: Value) -> Registers {
        self.0.insert(r.into(), v);
        self
    }

    pub fn updated(&self, r: &Name, v: Value) -> Registers {
        let mut next = self.clone();
        next.0.insert(r.clone(), v);
        next
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Value)> {
        self.0.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Same domain, every register zero.
    pub fn zeroed(&self) -> Registers {
        Registers(self.0.keys().map(|k| (k.clone(), 0)).collect())
    }

    /// `self` overridden by `inner`.
    pub fn overlay(&self, inner: &Registers) -> Registers {
        let mut next = self.clone();
        for (k, v) in inner.iter() {
            next.0.insert(k.clone(), *v);
        }
        next
    }
}

impl FromIterator<(Name, Value)> for Registers {
    fn from_iter<T: IntoIterator<Item = (Name, Value)>>(iter: T) -> Self {
        Registers(iter.into_iter().collect())
    }
}

impl fmt::Display for Registers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} = {v}")?;
        }
        f.write_str("}")
    }
}

/// Speculated global stores, keyed by resolved address.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransientStore(BTreeMap<Addr, Value>);

impl TransientStore {
    pub fn new() -> TransientStore {
        TransientStore::default()
    }

    pub fn get(&self, a: Addr) -> Option<Value> {
        self.0.get(&a).copied()
    }

    pub fn contains(&self, a: Addr) -> bool {
        self.0.contains_key(&a)
    }

    pub fn updated(&self, a: Addr, v: Value) -> TransientStore {
        let mut next = self.clone();
        next.0.insert(a, v);
        next
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for TransientStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "@{k} = {v}")?;
        }
        f.write_str("}")
    }
}

/// Evaluation view: registers of the innermost scope, the transient
/// buffers between that scope and shared memory (innermost first), and
/// shared memory itself.
pub struct StateView<'a> {
    pub layout: &'a Layout,
    pub regs: Option<&'a Registers>,
    pub buffers: &'a [&'a TransientStore],
    pub mem: &'a MemoryImage,
}

impl<'a> StateView<'a> {
    pub fn new(layout: &'a Layout, mem: &'a MemoryImage) -> StateView<'a> {
        StateView {
            layout,
            regs: None,
            buffers: &[],
            mem,
        }
    }

    pub fn with_regs(mut self, regs: &'a Registers) -> StateView<'a> {
        self.regs = Some(regs);
        self
    }

    /// Value visible at `a`: the innermost buffer holding it, else memory.
    pub fn read(&self, a: Addr) -> Value {
        self.buffers
            .iter()
            .find_map(|b| b.get(a))
            .unwrap_or_else(|| self.mem.read(a))
    }
}

impl Valuation for StateView<'_> {
    fn register(&self, name: &Name) -> Result<Value, EvalError> {
        self.regs
            .and_then(|r| r.get(name))
            .ok_or_else(|| EvalError::UnboundRegister(name.clone()))
    }

    fn global(&self, name: &Name, index: Option<Value>) -> Result<Value, EvalError> {
        Ok(self.read(self.layout.address(name, index)?))
    }

    fn in_cache(&self, name: &Name, index: Option<Value>) -> Result<bool, EvalError> {
        Ok(self.mem.cache_query(self.layout.address(name, index)?))
    }

    fn wrap(&self, v: Value) -> Value {
        self.layout.width.wrap(v)
    }
}
