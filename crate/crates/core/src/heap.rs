//! Points-to analysis, call graph, alias queries, and function purity.
//!
//! Points-to is a flow-, context-, and field-insensitive fixed point over
//! allocation sites. Every array or object parameter gets a pseudo-site, every
//! array global gets a seed site, and one `External` site stands for anything
//! an unresolved callee may have produced. Purity summaries then classify each
//! function by whether it reads or writes state that outlives its call.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::canon::CanonicalLoop;
use crate::ir::{FunctionDef, Operand, Program, StmtKind};

/// An abstract heap object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Site {
    /// `new` at (function, statement).
    Alloc(String, usize),
    /// Reference parameter (function, position).
    Param(String, usize),
    /// The initial value of an array global.
    Global(String),
    /// Anything created or captured by unresolved callees.
    External,
}

type SiteSet = BTreeSet<Site>;

#[derive(Debug, Default)]
pub struct PointsTo {
    /// (function, local) → sites.
    env: BTreeMap<(String, String), SiteSet>,
    /// global name → sites.
    genv: BTreeMap<String, SiteSet>,
    /// site → sites its fields may hold.
    blobs: BTreeMap<Site, SiteSet>,
    /// Functions whose callers are not all visible in the program.
    open: BTreeSet<String>,
}

impl PointsTo {
    pub fn env(&self, function: &str, local: &str) -> SiteSet {
        self.env.get(&(function.to_owned(), local.to_owned())).cloned().unwrap_or_default()
    }

    pub fn is_open(&self, function: &str) -> bool {
        self.open.contains(function)
    }

    fn open_rooted(&self, site: &Site) -> bool {
        match site {
            Site::External => true,
            Site::Param(f, _) => self.open.contains(f),
            _ => false,
        }
    }

    /// May `a` and `b` refer to the same object inside `function`? True on a
    /// site in common, or when both can hold objects supplied by unknown
    /// callers.
    pub fn may_alias(&self, function: &str, a: &str, b: &str) -> bool {
        let ea = self.env(function, a);
        let eb = self.env(function, b);
        if ea.intersection(&eb).next().is_some() {
            return true;
        }
        ea.iter().any(|s| self.open_rooted(s)) && eb.iter().any(|s| self.open_rooted(s))
    }
}

#[derive(Debug, Default)]
pub struct CallGraph {
    /// caller name → callee names, resolved calls only.
    pub edges: BTreeMap<String, BTreeSet<String>>,
    /// Callee names with no definition in the program.
    pub external: BTreeSet<String>,
}

pub fn build_call_graph(p: &Program) -> CallGraph {
    let mut cg = CallGraph::default();
    for f in &p.functions {
        let entry = cg.edges.entry(f.name.clone()).or_default();
        for s in &f.statements {
            if let StmtKind::Call { callee, .. } = &s.kind {
                if p.function_by_name(callee).is_some() {
                    entry.insert(callee.clone());
                } else {
                    cg.external.insert(callee.clone());
                }
            }
        }
    }
    cg
}

fn insert_all(
    dst: &mut BTreeMap<(String, String), SiteSet>,
    key: (String, String),
    src: &SiteSet,
) -> bool {
    let set = dst.entry(key).or_default();
    let before = set.len();
    set.extend(src.iter().cloned());
    set.len() != before
}

pub fn compute_points_to(p: &Program) -> PointsTo {
    let mut pt = PointsTo::default();

    let called: BTreeSet<&str> = p
        .functions
        .iter()
        .flat_map(|f| f.statements.iter())
        .filter_map(|s| match &s.kind {
            StmtKind::Call { callee, .. } => Some(callee.as_str()),
            _ => None,
        })
        .collect();
    for f in &p.functions {
        if p.entry.is_none() || !called.contains(f.name.as_str()) {
            pt.open.insert(f.name.clone());
        }
    }

    for g in &p.globals {
        if g.kind.is_array() {
            pt.genv.entry(g.name.clone()).or_default().insert(Site::Global(g.name.clone()));
        }
    }

    // Names of locals each function returns, for call-result flow.
    let returns: BTreeMap<&str, Vec<&str>> = p
        .functions
        .iter()
        .map(|f| {
            let names = f
                .statements
                .iter()
                .filter_map(|s| match &s.kind {
                    StmtKind::Return { value: Some(Operand::Local(r)) } => Some(r.as_str()),
                    _ => None,
                })
                .collect();
            (f.name.as_str(), names)
        })
        .collect();

    let mut changed = true;
    while changed {
        changed = false;
        for f in &p.functions {
            for s in &f.statements {
                let key = |local: &str| (f.name.clone(), local.to_owned());
                match &s.kind {
                    StmtKind::Identity { target, param } => {
                        if f.params[*param].kind.is_ref() {
                            let site = Site::Param(f.name.clone(), *param);
                            changed |= pt.env.entry(key(target)).or_default().insert(site);
                        }
                    }
                    StmtKind::New { target, .. } => {
                        changed |= pt
                            .env
                            .entry(key(target))
                            .or_default()
                            .insert(Site::Alloc(f.name.clone(), s.index));
                    }
                    StmtKind::Assign { target, expr: crate::ir::Expr::Local(y) } => {
                        let src = pt.env(&f.name, y);
                        changed |= insert_all(&mut pt.env, key(target), &src);
                    }
                    StmtKind::FieldStore { base, value: Operand::Local(v), .. } => {
                        let src = pt.env(&f.name, v);
                        for site in pt.env(&f.name, base) {
                            let blob = pt.blobs.entry(site).or_default();
                            let before = blob.len();
                            blob.extend(src.iter().cloned());
                            changed |= blob.len() != before;
                        }
                    }
                    StmtKind::FieldLoad { target, base, .. } => {
                        let mut src = SiteSet::new();
                        for site in pt.env(&f.name, base) {
                            if let Some(blob) = pt.blobs.get(&site) {
                                src.extend(blob.iter().cloned());
                            }
                        }
                        changed |= insert_all(&mut pt.env, key(target), &src);
                    }
                    StmtKind::GlobalLoad { target, global } => {
                        let src = pt.genv.get(global).cloned().unwrap_or_default();
                        changed |= insert_all(&mut pt.env, key(target), &src);
                    }
                    StmtKind::GlobalStore { global, value: Operand::Local(v) } => {
                        let src = pt.env(&f.name, v);
                        let set = pt.genv.entry(global.clone()).or_default();
                        let before = set.len();
                        set.extend(src.iter().cloned());
                        changed |= set.len() != before;
                    }
                    StmtKind::Call { target, callee, args } => {
                        match p.function_by_name(callee) {
                            Some(callee_def) => {
                                for (k, arg) in args.iter().enumerate() {
                                    if let (Operand::Local(a), Some(param)) =
                                        (arg, callee_def.params.get(k))
                                    {
                                        let src = pt.env(&f.name, a);
                                        changed |= insert_all(
                                            &mut pt.env,
                                            (callee_def.name.clone(), param.name.clone()),
                                            &src,
                                        );
                                    }
                                }
                                if let Some(t) = target {
                                    let mut src = SiteSet::new();
                                    for r in &returns[callee.as_str()] {
                                        src.extend(pt.env(callee, r));
                                    }
                                    changed |= insert_all(&mut pt.env, key(t), &src);
                                }
                            }
                            None => {
                                // Unresolved callee: arguments escape into the
                                // external blob and the result may be anything
                                // in it.
                                let blob = pt.blobs.entry(Site::External).or_default();
                                let before = blob.len();
                                for arg in args {
                                    if let Operand::Local(a) = arg {
                                        let src: SiteSet = pt
                                            .env
                                            .get(&(f.name.clone(), a.clone()))
                                            .cloned()
                                            .unwrap_or_default();
                                        blob.extend(src);
                                    }
                                }
                                changed |= pt.blobs[&Site::External].len() != before;
                                if let Some(t) = target {
                                    let mut src =
                                        pt.blobs.get(&Site::External).cloned().unwrap_or_default();
                                    src.insert(Site::External);
                                    changed |= insert_all(&mut pt.env, key(t), &src);
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    pt
}

/// Read/write impurity flags for one function.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Purity {
    pub read_impure: bool,
    pub write_impure: bool,
}

impl Purity {
    pub fn is_pure(self) -> bool {
        !self.read_impure && !self.write_impure
    }
}

/// Sites that existed before `f` was called: everything reachable from its
/// reference parameters, from globals, or from the external blob.
fn preexisting_roots(p: &Program, pt: &PointsTo, f: &FunctionDef) -> SiteSet {
    let mut roots = SiteSet::new();
    for (k, param) in f.params.iter().enumerate() {
        if param.kind.is_ref() {
            roots.insert(Site::Param(f.name.clone(), k));
            roots.extend(pt.env(&f.name, &param.name));
        }
    }
    for g in &p.globals {
        if let Some(sites) = pt.genv.get(&g.name) {
            roots.extend(sites.iter().cloned());
        }
    }
    roots.insert(Site::External);

    let mut work: Vec<Site> = roots.iter().cloned().collect();
    while let Some(site) = work.pop() {
        if let Some(blob) = pt.blobs.get(&site) {
            for s in blob {
                if roots.insert(s.clone()) {
                    work.push(s.clone());
                }
            }
        }
    }
    roots
}

/// Purity of every defined function, keyed by function name.
pub fn compute_purity(p: &Program, pt: &PointsTo) -> BTreeMap<String, Purity> {
    let mut purity: BTreeMap<String, Purity> = BTreeMap::new();

    for f in &p.functions {
        let roots = preexisting_roots(p, pt, f);
        let touches_roots = |base: &str| pt.env(&f.name, base).iter().any(|s| roots.contains(s));
        let mut flags = Purity::default();
        if f.name == "<clinit>" {
            flags.write_impure = true;
        }
        for s in &f.statements {
            match &s.kind {
                StmtKind::GlobalLoad { .. } => flags.read_impure = true,
                StmtKind::GlobalStore { .. } => flags.write_impure = true,
                StmtKind::ArrayLoad { base, .. } | StmtKind::FieldLoad { base, .. } => {
                    if touches_roots(base) {
                        flags.read_impure = true;
                    }
                }
                StmtKind::ArrayStore { base, .. } | StmtKind::FieldStore { base, .. } => {
                    if touches_roots(base) {
                        flags.write_impure = true;
                    }
                }
                StmtKind::Call { callee, .. }
                    if p.function_by_name(callee).is_none() || callee == "<clinit>" =>
                {
                    flags.write_impure = true;
                }
                _ => {}
            }
        }
        purity.insert(f.name.clone(), flags);
    }

    // Join flags along resolved call edges; monotone, so |functions| * 2
    // rounds more than suffice.
    let cg = build_call_graph(p);
    for _ in 0..p.functions.len() * 2 {
        let mut changed = false;
        for (caller, callees) in &cg.edges {
            let mut joined = purity[caller];
            for callee in callees {
                let c = purity[callee];
                joined.read_impure |= c.read_impure;
                joined.write_impure |= c.write_impure;
            }
            if joined != purity[caller] {
                purity.insert(caller.clone(), joined);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    purity
}

/// True iff every call in the loop body targets a defined, fully pure
/// function.
pub fn loop_calls_ok(
    p: &Program,
    f: &FunctionDef,
    info: &CanonicalLoop,
    purity: &BTreeMap<String, Purity>,
) -> bool {
    info.body.iter().all(|&s| match &f.statements[s].kind {
        StmtKind::Call { callee, .. } => {
            p.function_by_name(callee).is_some() && purity.get(callee).is_some_and(|q| q.is_pure())
        }
        _ => true,
    })
}
