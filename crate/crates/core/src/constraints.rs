//! Dependence-constraint generation for array references.
//!
//! For every pair of aliasing array accesses in a loop (one of them a write),
//! the generator emits an integer formula that is satisfiable exactly when
//! the two accesses can touch the same element in different iterations. The
//! encoding maps a loop-local variable `y` in iteration tag `t` to the
//! logical variable `y^t`, keeps non-local variables untagged, and expands
//! the reaching definitions of every index transitively.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::canon::CanonicalLoop;
use crate::cfg::ReachingDefs;
use crate::ir::{BinOp, CmpOp, Expr, FunctionDef, Operand, StmtKind};

/// Integer-valued expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Var { name: String, tag: Option<u8> },
    Const(i64),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
}

/// Boolean formula over [`Term`] comparisons.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Cmp { op: CmpOp, lhs: Term, rhs: Term },
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn cmp(op: CmpOp, lhs: Term, rhs: Term) -> Formula {
        Formula::Cmp { op, lhs, rhs }
    }

    /// Every (name, tag) pair appearing in the formula.
    pub fn variables(&self) -> BTreeSet<(String, Option<u8>)> {
        fn walk_term(t: &Term, out: &mut BTreeSet<(String, Option<u8>)>) {
            match t {
                Term::Var { name, tag } => {
                    out.insert((name.clone(), *tag));
                }
                Term::Const(_) => {}
                Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                    walk_term(a, out);
                    walk_term(b, out);
                }
            }
        }
        fn walk(f: &Formula, out: &mut BTreeSet<(String, Option<u8>)>) {
            match f {
                Formula::True | Formula::False => {}
                Formula::Cmp { lhs, rhs, .. } => {
                    walk_term(lhs, out);
                    walk_term(rhs, out);
                }
                Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| walk(f, out)),
            }
        }
        let mut out = BTreeSet::new();
        walk(self, &mut out);
        out
    }
}

/// Flattens nested conjunctions/disjunctions, drops neutral elements,
/// deduplicates, and sorts, giving every formula one canonical shape.
pub fn normalize(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Cmp { .. } => f.clone(),
        Formula::And(fs) => {
            let mut parts: Vec<Formula> = Vec::new();
            for g in fs {
                match normalize(g) {
                    Formula::True => {}
                    Formula::False => return Formula::False,
                    Formula::And(inner) => parts.extend(inner),
                    other => parts.push(other),
                }
            }
            parts.sort();
            parts.dedup();
            match parts.len() {
                0 => Formula::True,
                1 => parts.pop().unwrap(),
                _ => Formula::And(parts),
            }
        }
        Formula::Or(fs) => {
            let mut parts: Vec<Formula> = Vec::new();
            for g in fs {
                match normalize(g) {
                    Formula::False => {}
                    Formula::True => return Formula::True,
                    Formula::Or(inner) => parts.extend(inner),
                    other => parts.push(other),
                }
            }
            parts.sort();
            parts.dedup();
            match parts.len() {
                0 => Formula::False,
                1 => parts.pop().unwrap(),
                _ => Formula::Or(parts),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefKind {
    Read,
    Write,
}

/// One array access in the loop body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayRef {
    pub stmt: usize,
    pub base: String,
    pub index: Operand,
    pub kind: RefKind,
}

/// All array accesses of the loop body, writes and reads separately, in
/// statement order.
pub fn collect_array_refs(f: &FunctionDef, info: &CanonicalLoop) -> (Vec<ArrayRef>, Vec<ArrayRef>) {
    let mut writes = Vec::new();
    let mut reads = Vec::new();
    for &s in &info.body {
        match &f.statements[s].kind {
            StmtKind::ArrayStore { base, index, .. } => writes.push(ArrayRef {
                stmt: s,
                base: base.clone(),
                index: index.clone(),
                kind: RefKind::Write,
            }),
            StmtKind::ArrayLoad { base, index, .. } => reads.push(ArrayRef {
                stmt: s,
                base: base.clone(),
                index: index.clone(),
                kind: RefKind::Read,
            }),
            _ => {}
        }
    }
    (writes, reads)
}

/// An index is computed by a statement form outside the supported fragment;
/// the loop must be treated as having a dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unsupported {
    pub statement: usize,
}

pub struct GenContext<'a> {
    pub f: &'a FunctionDef,
    /// The loop under analysis.
    pub info: &'a CanonicalLoop,
    /// Every canonical loop of the function, the analyzed one included.
    pub all_loops: &'a [CanonicalLoop],
    /// Names private to the analyzed loop.
    pub locals: &'a BTreeSet<String>,
    pub defs: &'a ReachingDefs,
    visited: BTreeSet<(usize, u8)>,
}

impl<'a> GenContext<'a> {
    pub fn new(
        f: &'a FunctionDef,
        info: &'a CanonicalLoop,
        all_loops: &'a [CanonicalLoop],
        locals: &'a BTreeSet<String>,
        defs: &'a ReachingDefs,
    ) -> Self {
        GenContext { f, info, all_loops, locals, defs, visited: BTreeSet::new() }
    }

    /// Procedure N: loop-local names get an iteration tag.
    fn n(&self, name: &str, tag: u8) -> Term {
        Term::Var {
            name: String::from(name),
            tag: if self.locals.contains(name) { Some(tag) } else { None },
        }
    }

    fn term(&self, op: &Operand, tag: u8) -> Term {
        match op {
            Operand::Const(c) => Term::Const(*c),
            Operand::Local(x) => self.n(x, tag),
        }
    }

    /// The canonical loop whose iterator `s` defines, if the iterVs case
    /// applies. A name shared by several loops resolves through the defining
    /// statement; an unresolvable share aborts.
    fn loop_for_iter_def(
        &self,
        target: &str,
        s: usize,
    ) -> Result<Option<&'a CanonicalLoop>, Unsupported> {
        let mut candidates = self.all_loops.iter().filter(|l| l.iter == target);
        let first = match candidates.next() {
            None => return Ok(None),
            Some(l) => l,
        };
        let rest: Vec<&CanonicalLoop> = candidates.collect();
        if rest.is_empty() {
            return Ok(Some(first));
        }
        for l in core::iter::once(first).chain(rest) {
            if s == l.init_idx || s == l.upd_idx {
                return Ok(Some(l));
            }
        }
        Err(Unsupported { statement: s })
    }

    /// Disjunction of stmtC over the definitions of `x` reaching `at`.
    fn defs_c(&mut self, x: &Operand, at: usize, tag: u8) -> Result<Formula, Unsupported> {
        let name = match x {
            Operand::Const(_) => return Ok(Formula::True),
            Operand::Local(n) => n,
        };
        let defs = self.defs.defs_of(self.f, name, at);
        let mut arms = Vec::new();
        for d in defs {
            arms.push(self.stmt_c(d, tag)?);
        }
        if arms.is_empty() {
            return Ok(Formula::True);
        }
        Ok(Formula::Or(arms))
    }

    /// Bound constraints for iterating values of `l` under `tag`: the lower
    /// bound is always met and the continue comparison holds.
    fn bounds_c(&mut self, l: &CanonicalLoop, tag: u8) -> Result<Formula, Unsupported> {
        let it = self.n(&l.iter, tag);
        let lb = Formula::cmp(CmpOp::Ge, it.clone(), Term::Const(l.lb));
        let ub = Formula::cmp(l.cond_op, it, self.term(&l.ub, tag));
        let cu = match &l.ub {
            Operand::Const(_) => Formula::True,
            Operand::Local(_) => self.defs_c(&l.ub, self.info.header, tag)?,
        };
        Ok(Formula::And(vec![lb, ub, cu]))
    }

    /// Procedure stmtC: constraints contributed by one definition.
    pub fn stmt_c(&mut self, s: usize, tag: u8) -> Result<Formula, Unsupported> {
        if !self.visited.insert((s, tag)) {
            return Ok(Formula::True);
        }
        let stmt = &self.f.statements[s];
        if let StmtKind::Identity { .. } = stmt.kind {
            return Ok(Formula::True);
        }
        if let Some(target) = stmt.def_target() {
            if let Some(l) = self.loop_for_iter_def(target, s)? {
                return self.bounds_c(l, tag);
            }
            if let StmtKind::Assign { expr, .. } = &stmt.kind {
                match expr {
                    Expr::Const(k) => {
                        return Ok(Formula::cmp(CmpOp::Eq, self.n(target, tag), Term::Const(*k)));
                    }
                    Expr::Local(x) => {
                        let eq = Formula::cmp(CmpOp::Eq, self.n(target, tag), self.n(x, tag));
                        let cx = self.defs_c(&Operand::Local(x.clone()), s, tag)?;
                        return Ok(Formula::And(vec![eq, cx]));
                    }
                    Expr::Bin(op, x1, x2) => {
                        let t1 = self.term(x1, tag);
                        let t2 = self.term(x2, tag);
                        let rhs = match op {
                            BinOp::Add => Term::Add(Box::new(t1), Box::new(t2)),
                            BinOp::Sub => Term::Sub(Box::new(t1), Box::new(t2)),
                            BinOp::Mul => Term::Mul(Box::new(t1), Box::new(t2)),
                        };
                        let eq = Formula::cmp(CmpOp::Eq, self.n(target, tag), rhs);
                        let c1 = self.defs_c(x1, s, tag)?;
                        let c2 = self.defs_c(x2, s, tag)?;
                        return Ok(Formula::And(vec![eq, c1, c2]));
                    }
                }
            }
        }
        Err(Unsupported { statement: s })
    }
}

/// Procedure depC: can `w` and `r` touch the same element in different
/// iterations?
pub fn dep_c(
    f: &FunctionDef,
    info: &CanonicalLoop,
    all_loops: &[CanonicalLoop],
    locals: &BTreeSet<String>,
    defs: &ReachingDefs,
    w: &ArrayRef,
    r: &ArrayRef,
) -> Result<Formula, Unsupported> {
    let mut ctx = GenContext::new(f, info, all_loops, locals, defs);
    let c1 = ctx.defs_c(&w.index, w.stmt, 0)?;
    let c2 = ctx.defs_c(&r.index, r.stmt, 1)?;
    let lc = Formula::cmp(CmpOp::Ne, ctx.n(&info.iter, 0), ctx.n(&info.iter, 1));
    let cdep = Formula::cmp(CmpOp::Eq, ctx.term(&w.index, 0), ctx.term(&r.index, 1));
    let b0 = ctx.bounds_c(info, 0)?;
    let b1 = ctx.bounds_c(info, 1)?;
    Ok(Formula::And(vec![c1, c2, lc, cdep, b0, b1]))
}

/// Procedure loopC: the whole dependence formula, a disjunction over every
/// aliasing write/reference pair. Unsatisfiable means no dependence.
pub fn loop_c(
    f: &FunctionDef,
    info: &CanonicalLoop,
    all_loops: &[CanonicalLoop],
    locals: &BTreeSet<String>,
    defs: &ReachingDefs,
    may_alias: &dyn Fn(&str, &str) -> bool,
) -> Result<Formula, Unsupported> {
    let (writes, reads) = collect_array_refs(f, info);
    let mut refs: Vec<&ArrayRef> = writes.iter().collect();
    refs.extend(reads.iter());

    let mut arms = Vec::new();
    for w in &writes {
        for r in &refs {
            if may_alias(&w.base, &r.base) {
                arms.push(dep_c(f, info, all_loops, locals, defs, w, r)?);
            }
        }
    }
    if arms.is_empty() {
        return Ok(Formula::False);
    }
    Ok(Formula::Or(arms))
}
