//! Three-valued satisfiability for dependence formulas.
//!
//! The decision pipeline lifts a formula to disjunctive normal form and
//! attacks each disjunct in stages: constant folding and GCD divisibility,
//! substitution of unit-coefficient equalities, integer Fourier–Motzkin with
//! coefficient tightening, exhaustive enumeration over finite derived
//! domains, and a bounded window search for nonlinear satisfiable cases.
//! UNSAT answers come only from sound arguments; SAT answers always carry a
//! model checked by an independent evaluator. Everything else is UNKNOWN.
//!
//! Products of two variables are abstracted as congruence atoms: the same
//! multiset of factors maps to the same fresh variable, so common nonlinear
//! subterms cancel while the abstraction stays a relaxation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{normalize, Formula, Term};
use crate::ir::CmpOp;

/// A logical variable: base name plus optional iteration tag.
pub type VarKey = (String, Option<u8>);

/// Integer assignment for every variable of a formula.
pub type Model = BTreeMap<VarKey, i64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
    Unknown,
}

impl SolveResult {
    pub fn status_text(&self) -> &'static str {
        match self {
            SolveResult::Sat(_) => "sat",
            SolveResult::Unsat => "unsat",
            SolveResult::Unknown => "unknown",
        }
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            SolveResult::Sat(m) => Some(m),
            _ => None,
        }
    }
}

/// UNSAT means no cross-iteration dependence, hence parallelizable; SAT and
/// UNKNOWN are both treated as a dependence.
pub fn classify(r: &SolveResult) -> bool {
    matches!(r, SolveResult::Unsat)
}

pub struct SolverConfig<'a> {
    /// Largest domain-size product the exhaustive fallback may enumerate.
    pub enum_bound: u64,
    /// Polled during long phases; `true` aborts with UNKNOWN.
    pub deadline: Option<&'a dyn Fn() -> bool>,
}

impl Default for SolverConfig<'static> {
    fn default() -> Self {
        SolverConfig { enum_bound: 4096, deadline: None }
    }
}

/// An input outside the solver's contract, such as two distinct variables
/// rendering to the same declaration name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractViolation(pub String);

impl core::fmt::Display for ContractViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "contract violation: {}", self.0)
    }
}

/// Rendered variable name: tagged variables become `name_tag`.
pub fn mangle(name: &str, tag: Option<u8>) -> String {
    match tag {
        Some(t) => format!("{name}_{t}"),
        None => name.to_string(),
    }
}

fn check_mangling(f: &Formula) -> Result<BTreeMap<String, VarKey>, ContractViolation> {
    let mut seen: BTreeMap<String, VarKey> = BTreeMap::new();
    for key in f.variables() {
        let text = mangle(&key.0, key.1);
        if let Some(prev) = seen.get(&text) {
            if *prev != key {
                return Err(ContractViolation(format!(
                    "variables {:?} and {:?} both render as {}",
                    prev, key, text
                )));
            }
        }
        seen.insert(text, key);
    }
    Ok(seen)
}

// ---------------------------------------------------------------------------
// Evaluation

fn eval_term_with(t: &Term, look: &mut dyn FnMut(&str, Option<u8>) -> i128) -> Option<i128> {
    match t {
        Term::Var { name, tag } => Some(look(name, *tag)),
        Term::Const(c) => Some(*c as i128),
        Term::Add(a, b) => eval_term_with(a, look)?.checked_add(eval_term_with(b, look)?),
        Term::Sub(a, b) => eval_term_with(a, look)?.checked_sub(eval_term_with(b, look)?),
        Term::Mul(a, b) => eval_term_with(a, look)?.checked_mul(eval_term_with(b, look)?),
    }
}

fn eval_formula_with(f: &Formula, look: &mut dyn FnMut(&str, Option<u8>) -> i128) -> Option<bool> {
    match f {
        Formula::True => Some(true),
        Formula::False => Some(false),
        Formula::Cmp { op, lhs, rhs } => {
            let a = eval_term_with(lhs, look)?;
            let b = eval_term_with(rhs, look)?;
            Some(match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
            })
        }
        Formula::And(fs) => {
            for g in fs {
                if !eval_formula_with(g, look)? {
                    return Some(false);
                }
            }
            Some(true)
        }
        Formula::Or(fs) => {
            for g in fs {
                if eval_formula_with(g, look)? {
                    return Some(true);
                }
            }
            Some(false)
        }
    }
}

/// Evaluates `f` under `model`; unassigned variables read as 0. `None`
/// signals arithmetic overflow.
pub fn eval_formula(f: &Formula, model: &Model) -> Option<bool> {
    eval_formula_with(f, &mut |name, tag| {
        model.get(&(name.to_string(), tag)).copied().map(|v| v as i128).unwrap_or(0)
    })
}

// ---------------------------------------------------------------------------
// SMT-LIB emission

fn smt_term(t: &Term, out: &mut String) {
    match t {
        Term::Var { name, tag } => out.push_str(&mangle(name, *tag)),
        Term::Const(c) => {
            if *c < 0 {
                out.push_str(&format!("(- {})", c.unsigned_abs()));
            } else {
                out.push_str(&format!("{c}"));
            }
        }
        Term::Add(a, b) => smt_binary("+", a, b, out),
        Term::Sub(a, b) => smt_binary("-", a, b, out),
        Term::Mul(a, b) => smt_binary("*", a, b, out),
    }
}

fn smt_binary(op: &str, a: &Term, b: &Term, out: &mut String) {
    out.push('(');
    out.push_str(op);
    out.push(' ');
    smt_term(a, out);
    out.push(' ');
    smt_term(b, out);
    out.push(')');
}

fn smt_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Cmp { op, lhs, rhs } => {
            let sym = match op {
                CmpOp::Lt => "<",
                CmpOp::Le => "<=",
                CmpOp::Gt => ">",
                CmpOp::Ge => ">=",
                CmpOp::Eq => "=",
                CmpOp::Ne => "distinct",
            };
            out.push('(');
            out.push_str(sym);
            out.push(' ');
            smt_term(lhs, out);
            out.push(' ');
            smt_term(rhs, out);
            out.push(')');
        }
        Formula::And(fs) | Formula::Or(fs) => {
            out.push('(');
            out.push_str(if matches!(f, Formula::And(_)) { "and" } else { "or" });
            for g in fs {
                out.push(' ');
                smt_formula(g, out);
            }
            out.push(')');
        }
    }
}

/// SMT-LIB2 script for the normalized formula: sorted declarations, one
/// assert, one check-sat.
pub fn emit_smtlib(f: &Formula) -> Result<String, ContractViolation> {
    let g = normalize(f);
    let names = check_mangling(&g)?;
    let mut out = String::new();
    for name in names.keys() {
        out.push_str("(declare-const ");
        out.push_str(name);
        out.push_str(" Int)\n");
    }
    out.push_str("(assert ");
    smt_formula(&g, &mut out);
    out.push_str(")\n(check-sat)\n");
    Ok(out)
}

// ---------------------------------------------------------------------------
// Linear atoms over a per-disjunct variable table

type C = i128;

fn fdiv(a: C, b: C) -> C {
    let q = a / b;
    let r = a % b;
    if r != 0 && ((r < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn cdiv(a: C, b: C) -> C {
    let q = a / b;
    let r = a % b;
    if r != 0 && ((r < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

fn gcd(a: C, b: C) -> C {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a as C
}

#[derive(Debug, Clone)]
enum VarDef {
    Base(VarKey),
    /// Sorted multiset of base variable ids whose product this stands for.
    Product(Vec<usize>),
}

#[derive(Debug, Default)]
struct VarTable {
    defs: Vec<VarDef>,
    base_ids: BTreeMap<VarKey, usize>,
    product_ids: BTreeMap<Vec<usize>, usize>,
}

impl VarTable {
    fn base(&mut self, key: VarKey) -> usize {
        if let Some(&id) = self.base_ids.get(&key) {
            return id;
        }
        let id = self.defs.len();
        self.defs.push(VarDef::Base(key.clone()));
        self.base_ids.insert(key, id);
        id
    }

    fn product(&mut self, factors: Vec<usize>) -> usize {
        if let Some(&id) = self.product_ids.get(&factors) {
            return id;
        }
        let id = self.defs.len();
        self.defs.push(VarDef::Product(factors.clone()));
        self.product_ids.insert(factors, id);
        id
    }

    fn is_base(&self, id: usize) -> bool {
        matches!(self.defs[id], VarDef::Base(_))
    }
}

/// Multivariate polynomial keyed by sorted multisets of base variable ids.
type Poly = BTreeMap<Vec<usize>, C>;

fn poly_add(mut a: Poly, b: Poly, sign: C) -> Option<Poly> {
    for (mono, c) in b {
        let slot = a.entry(mono).or_insert(0);
        *slot = slot.checked_add(c.checked_mul(sign)?)?;
    }
    a.retain(|_, c| *c != 0);
    Some(a)
}

fn poly_mul(a: &Poly, b: &Poly) -> Option<Poly> {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let mut mono = ma.clone();
            mono.extend(mb.iter().copied());
            mono.sort_unstable();
            let slot = out.entry(mono).or_insert(0);
            *slot = slot.checked_add(ca.checked_mul(*cb)?)?;
        }
    }
    out.retain(|_, c| *c != 0);
    Some(out)
}

fn poly_of_term(t: &Term, vt: &mut VarTable) -> Option<Poly> {
    match t {
        Term::Var { name, tag } => {
            let id = vt.base((name.clone(), *tag));
            let mut p = Poly::new();
            p.insert(vec![id], 1);
            Some(p)
        }
        Term::Const(c) => {
            let mut p = Poly::new();
            if *c != 0 {
                p.insert(Vec::new(), *c as C);
            }
            Some(p)
        }
        Term::Add(a, b) => poly_add(poly_of_term(a, vt)?, poly_of_term(b, vt)?, 1),
        Term::Sub(a, b) => poly_add(poly_of_term(a, vt)?, poly_of_term(b, vt)?, -1),
        Term::Mul(a, b) => poly_mul(&poly_of_term(a, vt)?, &poly_of_term(b, vt)?),
    }
}

/// `sum(coeffs[v] * v) + bias <= 0`, or `== 0` when `eq`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LinAtom {
    coeffs: BTreeMap<usize, C>,
    bias: C,
    eq: bool,
}

/// Turns one comparison into a linear atom, abstracting every monomial of
/// degree two or more as a congruence variable.
fn atom_of_cmp(op: CmpOp, lhs: &Term, rhs: &Term, vt: &mut VarTable) -> Option<LinAtom> {
    let diff = poly_add(poly_of_term(lhs, vt)?, poly_of_term(rhs, vt)?, -1)?;
    let mut coeffs = BTreeMap::new();
    let mut bias: C = 0;
    for (mono, c) in diff {
        match mono.len() {
            0 => bias = bias.checked_add(c)?,
            1 => {
                coeffs.insert(mono[0], c);
            }
            _ => {
                coeffs.insert(vt.product(mono), c);
            }
        }
    }
    // diff REL 0 for each comparison, rewritten to <= or == over integers.
    let atom = match op {
        CmpOp::Le => LinAtom { coeffs, bias, eq: false },
        CmpOp::Lt => LinAtom { coeffs, bias: bias.checked_add(1)?, eq: false },
        CmpOp::Eq => LinAtom { coeffs, bias, eq: true },
        CmpOp::Ge | CmpOp::Gt => {
            for c in coeffs.values_mut() {
                *c = c.checked_neg()?;
            }
            let mut bias = bias.checked_neg()?;
            if op == CmpOp::Gt {
                bias = bias.checked_add(1)?;
            }
            LinAtom { coeffs, bias, eq: false }
        }
        CmpOp::Ne => return None,
    };
    Some(atom)
}

enum Stop {
    Contradiction,
    Abort,
}

/// Drops satisfied constant atoms, detects contradictions, and tightens
/// coefficients by their GCD (the divisibility test for equalities).
fn simplify(atoms: Vec<LinAtom>) -> Result<Vec<LinAtom>, Stop> {
    let mut out = Vec::new();
    for mut a in atoms {
        a.coeffs.retain(|_, c| *c != 0);
        if a.coeffs.is_empty() {
            let ok = if a.eq { a.bias == 0 } else { a.bias <= 0 };
            if ok {
                continue;
            }
            return Err(Stop::Contradiction);
        }
        let g = a.coeffs.values().fold(0, |acc, &c| gcd(acc, c));
        if g > 1 {
            if a.eq {
                if a.bias % g != 0 {
                    return Err(Stop::Contradiction);
                }
                for c in a.coeffs.values_mut() {
                    *c /= g;
                }
                a.bias /= g;
            } else {
                // sum <= -bias becomes sum/g <= floor(-bias / g).
                for c in a.coeffs.values_mut() {
                    *c /= g;
                }
                a.bias = -fdiv(-a.bias, g);
            }
        }
        if !out.contains(&a) {
            out.push(a);
        }
    }
    Ok(out)
}

/// Replacement for an eliminated variable: `sum(coeffs) + bias`.
#[derive(Debug, Clone)]
struct SubExpr {
    coeffs: BTreeMap<usize, C>,
    bias: C,
}

/// Atoms surviving substitution plus the replacements made, in order.
type Substituted = (Vec<LinAtom>, Vec<(usize, SubExpr)>);

/// Repeatedly solves an equality for a unit-coefficient variable and
/// substitutes it away, recording replacements for model reconstruction.
fn substitute_all(mut atoms: Vec<LinAtom>) -> Result<Substituted, Stop> {
    let mut subs: Vec<(usize, SubExpr)> = Vec::new();
    loop {
        let mut pick = None;
        'scan: for (i, a) in atoms.iter().enumerate() {
            if !a.eq {
                continue;
            }
            for (&v, &c) in &a.coeffs {
                if c == 1 || c == -1 {
                    pick = Some((i, v, c));
                    break 'scan;
                }
            }
        }
        let Some((i, v, c)) = pick else {
            return Ok((atoms, subs));
        };
        let a = atoms.remove(i);
        // c*v + rest + bias == 0, so v = -(rest + bias) / c with c = ±1.
        let mut expr = SubExpr { coeffs: BTreeMap::new(), bias: 0 };
        for (&u, &cu) in &a.coeffs {
            if u != v {
                expr.coeffs.insert(u, cu.checked_mul(-c).ok_or(Stop::Abort)?);
            }
        }
        expr.bias = a.bias.checked_mul(-c).ok_or(Stop::Abort)?;
        for atom in &mut atoms {
            let Some(cv) = atom.coeffs.remove(&v) else { continue };
            for (&u, &cu) in &expr.coeffs {
                let add = cv.checked_mul(cu).ok_or(Stop::Abort)?;
                let slot = atom.coeffs.entry(u).or_insert(0);
                *slot = slot.checked_add(add).ok_or(Stop::Abort)?;
            }
            let add = cv.checked_mul(expr.bias).ok_or(Stop::Abort)?;
            atom.bias = atom.bias.checked_add(add).ok_or(Stop::Abort)?;
        }
        subs.push((v, expr));
        atoms = simplify(atoms)?;
    }
}

enum FmOutcome {
    Contradiction,
    Done { exact: bool, stack: Vec<(usize, Vec<LinAtom>)> },
    Abort,
    TimedOut,
}

const FM_ATOM_LIMIT: usize = 4096;

/// Fourier–Motzkin over the inequalities; equalities must be split by the
/// caller. The real shadow makes every derived contradiction sound; the
/// `exact` flag reports whether integer solutions were preserved throughout.
fn fourier_motzkin(mut atoms: Vec<LinAtom>, cfg: &SolverConfig) -> FmOutcome {
    let mut exact = true;
    let mut stack = Vec::new();
    loop {
        if expired(cfg) {
            return FmOutcome::TimedOut;
        }
        let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for a in &atoms {
            for (&v, &c) in &a.coeffs {
                let e = counts.entry(v).or_insert((0, 0));
                if c < 0 {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let Some((_, v)) = counts.iter().map(|(&v, &(lo, up))| (lo * up, v)).min() else {
            return FmOutcome::Done { exact, stack };
        };
        let (mentioning, mut rest): (Vec<LinAtom>, Vec<LinAtom>) =
            atoms.into_iter().partition(|a| a.coeffs.contains_key(&v));
        let mut lowers = Vec::new();
        let mut uppers = Vec::new();
        for a in &mentioning {
            if a.coeffs[&v] < 0 {
                lowers.push(a.clone());
            } else {
                uppers.push(a.clone());
            }
        }
        for lo in &lowers {
            for up in &uppers {
                let a = -lo.coeffs[&v];
                let b = up.coeffs[&v];
                if a != 1 && b != 1 {
                    exact = false;
                }
                let mut combined = LinAtom { coeffs: BTreeMap::new(), bias: 0, eq: false };
                let acc = |src: &LinAtom, m: C, out: &mut LinAtom| -> Option<()> {
                    for (&u, &cu) in &src.coeffs {
                        if u == v {
                            continue;
                        }
                        let add = cu.checked_mul(m)?;
                        let slot = out.coeffs.entry(u).or_insert(0);
                        *slot = slot.checked_add(add)?;
                    }
                    out.bias = out.bias.checked_add(src.bias.checked_mul(m)?)?;
                    Some(())
                };
                if acc(lo, b, &mut combined).is_none() || acc(up, a, &mut combined).is_none() {
                    return FmOutcome::Abort;
                }
                rest.push(combined);
            }
        }
        stack.push((v, mentioning));
        match simplify(rest) {
            Ok(next) => atoms = next,
            Err(Stop::Contradiction) => return FmOutcome::Contradiction,
            Err(Stop::Abort) => return FmOutcome::Abort,
        }
        if atoms.len() > FM_ATOM_LIMIT {
            return FmOutcome::Abort;
        }
    }
}

/// Tightest [lo, hi] window each variable gets from single-variable atoms.
fn intervals(atoms: &[LinAtom]) -> BTreeMap<usize, (Option<C>, Option<C>)> {
    let mut out: BTreeMap<usize, (Option<C>, Option<C>)> = BTreeMap::new();
    for a in atoms {
        if a.coeffs.len() != 1 {
            continue;
        }
        let (&v, &c) = a.coeffs.iter().next().unwrap();
        let e = out.entry(v).or_insert((None, None));
        // c*v <= -bias (and also >= for equalities).
        if c > 0 || a.eq {
            let hi = if c > 0 { fdiv(-a.bias, c) } else { cdiv(-a.bias, c) };
            e.1 = Some(e.1.map_or(hi, |old: C| old.min(hi)));
        }
        if c < 0 || a.eq {
            let lo = if c < 0 { cdiv(-a.bias, c) } else { fdiv(-a.bias, c) };
            e.0 = Some(e.0.map_or(lo, |old: C| old.max(lo)));
        }
    }
    out
}

fn expired(cfg: &SolverConfig) -> bool {
    cfg.deadline.is_some_and(|d| d())
}

enum Outcome {
    Sat(Model),
    Unsat,
    Unknown,
    TimedOut,
}

struct Disjunct<'a> {
    atoms: Vec<Formula>,
    original: &'a Formula,
}

impl<'a> Disjunct<'a> {
    /// Builds a full candidate model from enumerated or extracted variable
    /// values, computes congruence products from their factors, replays
    /// substitutions, and accepts only if the original formula evaluates to
    /// true.
    fn finish_model(
        &self,
        vt: &VarTable,
        mut vals: BTreeMap<usize, C>,
        subs: &[(usize, SubExpr)],
    ) -> Option<Model> {
        // Products and substitution records can feed each other, so fill in
        // rounds while values become available, then default the rest.
        for round in 0..4 {
            let defaults = round == 3;
            for id in 0..vt.defs.len() {
                if vals.contains_key(&id) {
                    continue;
                }
                if let VarDef::Product(factors) = &vt.defs[id] {
                    if defaults || factors.iter().all(|f| vals.contains_key(f)) {
                        let mut p: C = 1;
                        for f in factors {
                            p = p.checked_mul(vals.get(f).copied().unwrap_or(0))?;
                        }
                        vals.insert(id, p);
                    }
                }
            }
            for (v, expr) in subs.iter().rev() {
                if vals.contains_key(v) {
                    continue;
                }
                if defaults || expr.coeffs.keys().all(|u| vals.contains_key(u)) {
                    let mut x = expr.bias;
                    for (&u, &cu) in &expr.coeffs {
                        let uv = vals.get(&u).copied().unwrap_or(0);
                        x = x.checked_add(cu.checked_mul(uv)?)?;
                    }
                    vals.insert(*v, x);
                }
            }
        }
        let mut model = Model::new();
        for (id, def) in vt.defs.iter().enumerate() {
            if let VarDef::Base(key) = def {
                let v = vals.get(&id).copied().unwrap_or(0);
                model.insert(key.clone(), i64::try_from(v).ok()?);
            }
        }
        for key in self.original.variables() {
            model.entry(key).or_insert(0);
        }
        if eval_formula(self.original, &model) == Some(true) {
            Some(model)
        } else {
            None
        }
    }

    fn decide(&self, cfg: &SolverConfig) -> Outcome {
        let mut vt = VarTable::default();
        let mut lin = Vec::new();
        for atom in &self.atoms {
            let Formula::Cmp { op, lhs, rhs } = atom else {
                return Outcome::Unknown;
            };
            match atom_of_cmp(*op, lhs, rhs, &mut vt) {
                Some(a) => lin.push(a),
                None => return Outcome::Unknown,
            }
        }
        let s0 = match simplify(lin) {
            Ok(s) => s,
            Err(Stop::Contradiction) => return Outcome::Unsat,
            Err(Stop::Abort) => return Outcome::Unknown,
        };
        let original_iv = intervals(&s0);

        let (s1, subs) = match substitute_all(s0) {
            Ok(r) => r,
            Err(Stop::Contradiction) => return Outcome::Unsat,
            Err(Stop::Abort) => return Outcome::Unknown,
        };

        // Split surviving equalities for elimination.
        let mut ineqs = Vec::new();
        for a in &s1 {
            if a.eq {
                let mut le = a.clone();
                le.eq = false;
                let mut ge = a.clone();
                ge.eq = false;
                for c in ge.coeffs.values_mut() {
                    *c = -*c;
                }
                ge.bias = -ge.bias;
                ineqs.push(le);
                ineqs.push(ge);
            } else {
                ineqs.push(a.clone());
            }
        }
        let s1_vars: BTreeSet<usize> = s1.iter().flat_map(|a| a.coeffs.keys().copied()).collect();
        let pure_linear = s1_vars.iter().all(|&v| vt.is_base(v));
        // Without congruence abstraction the reduced system is equivalent to
        // the disjunct, so exhausting it refutes the disjunct; with products
        // it is only a relaxation and exhaustion proves nothing.
        let fully_linear = vt.product_ids.is_empty();

        match fourier_motzkin(ineqs, cfg) {
            FmOutcome::Contradiction => return Outcome::Unsat,
            FmOutcome::TimedOut => return Outcome::TimedOut,
            FmOutcome::Done { exact, stack } if exact && pure_linear => {
                if let Some(vals) = extract(&stack) {
                    if let Some(model) = self.finish_model(&vt, vals, &subs) {
                        return Outcome::Sat(model);
                    }
                }
            }
            _ => {}
        }

        if expired(cfg) {
            return Outcome::TimedOut;
        }

        // Exhaustive enumeration of the reduced system when its domains are
        // finite and small; equisatisfiable with the disjunct, so exhaustion
        // is a real UNSAT.
        let s1_iv = intervals(&s1);
        if pure_linear {
            if let Some(ranges) = finite_ranges(&s1_vars, &s1_iv, cfg.enum_bound) {
                let ids: Vec<usize> = s1_vars.iter().copied().collect();
                let mut found = None;
                let mut overflowed = false;
                let stopped = for_each_point(&ranges, cfg, &mut |point| {
                    let mut ok = true;
                    for a in &s1 {
                        let mut acc = Some(a.bias);
                        for (&u, &cu) in &a.coeffs {
                            let idx = ids.iter().position(|&x| x == u).unwrap();
                            acc = acc.and_then(|x| {
                                cu.checked_mul(point[idx]).and_then(|p| x.checked_add(p))
                            });
                        }
                        match acc {
                            None => {
                                overflowed = true;
                                return true;
                            }
                            Some(value) => {
                                if !(if a.eq { value == 0 } else { value <= 0 }) {
                                    ok = false;
                                    break;
                                }
                            }
                        }
                    }
                    if ok {
                        let vals: BTreeMap<usize, C> =
                            ids.iter().copied().zip(point.iter().copied()).collect();
                        if let Some(m) = self.finish_model(&vt, vals, &subs) {
                            found = Some(m);
                            return true;
                        }
                    }
                    false
                });
                if !overflowed {
                    match (stopped, found) {
                        (Walk::TimedOut, _) => return Outcome::TimedOut,
                        (_, Some(m)) => return Outcome::Sat(m),
                        (Walk::Finished, None) if fully_linear => return Outcome::Unsat,
                        _ => {}
                    }
                }
            }
        }

        // Enumeration over the base variables of the unreduced disjunct.
        let base_ids: Vec<usize> = (0..vt.defs.len()).filter(|&id| vt.is_base(id)).collect();
        let base_set: BTreeSet<usize> = base_ids.iter().copied().collect();
        if let Some(ranges) = finite_ranges(&base_set, &original_iv, cfg.enum_bound) {
            let mut found = None;
            let stopped = self.search_points(&vt, &base_ids, &ranges, cfg, &subs, &mut found);
            match (stopped, found) {
                (Walk::TimedOut, _) => return Outcome::TimedOut,
                (_, Some(m)) => return Outcome::Sat(m),
                (Walk::Finished, None) => return Outcome::Unsat,
                (Walk::Stopped, None) => {}
            }
        } else {
            // Bounded window search: SAT-only, widening until the budget runs
            // out. Catches nonlinear dependences with unbounded symbols.
            let budget = (cfg.enum_bound as u128).saturating_mul(32);
            let mut spent: u128 = 0;
            let mut w: C = 1;
            loop {
                let mut ranges = Vec::with_capacity(base_ids.len());
                for id in &base_ids {
                    let (lo, hi) = original_iv.get(id).copied().unwrap_or((None, None));
                    let lo = lo.map_or(-w, |l| l.max(-w));
                    let hi = hi.map_or(w, |h| h.min(w));
                    ranges.push((lo, hi));
                }
                let size: u128 = ranges
                    .iter()
                    .map(|(lo, hi)| if hi < lo { 0 } else { (hi - lo) as u128 + 1 })
                    .product();
                if spent.saturating_add(size) > budget {
                    break;
                }
                spent += size;
                if size > 0 {
                    let mut found = None;
                    let stopped =
                        self.search_points(&vt, &base_ids, &ranges, cfg, &subs, &mut found);
                    match (stopped, found) {
                        (Walk::TimedOut, _) => return Outcome::TimedOut,
                        (_, Some(m)) => return Outcome::Sat(m),
                        _ => {}
                    }
                }
                w = match w.checked_mul(2) {
                    Some(next) => next,
                    None => break,
                };
            }
        }

        Outcome::Unknown
    }

    /// Evaluates the disjunct's own atoms at every grid point.
    fn search_points(
        &self,
        vt: &VarTable,
        ids: &[usize],
        ranges: &[(C, C)],
        cfg: &SolverConfig,
        subs: &[(usize, SubExpr)],
        found: &mut Option<Model>,
    ) -> Walk {
        let keys: Vec<VarKey> = ids
            .iter()
            .map(|&id| match &vt.defs[id] {
                VarDef::Base(k) => k.clone(),
                VarDef::Product(_) => unreachable!("search runs over base variables"),
            })
            .collect();
        for_each_point(ranges, cfg, &mut |point| {
            let mut look = |name: &str, tag: Option<u8>| -> i128 {
                keys.iter().position(|k| k.0 == name && k.1 == tag).map(|i| point[i]).unwrap_or(0)
            };
            let ok = self.atoms.iter().all(|a| eval_formula_with(a, &mut look) == Some(true));
            if ok {
                let vals: BTreeMap<usize, C> =
                    ids.iter().copied().zip(point.iter().copied()).collect();
                if let Some(m) = self.finish_model(vt, vals, subs) {
                    *found = Some(m);
                    return true;
                }
            }
            false
        })
    }
}

/// Back-substitution over the elimination stack: assigns variables in
/// reverse order, keeping each within the bounds its atoms allow.
fn extract(stack: &[(usize, Vec<LinAtom>)]) -> Option<BTreeMap<usize, C>> {
    let mut vals: BTreeMap<usize, C> = BTreeMap::new();
    for (v, atoms) in stack.iter().rev() {
        let mut lo: Option<C> = None;
        let mut hi: Option<C> = None;
        for a in atoms {
            let cv = a.coeffs[v];
            let mut rest = a.bias;
            for (&u, &cu) in &a.coeffs {
                if u == *v {
                    continue;
                }
                rest = rest.checked_add(cu.checked_mul(*vals.get(&u)?)?)?;
            }
            // cv*v <= -rest
            if cv > 0 {
                let b = fdiv(-rest, cv);
                hi = Some(hi.map_or(b, |old: C| old.min(b)));
            } else {
                let b = cdiv(-rest, cv);
                lo = Some(lo.map_or(b, |old: C| old.max(b)));
            }
        }
        let x = match (lo, hi) {
            (Some(l), Some(h)) if l <= h => l,
            (Some(_), Some(_)) => return None,
            (Some(l), None) => l,
            (None, Some(h)) => h,
            (None, None) => 0,
        };
        vals.insert(*v, x);
    }
    Some(vals)
}

/// Finite interval per variable, provided the domain product stays within
/// the enumeration bound. Endpoints outside i64 are treated as unbounded so
/// every enumerated value survives the model conversion.
fn finite_ranges(
    vars: &BTreeSet<usize>,
    iv: &BTreeMap<usize, (Option<C>, Option<C>)>,
    bound: u64,
) -> Option<Vec<(C, C)>> {
    let mut ranges = Vec::with_capacity(vars.len());
    let mut product: u128 = 1;
    for v in vars {
        let (lo, hi) = iv.get(v).copied().unwrap_or((None, None));
        let (lo, hi) = (lo?, hi?);
        if lo < i64::MIN as C || hi > i64::MAX as C {
            return None;
        }
        let size = if hi < lo { 0 } else { (hi - lo) as u128 + 1 };
        product = product.saturating_mul(size.max(1));
        if product > bound as u128 {
            return None;
        }
        ranges.push((lo, hi));
    }
    Some(ranges)
}

#[derive(PartialEq, Eq)]
enum Walk {
    Finished,
    Stopped,
    TimedOut,
}

/// Odometer over the grid; the visitor returns true to stop early.
fn for_each_point(
    ranges: &[(C, C)],
    cfg: &SolverConfig,
    visit: &mut dyn FnMut(&[C]) -> bool,
) -> Walk {
    if ranges.iter().any(|(lo, hi)| hi < lo) {
        return Walk::Finished;
    }
    let mut point: Vec<C> = ranges.iter().map(|(lo, _)| *lo).collect();
    let mut ticks: u32 = 0;
    loop {
        ticks = ticks.wrapping_add(1);
        if ticks.is_multiple_of(1024) && expired(cfg) {
            return Walk::TimedOut;
        }
        if visit(&point) {
            return Walk::Stopped;
        }
        let mut i = ranges.len();
        loop {
            if i == 0 {
                return Walk::Finished;
            }
            i -= 1;
            if point[i] < ranges[i].1 {
                point[i] += 1;
                for j in i + 1..ranges.len() {
                    point[j] = ranges[j].0;
                }
                break;
            }
        }
    }
}

fn rewrite_ne(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Cmp { op: CmpOp::Ne, lhs, rhs } => Formula::Or(vec![
            Formula::Cmp { op: CmpOp::Lt, lhs: lhs.clone(), rhs: rhs.clone() },
            Formula::Cmp { op: CmpOp::Gt, lhs: lhs.clone(), rhs: rhs.clone() },
        ]),
        Formula::Cmp { .. } => f.clone(),
        Formula::And(fs) => Formula::And(fs.iter().map(rewrite_ne).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(rewrite_ne).collect()),
    }
}

const DNF_LIMIT: usize = 10_000;

/// DNF as a list of conjunctions of comparison atoms; None past the guard.
fn to_dnf(f: &Formula) -> Option<Vec<Vec<Formula>>> {
    match f {
        Formula::True => Some(vec![Vec::new()]),
        Formula::False => Some(Vec::new()),
        Formula::Cmp { .. } => Some(vec![vec![f.clone()]]),
        Formula::Or(fs) => {
            let mut out = Vec::new();
            for g in fs {
                out.extend(to_dnf(g)?);
                if out.len() > DNF_LIMIT {
                    return None;
                }
            }
            Some(out)
        }
        Formula::And(fs) => {
            let mut out: Vec<Vec<Formula>> = vec![Vec::new()];
            for g in fs {
                let arms = to_dnf(g)?;
                let mut next = Vec::new();
                for base in &out {
                    for arm in &arms {
                        let mut merged = base.clone();
                        merged.extend(arm.iter().cloned());
                        next.push(merged);
                        if next.len() > DNF_LIMIT {
                            return None;
                        }
                    }
                }
                out = next;
            }
            Some(out)
        }
    }
}

/// Decides the formula. UNSAT is sound; SAT always carries a model verified
/// against the original formula; resource or expressiveness limits yield
/// UNKNOWN.
pub fn solve(f: &Formula, cfg: &SolverConfig) -> Result<SolveResult, ContractViolation> {
    check_mangling(f)?;
    if expired(cfg) {
        return Ok(SolveResult::Unknown);
    }
    let g = normalize(&rewrite_ne(&normalize(f)));
    let Some(dnf) = to_dnf(&g) else {
        return Ok(SolveResult::Unknown);
    };
    let mut any_unknown = false;
    for atoms in dnf {
        if expired(cfg) {
            return Ok(SolveResult::Unknown);
        }
        let d = Disjunct { atoms, original: f };
        match d.decide(cfg) {
            Outcome::Sat(m) => return Ok(SolveResult::Sat(m)),
            Outcome::Unsat => {}
            Outcome::Unknown => any_unknown = true,
            Outcome::TimedOut => return Ok(SolveResult::Unknown),
        }
    }
    Ok(if any_unknown { SolveResult::Unknown } else { SolveResult::Unsat })
}
