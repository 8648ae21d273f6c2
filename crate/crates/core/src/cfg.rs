//! Control-flow graph, dominators, natural loops, and reaching definitions.
//!
//! Statements are the CFG nodes. An `if-goto` has two successors (fallthrough
//! first, branch target second), a `goto` has one, a `return` has none, and
//! every other statement falls through.

use alloc::vec;
use alloc::vec::Vec;

use crate::ir::{FunctionDef, StmtKind};

/// Dense bitset over statement indices.
#[derive(Clone, PartialEq, Eq)]
pub struct Bits {
    words: Vec<u64>,
}

impl Bits {
    pub fn empty(n: usize) -> Bits {
        Bits { words: vec![0; n.div_ceil(64)] }
    }

    pub fn full(n: usize) -> Bits {
        let mut b = Bits { words: vec![!0u64; n.div_ceil(64)] };
        let tail = n % 64;
        if tail != 0 {
            if let Some(last) = b.words.last_mut() {
                *last = (1u64 << tail) - 1;
            }
        }
        b
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn clear(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    /// `self &= other`; reports whether anything changed.
    pub fn intersect_with(&mut self, other: &Bits) -> bool {
        let mut changed = false;
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            let next = *w & o;
            changed |= next != *w;
            *w = next;
        }
        changed
    }

    /// `self |= other`; reports whether anything changed.
    pub fn union_with(&mut self, other: &Bits) -> bool {
        let mut changed = false;
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            let next = *w | o;
            changed |= next != *w;
            *w = next;
        }
        changed
    }

    pub fn difference_with(&mut self, other: &Bits) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w &= !o;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(wi, &w)| (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| wi * 64 + b))
    }
}

#[derive(Debug, Clone)]
pub struct Cfg {
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
    /// Reachable from statement 0.
    pub reachable: Vec<bool>,
}

impl Cfg {
    /// Builds predecessor lists and reachability from a successor map.
    pub fn from_succs(succs: Vec<Vec<usize>>) -> Cfg {
        let n = succs.len();
        let mut preds = vec![Vec::new(); n];
        for (s, outs) in succs.iter().enumerate() {
            for &t in outs {
                preds[t].push(s);
            }
        }
        let mut reachable = vec![false; n];
        let mut work = Vec::new();
        if n > 0 {
            reachable[0] = true;
            work.push(0);
        }
        while let Some(s) = work.pop() {
            for &t in &succs[s] {
                if !reachable[t] {
                    reachable[t] = true;
                    work.push(t);
                }
            }
        }
        Cfg { succs, preds, reachable }
    }

    pub fn len(&self) -> usize {
        self.succs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succs.is_empty()
    }
}

pub fn build_cfg(f: &FunctionDef) -> Cfg {
    let n = f.statements.len();
    let succs = f
        .statements
        .iter()
        .map(|s| match &s.kind {
            StmtKind::Goto { target } => vec![*target],
            StmtKind::IfGoto { target, .. } => {
                if s.index + 1 == *target {
                    vec![*target]
                } else {
                    vec![s.index + 1, *target]
                }
            }
            StmtKind::Return { .. } => vec![],
            _ => {
                if s.index + 1 < n {
                    vec![s.index + 1]
                } else {
                    vec![]
                }
            }
        })
        .collect();
    Cfg::from_succs(succs)
}

/// Dominator sets: `doms[s]` holds every statement that dominates `s`.
/// Unreachable statements keep the full set by convention.
pub fn dominators(cfg: &Cfg) -> Vec<Bits> {
    let n = cfg.len();
    let mut doms = vec![Bits::full(n); n];
    if n == 0 {
        return doms;
    }
    doms[0] = Bits::empty(n);
    doms[0].set(0);

    let mut changed = true;
    while changed {
        changed = false;
        for s in 1..n {
            if !cfg.reachable[s] {
                continue;
            }
            let mut next = Bits::full(n);
            for &p in &cfg.preds[s] {
                if cfg.reachable[p] {
                    next.intersect_with(&doms[p]);
                }
            }
            next.set(s);
            if next != doms[s] {
                doms[s] = next;
                changed = true;
            }
        }
    }
    doms
}

/// A natural loop. Loops sharing a header are merged, so each header appears
/// at most once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaturalLoop {
    pub header: usize,
    /// Statement indices in the loop, sorted; always contains the header.
    pub body: Vec<usize>,
    /// Sources of the back edges into the header, sorted.
    pub back_sources: Vec<usize>,
}

impl NaturalLoop {
    /// The statement whose jump closes the loop; with several back edges,
    /// the last one in layout order.
    pub fn back_jump_source(&self) -> usize {
        *self.back_sources.last().expect("loop has a back edge")
    }

    pub fn contains(&self, stmt: usize) -> bool {
        self.body.binary_search(&stmt).is_ok()
    }
}

/// Finds every natural loop, merging loops that share a header. Sorted by
/// header index.
pub fn natural_loops(cfg: &Cfg, doms: &[Bits]) -> Vec<NaturalLoop> {
    let n = cfg.len();
    let mut loops: Vec<NaturalLoop> = Vec::new();

    for (s, dom) in doms.iter().enumerate() {
        if !cfg.reachable[s] {
            continue;
        }
        for &h in &cfg.succs[s] {
            if !dom.get(h) {
                continue;
            }
            // Back edge s -> h: collect nodes reaching s without passing h.
            let mut body = Bits::empty(n);
            body.set(h);
            let mut work = Vec::new();
            if !body.get(s) {
                body.set(s);
                work.push(s);
            }
            while let Some(x) = work.pop() {
                for &p in &cfg.preds[x] {
                    if cfg.reachable[p] && !body.get(p) {
                        body.set(p);
                        work.push(p);
                    }
                }
            }
            let members: Vec<usize> = body.iter().collect();
            match loops.iter_mut().find(|l| l.header == h) {
                Some(l) => {
                    let mut merged: Vec<usize> = l.body.iter().copied().chain(members).collect();
                    merged.sort_unstable();
                    merged.dedup();
                    l.body = merged;
                    if !l.back_sources.contains(&s) {
                        l.back_sources.push(s);
                        l.back_sources.sort_unstable();
                    }
                }
                None => loops.push(NaturalLoop { header: h, body: members, back_sources: vec![s] }),
            }
        }
    }
    loops.sort_by_key(|l| l.header);
    loops
}

/// Reaching definitions: for each statement, the set of definition sites
/// whose values may still be live on entry.
pub struct ReachingDefs {
    in_sets: Vec<Bits>,
}

impl ReachingDefs {
    /// Definition statements of `var` that reach the entry of `at`, sorted.
    pub fn defs_of(&self, f: &FunctionDef, var: &str, at: usize) -> Vec<usize> {
        self.in_sets[at].iter().filter(|&d| f.statements[d].def_target() == Some(var)).collect()
    }
}

pub fn reaching_defs(f: &FunctionDef, cfg: &Cfg) -> ReachingDefs {
    let n = f.statements.len();
    let mut gen = vec![Bits::empty(n); n];
    let mut kill = vec![Bits::empty(n); n];
    for s in &f.statements {
        if let Some(var) = s.def_target() {
            gen[s.index].set(s.index);
            for other in &f.statements {
                if other.index != s.index && other.def_target() == Some(var) {
                    kill[s.index].set(other.index);
                }
            }
        }
    }

    let mut in_sets = vec![Bits::empty(n); n];
    let mut out_sets = vec![Bits::empty(n); n];
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if !cfg.reachable[s] {
                continue;
            }
            let mut inn = Bits::empty(n);
            for &p in &cfg.preds[s] {
                inn.union_with(&out_sets[p]);
            }
            let mut out = inn.clone();
            out.difference_with(&kill[s]);
            out.union_with(&gen[s]);
            if inn != in_sets[s] || out != out_sets[s] {
                in_sets[s] = inn;
                out_sets[s] = out;
                changed = true;
            }
        }
    }
    ReachingDefs { in_sets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::*;
    use alloc::borrow::ToOwned;

    fn graph(succs: &[&[usize]]) -> Cfg {
        Cfg::from_succs(succs.iter().map(|s| s.to_vec()).collect())
    }

    /// d dominates t iff t is unreachable from the entry once d is removed.
    fn dominates_oracle(cfg: &Cfg, d: usize, t: usize) -> bool {
        if d == t {
            return true;
        }
        if d == 0 {
            return true;
        }
        let mut seen = vec![false; cfg.len()];
        let mut work = vec![0usize];
        seen[0] = true;
        while let Some(s) = work.pop() {
            if s == d {
                continue;
            }
            for &x in &cfg.succs[s] {
                if !seen[x] {
                    seen[x] = true;
                    if x != d {
                        work.push(x);
                    }
                }
            }
        }
        !seen[t]
    }

    fn check_against_oracle(cfg: &Cfg) {
        let doms = dominators(cfg);
        for (t, dom) in doms.iter().enumerate() {
            if !cfg.reachable[t] {
                continue;
            }
            for d in 0..cfg.len() {
                if !cfg.reachable[d] {
                    continue;
                }
                assert_eq!(
                    dom.get(d),
                    dominates_oracle(cfg, d, t),
                    "dominance of {d} over {t} disagrees with oracle"
                );
            }
        }
    }

    #[test]
    fn dominators_match_oracle_on_diamond() {
        // 0 -> 1, 2; 1 -> 3; 2 -> 3; 3 -> (end)
        check_against_oracle(&graph(&[&[1, 2], &[3], &[3], &[]]));
    }

    #[test]
    fn dominators_match_oracle_on_loop() {
        // 0 -> 1; 1 -> 2, 4; 2 -> 3; 3 -> 1; 4 -> (end)
        check_against_oracle(&graph(&[&[1], &[2, 4], &[3], &[1], &[]]));
    }

    #[test]
    fn dominators_match_oracle_on_random_graphs() {
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            state = state.wrapping_mul(0x2545F4914F6CDD1D);
            state
        };
        for _ in 0..200 {
            let n = 2 + (next() % 14) as usize;
            let succs: Vec<Vec<usize>> = (0..n)
                .map(|_| match next() % 4 {
                    0 => vec![],
                    1 => vec![(next() % n as u64) as usize],
                    _ => vec![(next() % n as u64) as usize, (next() % n as u64) as usize],
                })
                .collect();
            check_against_oracle(&Cfg::from_succs(succs));
        }
    }

    #[test]
    fn loops_with_shared_header_merge() {
        // Two back edges into header 1: 3 -> 1 and 5 -> 1.
        let cfg = graph(&[&[1], &[2, 6], &[3, 4], &[1], &[5], &[1], &[]]);
        let doms = dominators(&cfg);
        let loops = natural_loops(&cfg, &doms);
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].header, 1);
        assert_eq!(loops[0].back_sources, vec![3, 5]);
        assert_eq!(loops[0].back_jump_source(), 5);
        assert_eq!(loops[0].body, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn nested_loops_keep_separate_headers() {
        // Outer header 1, inner header 2.
        let cfg = graph(&[&[1], &[2, 6], &[3, 5], &[4], &[2], &[1], &[]]);
        let doms = dominators(&cfg);
        let loops = natural_loops(&cfg, &doms);
        assert_eq!(loops.len(), 2);
        assert_eq!(loops[0].header, 1);
        assert_eq!(loops[0].body, vec![1, 2, 3, 4, 5]);
        assert_eq!(loops[1].header, 2);
        assert_eq!(loops[1].body, vec![2, 3, 4]);
    }

    fn local(name: &str) -> Operand {
        Operand::Local(name.to_owned())
    }

    fn assign(index: usize, target: &str, expr: Expr) -> Statement {
        Statement { index, kind: StmtKind::Assign { target: target.to_owned(), expr } }
    }

    /// i := 0; loop { if i >= 3 exit; i := i + 1; goto header }; return i
    fn counting_fn() -> FunctionDef {
        FunctionDef {
            name: "count".to_owned(),
            params: vec![],
            ret: RetKind::Value(Kind::Int),
            local_table: vec![LocalVarEntry {
                name: "i".to_owned(),
                kind: Kind::Int,
                slot: 0,
                start_idx: 1,
                length: 4,
            }],
            statements: vec![
                assign(0, "i", Expr::Const(0)),
                Statement {
                    index: 1,
                    kind: StmtKind::IfGoto {
                        cond: CondExpr { lhs: local("i"), op: CmpOp::Ge, rhs: Operand::Const(3) },
                        target: 4,
                    },
                },
                assign(2, "i", Expr::Bin(BinOp::Add, local("i"), Operand::Const(1))),
                Statement { index: 3, kind: StmtKind::Goto { target: 1 } },
                Statement { index: 4, kind: StmtKind::Return { value: Some(local("i")) } },
            ],
        }
    }

    #[test]
    fn reaching_defs_on_counting_loop() {
        let f = counting_fn();
        let cfg = build_cfg(&f);
        let rd = reaching_defs(&f, &cfg);
        // At the header both the init and the increment can reach.
        assert_eq!(rd.defs_of(&f, "i", 1), vec![0, 2]);
        // Inside the body the same two defs are live on entry to stmt 2.
        assert_eq!(rd.defs_of(&f, "i", 2), vec![0, 2]);
        // At the exit, too, since the loop may run zero times.
        assert_eq!(rd.defs_of(&f, "i", 4), vec![0, 2]);
    }

    #[test]
    fn reaching_defs_straight_line_kills() {
        let f = FunctionDef {
            name: "g".to_owned(),
            params: vec![],
            ret: RetKind::Value(Kind::Int),
            local_table: vec![LocalVarEntry {
                name: "x".to_owned(),
                kind: Kind::Int,
                slot: 0,
                start_idx: 1,
                length: 2,
            }],
            statements: vec![
                assign(0, "x", Expr::Const(1)),
                assign(1, "x", Expr::Const(2)),
                Statement { index: 2, kind: StmtKind::Return { value: Some(local("x")) } },
            ],
        };
        let cfg = build_cfg(&f);
        let rd = reaching_defs(&f, &cfg);
        assert_eq!(rd.defs_of(&f, "x", 1), vec![0]);
        assert_eq!(rd.defs_of(&f, "x", 2), vec![1]);
    }

    #[test]
    fn counting_loop_detected() {
        let f = counting_fn();
        let cfg = build_cfg(&f);
        let doms = dominators(&cfg);
        let loops = natural_loops(&cfg, &doms);
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].header, 1);
        assert_eq!(loops[0].body, vec![1, 2, 3]);
        assert_eq!(loops[0].back_jump_source(), 3);
    }
}
