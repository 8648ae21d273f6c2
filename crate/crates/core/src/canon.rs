//! Canonical counted-loop detection.
//!
//! A canonical loop has the layout
//!
//! ```text
//! init:    i := lb              (constant lower bound)
//! header:  if i CMP ub goto ... (the only exit)
//!          body...
//! upd:     i := i + inc         (constant positive increment)
//! back:    goto header
//! ```
//!
//! with a single back edge whose source is the last statement of the body,
//! no other writes to the iterator, and no branches leaving the body except
//! through the header. Everything else is rejected with a reason code.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cfg::{Cfg, NaturalLoop};
use crate::ir::{CmpOp, Expr, FunctionDef, Operand, StmtKind};

/// Why a natural loop is not canonical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// The back jump is not the unique last statement of the loop.
    BackJumpNotLast,
    /// The statement before the back jump does not assign a local.
    UpdNotAssignment,
    /// The iterator update writes to an array, field, or global.
    IterNotLocal,
    /// The statement before the header does not initialize the iterator.
    InitMismatch,
    /// The header is not a comparison of the iterator against a bound.
    CondUnsupported,
    /// The loop continues on `==` or `!=`.
    CompOpUnsupported,
    /// The update is not `i := i + c` with a positive constant.
    IncNotLinear,
    /// The lower bound or increment is not an integer constant.
    NonConstRequired,
    /// The body writes the iterator outside the update statement.
    IterModified,
    /// A body statement branches out of the loop.
    HasBreak,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::BackJumpNotLast => "backjump-not-last",
            RejectReason::UpdNotAssignment => "upd-not-assignment",
            RejectReason::IterNotLocal => "iter-not-local",
            RejectReason::InitMismatch => "init-mismatch",
            RejectReason::CondUnsupported => "cond-unsupported",
            RejectReason::CompOpUnsupported => "compop-unsupported",
            RejectReason::IncNotLinear => "inc-not-linear",
            RejectReason::NonConstRequired => "nonconst-required",
            RejectReason::IterModified => "iter-modified",
            RejectReason::HasBreak => "has-break",
        }
    }
}

/// A loop in canonical counted form. `cond_op` is the continue condition
/// normalized so the iterator sits on the left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalLoop {
    pub header: usize,
    /// Statement indices of the loop, sorted; `[header, back_jump_source]`.
    pub body: Vec<usize>,
    pub back_jump_source: usize,
    pub init_idx: usize,
    pub upd_idx: usize,
    pub iter: String,
    pub lb: i64,
    pub inc: i64,
    pub cond_op: CmpOp,
    /// Upper bound: a constant or a local read at the header.
    pub ub: Operand,
}

impl CanonicalLoop {
    pub fn contains(&self, stmt: usize) -> bool {
        self.body.binary_search(&stmt).is_ok()
    }
}

pub fn canonicalize(
    f: &FunctionDef,
    cfg: &Cfg,
    l: &NaturalLoop,
) -> Result<CanonicalLoop, RejectReason> {
    let header = l.header;
    let bjs = l.back_jump_source();
    let in_body = |s: usize| l.contains(s);

    if l.back_sources.len() > 1 || l.body.iter().any(|&s| s > bjs) {
        return Err(RejectReason::BackJumpNotLast);
    }

    let cond = match &f.statements[header].kind {
        StmtKind::IfGoto { cond, .. } => cond.clone(),
        _ => return Err(RejectReason::CondUnsupported),
    };
    let taken = match &f.statements[header].kind {
        StmtKind::IfGoto { target, .. } => *target,
        _ => unreachable!(),
    };

    for &s in &l.body {
        if s == header {
            continue;
        }
        if cfg.succs[s].iter().any(|&t| !in_body(t)) {
            return Err(RejectReason::HasBreak);
        }
    }

    if cfg.succs[header].iter().all(|&t| in_body(t)) {
        return Err(RejectReason::CondUnsupported);
    }

    // The statement before the back jump updates the iterator.
    if bjs <= header + 1 {
        return Err(RejectReason::UpdNotAssignment);
    }
    let upd_idx = bjs - 1;
    let upd = &f.statements[upd_idx];
    let iter = match &upd.kind {
        StmtKind::ArrayStore { .. }
        | StmtKind::FieldStore { .. }
        | StmtKind::GlobalStore { .. } => {
            return Err(RejectReason::IterNotLocal);
        }
        _ => match upd.def_target() {
            Some(t) => String::from(t),
            None => return Err(RejectReason::UpdNotAssignment),
        },
    };

    // The statement before the header initializes the iterator.
    if header == 0 {
        return Err(RejectReason::InitMismatch);
    }
    let init_idx = header - 1;
    if f.statements[init_idx].def_target() != Some(iter.as_str()) {
        return Err(RejectReason::InitMismatch);
    }
    let lb = match &f.statements[init_idx].kind {
        StmtKind::Assign { expr: Expr::Const(c), .. } => *c,
        _ => return Err(RejectReason::NonConstRequired),
    };

    // The update is a linear bump by a positive constant.
    let inc = match &upd.kind {
        StmtKind::Assign { expr: Expr::Bin(crate::ir::BinOp::Add, a, b), .. } => {
            let step = match (a, b) {
                (Operand::Local(x), o) | (o, Operand::Local(x)) if *x == iter => o,
                _ => return Err(RejectReason::IncNotLinear),
            };
            match step {
                Operand::Const(c) if *c > 0 => *c,
                Operand::Const(_) => return Err(RejectReason::IncNotLinear),
                Operand::Local(x) if *x == iter => return Err(RejectReason::IncNotLinear),
                Operand::Local(_) => return Err(RejectReason::NonConstRequired),
            }
        }
        _ => return Err(RejectReason::IncNotLinear),
    };

    // Normalize the continue condition: branch polarity first, then mirror
    // the comparison so the iterator is the left operand.
    let fallthrough = header + 1;
    let continue_op = match (in_body(taken), in_body(fallthrough)) {
        (true, false) => cond.op,
        (false, true) => cond.op.negate(),
        _ => return Err(RejectReason::CondUnsupported),
    };
    let lhs_is_iter = cond.lhs.as_local() == Some(iter.as_str());
    let rhs_is_iter = cond.rhs.as_local() == Some(iter.as_str());
    let (cond_op, ub) = match (lhs_is_iter, rhs_is_iter) {
        (true, false) => (continue_op, cond.rhs.clone()),
        (false, true) => (continue_op.flip(), cond.lhs.clone()),
        _ => return Err(RejectReason::CondUnsupported),
    };
    if matches!(cond_op, CmpOp::Eq | CmpOp::Ne) {
        return Err(RejectReason::CompOpUnsupported);
    }

    // Nothing else in the loop may write the iterator.
    for &s in &l.body {
        if s != upd_idx && f.statements[s].def_target() == Some(iter.as_str()) {
            return Err(RejectReason::IterModified);
        }
    }

    Ok(CanonicalLoop {
        header,
        body: l.body.clone(),
        back_jump_source: bjs,
        init_idx,
        upd_idx,
        iter,
        lb,
        inc,
        cond_op,
        ub,
    })
}

/// Every natural loop of `f` with its canonical form or rejection, sorted by
/// header index.
pub fn find_loops(f: &FunctionDef) -> Vec<(NaturalLoop, Result<CanonicalLoop, RejectReason>)> {
    let cfg = crate::cfg::build_cfg(f);
    let doms = crate::cfg::dominators(&cfg);
    crate::cfg::natural_loops(&cfg, &doms)
        .into_iter()
        .map(|l| {
            let r = canonicalize(f, &cfg, &l);
            (l, r)
        })
        .collect()
}
