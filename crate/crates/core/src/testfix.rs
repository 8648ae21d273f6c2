//! Shared hand-built fixtures for unit tests.

use alloc::borrow::ToOwned;
use alloc::vec;

use crate::ir::*;

fn local(name: &str) -> Operand {
    Operand::Local(name.to_owned())
}

fn stmt(index: usize, kind: StmtKind) -> Statement {
    Statement { index, kind }
}

/// The two-parameter scaled-copy listing: a ten-statement function with one
/// counted loop reading `x[i]`, scaling by `a`, and writing `y[i]`. `a` and
/// `n` are whole-function locals, so only `i` and the temporaries are private
/// to the loop.
pub(crate) fn saxpy_listing() -> FunctionDef {
    FunctionDef {
        name: "saxpy".to_owned(),
        params: vec![
            Param { name: "x".to_owned(), kind: Kind::ArrayReal },
            Param { name: "y".to_owned(), kind: Kind::ArrayReal },
        ],
        ret: RetKind::Void,
        local_table: vec![
            LocalVarEntry {
                name: "i".to_owned(),
                kind: Kind::Int,
                slot: 1,
                start_idx: 2,
                length: 5,
            },
            LocalVarEntry {
                name: "a".to_owned(),
                kind: Kind::Real,
                slot: 2,
                start_idx: 0,
                length: 10,
            },
            LocalVarEntry {
                name: "n".to_owned(),
                kind: Kind::Int,
                slot: 3,
                start_idx: 0,
                length: 10,
            },
        ],
        statements: vec![
            stmt(0, StmtKind::Identity { target: "x".to_owned(), param: 0 }),
            stmt(1, StmtKind::Identity { target: "y".to_owned(), param: 1 }),
            stmt(2, StmtKind::Assign { target: "i".to_owned(), expr: Expr::Const(0) }),
            stmt(
                3,
                StmtKind::IfGoto {
                    cond: CondExpr { lhs: local("i"), op: CmpOp::Ge, rhs: local("n") },
                    target: 9,
                },
            ),
            stmt(
                4,
                StmtKind::ArrayLoad {
                    target: "$t0".to_owned(),
                    base: "x".to_owned(),
                    index: local("i"),
                },
            ),
            stmt(
                5,
                StmtKind::Assign {
                    target: "$t1".to_owned(),
                    expr: Expr::Bin(BinOp::Mul, local("$t0"), local("a")),
                },
            ),
            stmt(
                6,
                StmtKind::ArrayStore {
                    base: "y".to_owned(),
                    index: local("i"),
                    value: local("$t1"),
                },
            ),
            stmt(
                7,
                StmtKind::Assign {
                    target: "i".to_owned(),
                    expr: Expr::Bin(BinOp::Add, local("i"), Operand::Const(1)),
                },
            ),
            stmt(8, StmtKind::Goto { target: 3 }),
            stmt(9, StmtKind::Return { value: None }),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{build_cfg, reaching_defs};

    #[test]
    fn listing_is_valid() {
        let p = Program { globals: vec![], functions: vec![saxpy_listing()], entry: None };
        assert_eq!(crate::ir::validate_program(&p), vec![]);
    }

    #[test]
    fn listing_cfg_facts() {
        let f = saxpy_listing();
        let cfg = build_cfg(&f);
        assert_eq!(cfg.succs[3], vec![4, 9]);
        let rd = reaching_defs(&f, &cfg);
        assert_eq!(rd.defs_of(&f, "i", 4), vec![2, 7]);
    }

    #[test]
    fn listing_loop_facts() {
        let loops = crate::canon::find_loops(&saxpy_listing());
        assert_eq!(loops.len(), 1);
        let (l, c) = &loops[0];
        assert_eq!(l.header, 3);
        assert_eq!(l.back_jump_source(), 8);
        let c = c.as_ref().expect("canonical");
        assert_eq!(c.iter, "i");
        assert_eq!(c.lb, 0);
        assert_eq!(c.inc, 1);
        assert_eq!(c.cond_op, crate::ir::CmpOp::Lt);
        assert_eq!(c.ub, Operand::Local("n".to_owned()));
    }

    #[test]
    fn lookup_local_entry_facts() {
        let f = saxpy_listing();
        let i = f.lookup_local_entry("i").expect("tabled");
        assert_eq!((i.slot, i.start_idx, i.length), (1, 2, 5));
        assert!(f.lookup_local_entry("$t0").is_none());
        assert!(f.lookup_local_entry("nosuch").is_none());
    }
}
