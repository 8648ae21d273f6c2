//! Scalar and field dependence screening.
//!
//! Writing a non-private scalar, a field, or a global inside a loop body is a
//! write-after-write dependence across iterations, so such loops are rejected
//! outright. Array element stores are left to the constraint stage, and reads
//! never reject.

use alloc::collections::BTreeSet;
use alloc::string::String;

use crate::canon::CanonicalLoop;
use crate::ir::{FunctionDef, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarCause {
    FieldWrite,
    GlobalWrite,
    NonlocalScalarWrite,
}

impl ScalarCause {
    pub fn code(self) -> &'static str {
        match self {
            ScalarCause::FieldWrite => "field-write",
            ScalarCause::GlobalWrite => "global-write",
            ScalarCause::NonlocalScalarWrite => "nonlocal-scalar-write",
        }
    }
}

/// The first offending write, in statement order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarReject {
    pub statement: usize,
    pub cause: ScalarCause,
}

pub fn check_scalars(
    f: &FunctionDef,
    info: &CanonicalLoop,
    locals: &BTreeSet<String>,
) -> Result<(), ScalarReject> {
    for &s in &info.body {
        let stmt = &f.statements[s];
        match &stmt.kind {
            StmtKind::FieldStore { .. } => {
                return Err(ScalarReject { statement: s, cause: ScalarCause::FieldWrite });
            }
            StmtKind::GlobalStore { .. } => {
                return Err(ScalarReject { statement: s, cause: ScalarCause::GlobalWrite });
            }
            StmtKind::ArrayStore { .. } => {}
            _ => {
                if let Some(target) = stmt.def_target() {
                    if !locals.contains(target) {
                        return Err(ScalarReject {
                            statement: s,
                            cause: ScalarCause::NonlocalScalarWrite,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
