//! Loop-local variable inference.
//!
//! A variable is private to a canonical loop when its whole live range sits
//! inside the loop's extent, from the init statement up to and including the
//! update. `$`-temporaries are always private; parameters never are.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::canon::CanonicalLoop;
use crate::ir::FunctionDef;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScopeError {
    /// A non-`$` local referenced in the loop has no local-table entry.
    UntabledLocal(String),
}

impl core::fmt::Display for ScopeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ScopeError::UntabledLocal(name) => write!(f, "untabled local `{name}`"),
        }
    }
}

/// Whether `v` is private to the loop.
pub fn is_local(f: &FunctionDef, info: &CanonicalLoop, v: &str) -> Result<bool, ScopeError> {
    if v.starts_with('$') {
        return Ok(true);
    }
    if f.is_param(v) {
        return Ok(false);
    }
    match f.lookup_local_entry(v) {
        Some(e) => Ok(e.start_idx >= info.init_idx && e.end_idx() <= info.upd_idx + 1),
        None => Err(ScopeError::UntabledLocal(String::from(v))),
    }
}

/// The set of names private to the loop: every tabled local whose range fits
/// and every temporary referenced in the body.
pub fn get_local_vars(
    f: &FunctionDef,
    info: &CanonicalLoop,
) -> Result<BTreeSet<String>, ScopeError> {
    let mut names = BTreeSet::new();
    for e in &f.local_table {
        if is_local(f, info, &e.name)? {
            names.insert(e.name.clone());
        }
    }
    for &s in &info.body {
        let stmt = &f.statements[s];
        let mut referenced: Vec<&str> = stmt.uses();
        if let Some(d) = stmt.def_target() {
            referenced.push(d);
        }
        for name in referenced {
            if is_local(f, info, name)? {
                names.insert(String::from(name));
            }
        }
    }
    Ok(names)
}
