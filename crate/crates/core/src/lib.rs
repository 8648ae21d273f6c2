//! Analyses that decide which counted loops of a TAJ program can be run in
//! parallel.
//!
//! TAJ is a small three-address IR: functions hold flat statement lists,
//! parameters are bound by leading identity statements, and a local-variable
//! table records the statement ranges of named locals. The crate walks a
//! pipeline over every natural loop of every function:
//!
//! 1. [`canon`] checks the loop against the canonical shape
//!    `for (i = lb; i op bound; i += inc)`.
//! 2. [`scope`] computes the set of variables private to one iteration.
//! 3. [`scalardep`] rejects loops that write scalars or fields visible
//!    across iterations.
//! 4. [`heap`] supplies may-alias facts and function purity summaries.
//! 5. [`constraints`] builds an integer formula that is satisfiable exactly
//!    when two distinct iterations can touch the same array element.
//! 6. [`solver`] decides that formula; `UNSAT` means the loop is safe.
//! 7. [`annotate`] assembles the surviving loops into an annotation map
//!    keyed by function signature.
//!
//! The crate is `no_std` (it allocates, but performs no IO); parsing, file
//! formats, execution, and the CLI live in the companion `taj` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod annotate;
pub mod canon;
pub mod cfg;
pub mod constraints;
pub mod heap;
pub mod ir;
pub mod scalardep;
pub mod scope;
pub mod solver;

#[cfg(test)]
mod testfix;
