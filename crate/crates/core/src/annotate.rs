//! Verdict assembly: runs the whole per-loop pipeline and collects the
//! annotation map handed to the executor.
//!
//! Each natural loop passes through canonical-form detection, loop-scope
//! inference, scalar and heap dependence checks, call purity, constraint
//! generation, and the solver. The first failing stage is recorded; a loop is
//! annotated only when its dependence formula is unsatisfiable.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::canon::{find_loops, CanonicalLoop};
use crate::cfg::{build_cfg, reaching_defs};
use crate::constraints::loop_c;
use crate::heap::{compute_points_to, compute_purity, loop_calls_ok, PointsTo, Purity};
use crate::ir::{FunctionDef, Program};
use crate::scalardep::check_scalars;
use crate::scope::{get_local_vars, is_local};
use crate::solver::{classify, solve, SolverConfig};

/// Where the iteration variable of a parallelizable loop lives: the `start`,
/// `length`, and frame `slot` of its local-table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Annotation {
    pub start: usize,
    pub length: usize,
    pub slot: u32,
}

/// Function signature to the annotations of its parallelizable loops. Lists
/// are sorted by start and never repeat a (start, slot) pair.
pub type AnnotationMap = BTreeMap<String, Vec<Annotation>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Parallel,
    Rejected,
}

/// The pipeline stage that settled a loop's verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Canon,
    Scope,
    Scalar,
    Purity,
    Constraints,
    Solver,
}

impl Stage {
    pub fn text(self) -> &'static str {
        match self {
            Stage::Canon => "canon",
            Stage::Scope => "scope",
            Stage::Scalar => "scalar",
            Stage::Purity => "purity",
            Stage::Constraints => "constraints",
            Stage::Solver => "solver",
        }
    }
}

/// One line of diagnostics per natural loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopReport {
    pub signature: String,
    pub header: usize,
    pub verdict: Verdict,
    pub stage: Stage,
    pub detail: String,
}

impl LoopReport {
    fn rejected(signature: &str, header: usize, stage: Stage, detail: String) -> LoopReport {
        LoopReport {
            signature: signature.to_string(),
            header,
            verdict: Verdict::Rejected,
            stage,
            detail,
        }
    }
}

/// Runs the pipeline over every natural loop of `f`, in header order. The
/// returned annotations are sorted by start.
pub fn analyze_function(
    p: &Program,
    f: &FunctionDef,
    pt: &PointsTo,
    purity: &BTreeMap<String, Purity>,
    cfg: &SolverConfig,
) -> (Vec<LoopReport>, Vec<Annotation>) {
    let sig = f.signature();
    let graph = build_cfg(f);
    let defs = reaching_defs(f, &graph);
    let loops = find_loops(f);
    let canonical: Vec<CanonicalLoop> =
        loops.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()).collect();

    let mut reports = Vec::new();
    let mut annotations: Vec<Annotation> = Vec::new();
    for (l, outcome) in &loops {
        let header = l.header;
        let info = match outcome {
            Ok(info) => info,
            Err(r) => {
                reports.push(LoopReport::rejected(
                    &sig,
                    header,
                    Stage::Canon,
                    r.code().to_string(),
                ));
                continue;
            }
        };

        let entry = match f.lookup_local_entry(&info.iter) {
            Some(e) => e,
            None => {
                let detail = format!("iterator `{}` has no local-table entry", info.iter);
                reports.push(LoopReport::rejected(&sig, header, Stage::Scope, detail));
                continue;
            }
        };
        match is_local(f, info, &info.iter) {
            Ok(true) => {}
            Ok(false) => {
                let detail = format!("iterator `{}` is not loop-local", info.iter);
                reports.push(LoopReport::rejected(&sig, header, Stage::Scope, detail));
                continue;
            }
            Err(e) => {
                reports.push(LoopReport::rejected(&sig, header, Stage::Scope, e.to_string()));
                continue;
            }
        }
        let locals = match get_local_vars(f, info) {
            Ok(locals) => locals,
            Err(e) => {
                reports.push(LoopReport::rejected(&sig, header, Stage::Scope, e.to_string()));
                continue;
            }
        };

        if let Err(r) = check_scalars(f, info, &locals) {
            let detail = format!("{} at statement {}", r.cause.code(), r.statement);
            reports.push(LoopReport::rejected(&sig, header, Stage::Scalar, detail));
            continue;
        }

        if !loop_calls_ok(p, f, info, purity) {
            let detail = String::from("loop body calls an impure or external function");
            reports.push(LoopReport::rejected(&sig, header, Stage::Purity, detail));
            continue;
        }

        let alias = |a: &str, b: &str| pt.may_alias(&f.name, a, b);
        let formula = match loop_c(f, info, &canonical, &locals, &defs, &alias) {
            Ok(formula) => formula,
            Err(u) => {
                let detail = format!("unsupported index definition at statement {}", u.statement);
                reports.push(LoopReport::rejected(&sig, header, Stage::Constraints, detail));
                continue;
            }
        };

        let result = match solve(&formula, cfg) {
            Ok(result) => result,
            Err(v) => {
                reports.push(LoopReport::rejected(&sig, header, Stage::Solver, v.to_string()));
                continue;
            }
        };
        if !classify(&result) {
            reports.push(LoopReport::rejected(
                &sig,
                header,
                Stage::Solver,
                result.status_text().to_string(),
            ));
            continue;
        }

        reports.push(LoopReport {
            signature: sig.clone(),
            header,
            verdict: Verdict::Parallel,
            stage: Stage::Solver,
            detail: String::from("UNSAT"),
        });
        let a = Annotation { start: entry.start_idx, length: entry.length, slot: entry.slot };
        if !annotations.contains(&a) {
            annotations.push(a);
        }
    }
    annotations.sort();
    (reports, annotations)
}

/// Analyzes every function of the program and assembles the annotation map.
/// Functions without parallelizable loops are left out of the map.
pub fn analyze_program(p: &Program, cfg: &SolverConfig) -> (Vec<LoopReport>, AnnotationMap) {
    let pt = compute_points_to(p);
    let purity = compute_purity(p, &pt);
    let mut reports = Vec::new();
    let mut map = AnnotationMap::new();
    for f in &p.functions {
        let (rs, annotations) = analyze_function(p, f, &pt, &purity, cfg);
        reports.extend(rs);
        if !annotations.is_empty() {
            map.insert(f.signature(), annotations);
        }
    }
    (reports, map)
}
