//! Orchestration shared by the command-line tool and the test harness:
//! analysis with wall-clock budgets, report formatting, argument-file
//! decoding, per-loop SMT-LIB script generation, and the summary table.

use std::time::{Duration, Instant};

use serde_json::Value as Json;
use taj_core::annotate::{analyze_program, AnnotationMap, LoopReport, Verdict};
use taj_core::canon::{find_loops, CanonicalLoop};
use taj_core::cfg::{build_cfg, reaching_defs};
use taj_core::constraints::loop_c;
use taj_core::heap::compute_points_to;
use taj_core::ir::{FunctionDef, Kind, Program};
use taj_core::scope::get_local_vars;
use taj_core::solver::{emit_smtlib, SolverConfig};

use crate::annotmap;
use crate::exec::ArgValue;

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    pub enum_bound: u64,
    pub timeout_millis: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { enum_bound: 4096, timeout_millis: 5000 }
    }
}

/// Runs the full analysis under a wall-clock budget; once the budget is
/// spent, remaining solver calls settle as UNKNOWN and the loops they guard
/// stay sequential.
pub fn analyze(p: &Program, opts: &AnalyzeOptions) -> (Vec<LoopReport>, AnnotationMap) {
    let deadline = Instant::now() + Duration::from_millis(opts.timeout_millis);
    let expired = move || Instant::now() >= deadline;
    let cfg = SolverConfig { enum_bound: opts.enum_bound, deadline: Some(&expired) };
    analyze_program(p, &cfg)
}

pub fn format_report(r: &LoopReport) -> String {
    match r.verdict {
        Verdict::Parallel => format!("{} loop@{}: parallel", r.signature, r.header),
        Verdict::Rejected => {
            format!("{} loop@{}: rejected [{}] {}", r.signature, r.header, r.stage.text(), r.detail)
        }
    }
}

/// Decodes a JSON array of argument values against the parameter kinds of
/// the entry function.
pub fn decode_args(f: &FunctionDef, json: &str) -> Result<Vec<ArgValue>, String> {
    let parsed: Json =
        serde_json::from_str(json).map_err(|e| format!("malformed argument file: {e}"))?;
    let Json::Array(items) = parsed else {
        return Err(String::from("the argument file must hold a JSON array"));
    };
    if items.len() != f.params.len() {
        return Err(format!(
            "`{}` takes {} arguments, the file holds {}",
            f.name,
            f.params.len(),
            items.len()
        ));
    }
    let mut out = Vec::with_capacity(items.len());
    for (k, (param, item)) in f.params.iter().zip(&items).enumerate() {
        let fail = |found: &str| {
            Err(format!(
                "argument {k} (`{}`): expected {}, found {found}",
                param.name,
                param.kind.text()
            ))
        };
        let v = match param.kind {
            Kind::Int => match item.as_i64() {
                Some(v) => ArgValue::I(v),
                None => return fail(&item.to_string()),
            },
            Kind::Real => match item.as_f64() {
                Some(x) => ArgValue::R(x),
                None => return fail(&item.to_string()),
            },
            Kind::ArrayInt => match item.as_array() {
                Some(list) => {
                    let mut vs = Vec::with_capacity(list.len());
                    for e in list {
                        match e.as_i64() {
                            Some(v) => vs.push(v),
                            None => return fail(&format!("array holding {e}")),
                        }
                    }
                    ArgValue::AInt(vs)
                }
                None => return fail(&item.to_string()),
            },
            Kind::ArrayReal => match item.as_array() {
                Some(list) => {
                    let mut vs = Vec::with_capacity(list.len());
                    for e in list {
                        match e.as_f64() {
                            Some(x) => vs.push(x),
                            None => return fail(&format!("array holding {e}")),
                        }
                    }
                    ArgValue::AReal(vs)
                }
                None => return fail(&item.to_string()),
            },
            Kind::Object => return fail("objects cannot be passed from a file"),
        };
        out.push(v);
    }
    Ok(out)
}

/// What `emit-smt` produces for one natural loop.
pub enum SmtOutcome {
    Script(String),
    Skipped(String),
}

/// One entry per natural loop of the program, in (function, header) order,
/// named `<function>_loop<header>.smt2`. Loops whose dependence formula
/// cannot be generated are skipped with the blocking reason.
pub fn smt_scripts(p: &Program) -> Vec<(String, SmtOutcome)> {
    let pt = compute_points_to(p);
    let mut out = Vec::new();
    for f in &p.functions {
        let graph = build_cfg(f);
        let defs = reaching_defs(f, &graph);
        let loops = find_loops(f);
        let canonical: Vec<CanonicalLoop> =
            loops.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()).collect();
        for (l, found) in &loops {
            let file = format!("{}_loop{}.smt2", f.name, l.header);
            let outcome = match found {
                Err(r) => SmtOutcome::Skipped(format!("not canonical ({})", r.code())),
                Ok(info) => match get_local_vars(f, info) {
                    Err(e) => SmtOutcome::Skipped(e.to_string()),
                    Ok(locals) => {
                        let alias = |a: &str, b: &str| pt.may_alias(&f.name, a, b);
                        match loop_c(f, info, &canonical, &locals, &defs, &alias) {
                            Err(u) => SmtOutcome::Skipped(format!(
                                "unsupported index definition at statement {}",
                                u.statement
                            )),
                            Ok(formula) => match emit_smtlib(&formula) {
                                Ok(script) => SmtOutcome::Script(script),
                                Err(v) => SmtOutcome::Skipped(v.to_string()),
                            },
                        }
                    }
                },
            };
            out.push((file, outcome));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub name: String,
    pub loops: usize,
    pub id: usize,
    pub analysis_ms: u128,
    pub map_bytes: usize,
}

pub const REPORT_HEADER: &str = "name\tloops\tid\tanalysis_ms\tmap_bytes";

pub fn report_row(name: &str, p: &Program, opts: &AnalyzeOptions) -> ReportRow {
    let begun = Instant::now();
    let (reports, map) = analyze(p, opts);
    let analysis_ms = begun.elapsed().as_millis();
    ReportRow {
        name: String::from(name),
        loops: reports.len(),
        id: map.values().map(Vec::len).sum(),
        analysis_ms,
        map_bytes: annotmap::to_json(&map).len(),
    }
}

pub fn format_row(r: &ReportRow) -> String {
    format!("{}\t{}\t{}\t{}\t{}", r.name, r.loops, r.id, r.analysis_ms, r.map_bytes)
}
