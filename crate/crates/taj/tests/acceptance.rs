//! Acceptance suite: one test per shipping requirement, each running end to
//! end over the bundled corpus. The corpus lives in `tests/corpus`, golden
//! outputs in `tests/golden`, and the scaled workload in `tests/big`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use taj::annotmap;
use taj::driver::{analyze, smt_scripts, AnalyzeOptions, SmtOutcome};
use taj::exec::{
    annotated_loops, conflict_oracle, interpret, run_parallel, run_shuffled, ArgValue, ExecConfig,
    RunResult,
};
use taj::text::parse_program;
use taj_core::annotate::{LoopReport, Stage, Verdict};
use taj_core::heap::{compute_points_to, compute_purity};
use taj_core::ir::Program;

const CORPUS: &[(&str, &str)] = &[
    ("array_sq", include_str!("corpus/array_sq.taj")),
    ("conv2d", include_str!("corpus/conv2d.taj")),
    ("deptest", include_str!("corpus/deptest.taj")),
    ("euler", include_str!("corpus/euler.taj")),
    ("fdtd", include_str!("corpus/fdtd.taj")),
    ("gseidel2d", include_str!("corpus/gseidel2d.taj")),
    ("hilbert", include_str!("corpus/hilbert.taj")),
    ("jacobi1d", include_str!("corpus/jacobi1d.taj")),
    ("jacobi2d", include_str!("corpus/jacobi2d.taj")),
    ("matmul2d", include_str!("corpus/matmul2d.taj")),
    ("mattranspose", include_str!("corpus/mattranspose.taj")),
    ("montecarlo", include_str!("corpus/montecarlo.taj")),
    ("purity_cases", include_str!("corpus/purity_cases.taj")),
    ("rejections", include_str!("corpus/rejections.taj")),
    ("saxpy", include_str!("corpus/saxpy.taj")),
    ("scalar_writes", include_str!("corpus/scalar_writes.taj")),
    ("scaled_store", include_str!("corpus/scaled_store.taj")),
    ("swap", include_str!("corpus/swap.taj")),
];

/// Ground truth: every corpus loop whose iterations are independent, found
/// by inspecting the memory each iteration touches. Rows are (file,
/// function, header statement). The analysis must never identify a loop
/// outside this set; the recall check measures how many it finds.
///
/// Two entries rely on reasoning the analysis cannot reproduce: montecarlo's
/// fill calls an external generator documented as a pure function of its
/// argument, and conv2d's outer loop hands each iteration a distinct row of
/// the destination array through a callee.
const CURATED: &[(&str, &str, usize)] = &[
    ("array_sq", "array_sq", 3),
    ("conv2d", "conv_row", 5),
    ("conv2d", "conv2d", 3),
    ("conv2d", "main", 7),
    ("deptest", "deptest", 3),
    ("euler", "euler", 4),
    ("euler", "main", 7),
    ("fdtd", "fdtd_e", 3),
    ("fdtd", "fdtd_h", 3),
    ("fdtd", "main", 7),
    ("gseidel2d", "main", 5),
    ("hilbert", "hilbert", 4),
    ("hilbert", "hilbert", 6),
    ("jacobi1d", "jacobi1d", 3),
    ("jacobi1d", "jacobi1d", 15),
    ("jacobi1d", "main", 7),
    ("jacobi2d", "jacobi2d", 3),
    ("jacobi2d", "jacobi2d", 5),
    ("jacobi2d", "jacobi2d", 27),
    ("jacobi2d", "jacobi2d", 29),
    ("jacobi2d", "main", 7),
    ("matmul2d", "matmul", 4),
    ("matmul2d", "matmul", 7),
    ("matmul2d", "main", 9),
    ("mattranspose", "transpose", 3),
    ("mattranspose", "transpose", 6),
    ("mattranspose", "main", 7),
    ("montecarlo", "mc_fill", 3),
    ("saxpy", "saxpy", 5),
    ("scaled_store", "scaled_store", 2),
];

fn corpus_src(file: &str) -> &'static str {
    CORPUS
        .iter()
        .find(|(name, _)| *name == file)
        .unwrap_or_else(|| panic!("no corpus file named {file}"))
        .1
}

fn program(src: &str) -> Program {
    parse_program(src).expect("corpus file parses")
}

fn func_name(signature: &str) -> &str {
    &signature[..signature.find('(').expect("signature has a parameter list")]
}

fn all_reports() -> Vec<(&'static str, LoopReport)> {
    let mut out = Vec::new();
    for &(file, src) in CORPUS {
        let (reports, _) = analyze(&program(src), &AnalyzeOptions::default());
        out.extend(reports.into_iter().map(|r| (file, r)));
    }
    out
}

const SCALARS: [i64; 10] = [0, 1, 2, 3, 5, 7, 11, 64, 100, -5];

/// Arguments for a corpus entry point; `variant` varies the inputs so the
/// dynamic checks do not hinge on one lucky dataset. Closed drivers take a
/// single seed scalar, open kernels get arrays sized to their access ranges.
fn corpus_args(file: &str, variant: usize) -> Vec<ArgValue> {
    let v = variant as i64;
    match file {
        "saxpy" => {
            let x: Vec<f64> = (0..48).map(|k| ((k * 7 + v * 13) % 17) as f64 / 4.0).collect();
            let y: Vec<f64> = (0..48).map(|k| ((k * 3 + v * 5) % 13) as f64 / 8.0).collect();
            vec![
                ArgValue::R(v as f64 * 0.5 - 2.0),
                ArgValue::AReal(x),
                ArgValue::AReal(y),
                ArgValue::I(48),
            ]
        }
        "hilbert" => {
            let rows = 1 + variant % 12;
            let cols = 1 + (variant * 5 + 3) % 12;
            vec![
                ArgValue::AInt(vec![0; rows * cols]),
                ArgValue::I(rows as i64),
                ArgValue::I(cols as i64),
            ]
        }
        "array_sq" => {
            let a: Vec<i64> = (0..64).map(|k| (k % 9) - 4 + v).collect();
            vec![ArgValue::AInt(a), ArgValue::I(64)]
        }
        "scaled_store" => vec![ArgValue::AInt(vec![0; 20000])],
        "deptest" => vec![ArgValue::AInt(vec![0; 2048])],
        _ => vec![ArgValue::I(SCALARS[variant % SCALARS.len()])],
    }
}

#[test]
fn c1_benchmark_identification_counts() {
    // Port notes for the seven benchmark files, where the TAJ versions
    // deviate from the usual Java shapes:
    //  - Problem sizes are compile-time constants and each closed benchmark
    //    is driven by a `main` that allocates the arrays, publishes them
    //    through globals so results stay observable, and seeds them with a
    //    fill loop whose bound is read back from a global. Those fill loops
    //    are deliberately opaque to the analysis and are accounted for in
    //    the recall profile, not here; this test counts kernel loops.
    //  - hilbert keeps its row and column counts as parameters and stores
    //    the integer term i + j + 1 because the IR has no division; its
    //    outer loop still carries the i*cols subscript that defeats the
    //    solver.
    //  - gseidel2d updates its grid in place from neighbour cells, so the
    //    correct identification count is zero.
    let expected = [
        ("saxpy", 1),
        ("jacobi1d", 2),
        ("jacobi2d", 4),
        ("matmul2d", 2),
        ("mattranspose", 2),
        ("gseidel2d", 0),
        ("hilbert", 1),
    ];
    for (file, want) in expected {
        let p = program(corpus_src(file));
        let begun = Instant::now();
        let (_, map) = analyze(&p, &AnalyzeOptions::default());
        let spent = begun.elapsed();
        let got: usize = map.values().map(Vec::len).sum();
        assert_eq!(got, want, "{file}: identified loop count");
        assert!(spent < Duration::from_secs(2), "{file}: analysis took {spent:?}");
    }
    println!("PASS: identification counts match on all seven benchmark ports");
}

#[test]
fn c2_identified_loops_are_truly_parallel() {
    let curated: BTreeSet<(&str, &str, usize)> = CURATED.iter().copied().collect();
    let mut identified = Vec::new();
    for (file, r) in all_reports() {
        if r.verdict == Verdict::Parallel {
            identified.push((file, func_name(&r.signature).to_string(), r.header));
        }
    }
    assert_eq!(identified.len(), 18, "corpus-wide identification count");
    for (file, func, header) in &identified {
        assert!(
            curated.contains(&(file, func.as_str(), *header)),
            "{file}: {func} loop@{header} identified but its iterations are not independent"
        );
    }
    println!("PASS: all {} identified loops are in the curated parallel set", identified.len());
}

#[test]
fn c3_recall_band_and_miss_profile() {
    let mut verdicts: BTreeMap<(&str, String, usize), LoopReport> = BTreeMap::new();
    for (file, r) in all_reports() {
        let key = (file, func_name(&r.signature).to_string(), r.header);
        verdicts.insert(key, r);
    }

    let mut hits = 0usize;
    let mut bound_misses = Vec::new();
    let mut call_misses = Vec::new();
    for &(file, func, header) in CURATED {
        let r = verdicts
            .get(&(file, func.to_string(), header))
            .unwrap_or_else(|| panic!("{file}: no report for {func} loop@{header}"));
        match r.verdict {
            Verdict::Parallel => hits += 1,
            Verdict::Rejected => match r.stage {
                Stage::Constraints => {
                    assert!(
                        r.detail.starts_with("unsupported index definition"),
                        "{file}: {func} loop@{header} unexpected detail {:?}",
                        r.detail
                    );
                    bound_misses.push((file, func, header));
                }
                Stage::Solver => {
                    assert_eq!(r.detail, "unknown", "{file}: {func} loop@{header}");
                    bound_misses.push((file, func, header));
                }
                Stage::Purity => call_misses.push((file, func, header)),
                other => panic!("{file}: {func} loop@{header} missed at stage {other:?}"),
            },
        }
    }

    let total = CURATED.len();
    let recall = hits * 100 / total;
    assert_eq!(total, 30);
    assert_eq!(hits, 18);
    assert!((50..=75).contains(&recall), "recall {recall}% outside [50%, 75%]");
    assert!(!bound_misses.is_empty(), "no misses from opaque bounds or subscripts");
    assert!(!call_misses.is_empty(), "no misses from calls in loop bodies");
    assert!(
        bound_misses.len() > call_misses.len(),
        "opaque-bound misses must dominate: {} bound vs {} call",
        bound_misses.len(),
        call_misses.len()
    );
    println!(
        "PASS: recall {hits}/{total} ({recall}%), misses {} bound vs {} call",
        bound_misses.len(),
        call_misses.len()
    );
}

struct Lcg(u64);

impl Lcg {
    fn new(seed: u64) -> Lcg {
        Lcg(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03))
    }

    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Index shapes the constraint generator supports: the iterator itself,
/// single-assignment chains of scaled and shifted copies, and constants.
enum IdxForm {
    Iter,
    Scale(i64),
    Offset(i64),
    ScaleOffset(i64, i64),
    ScaleMinus(i64, i64),
    Fixed(i64),
}

impl IdxForm {
    fn eval(&self, i: i64) -> i64 {
        match *self {
            IdxForm::Iter => i,
            IdxForm::Scale(m) => i * m,
            IdxForm::Offset(c) => i + c,
            IdxForm::ScaleOffset(m, c) => i * m + c,
            IdxForm::ScaleMinus(m, c) => i * m - c,
            IdxForm::Fixed(c) => c,
        }
    }
}

/// One random counted loop over `a`, with one write and up to two reads
/// through supported index chains; returns the source and an array length
/// covering every access.
fn gen_case(rng: &mut Lcg) -> (String, usize) {
    let lb = rng.below(4) as i64;
    let ub = lb + 1 + rng.below((64 - lb) as u64) as i64;
    let nrefs = 1 + rng.below(3) as usize;
    let write_pos = rng.below(nrefs as u64) as usize;

    let mut forms = Vec::new();
    for _ in 0..nrefs {
        forms.push(match rng.below(6) {
            0 => IdxForm::Iter,
            1 => IdxForm::Scale(1 + rng.below(3) as i64),
            2 => IdxForm::Offset(rng.below(8) as i64),
            3 => IdxForm::ScaleOffset(1 + rng.below(3) as i64, rng.below(8) as i64),
            4 => {
                let m = 1 + rng.below(3) as i64;
                let c = if lb * m > 0 { rng.below((lb * m + 1) as u64) as i64 } else { 0 };
                IdxForm::ScaleMinus(m, c)
            }
            _ => IdxForm::Fixed(rng.below(ub as u64) as i64),
        });
    }

    let mut max_idx = 0i64;
    for i in lb..ub {
        for f in &forms {
            max_idx = max_idx.max(f.eval(i));
        }
    }

    let mut body: Vec<String> = Vec::new();
    let mut temps = 0usize;
    for (r, f) in forms.iter().enumerate() {
        let idx = match *f {
            IdxForm::Iter => String::from("i"),
            IdxForm::Scale(m) => {
                body.push(format!("$x{temps} = i * {m}"));
                temps += 1;
                format!("$x{}", temps - 1)
            }
            IdxForm::Offset(c) => {
                body.push(format!("$x{temps} = i + {c}"));
                temps += 1;
                format!("$x{}", temps - 1)
            }
            IdxForm::ScaleOffset(m, c) => {
                body.push(format!("$x{temps} = i * {m}"));
                body.push(format!("$x{} = $x{temps} + {c}", temps + 1));
                temps += 2;
                format!("$x{}", temps - 1)
            }
            IdxForm::ScaleMinus(m, c) => {
                body.push(format!("$x{temps} = i * {m}"));
                body.push(format!("$x{} = $x{temps} - {c}", temps + 1));
                temps += 2;
                format!("$x{}", temps - 1)
            }
            IdxForm::Fixed(c) => {
                body.push(format!("$x{temps} = {c}"));
                temps += 1;
                format!("$x{}", temps - 1)
            }
        };
        if r == write_pos {
            body.push(format!("a[{idx}] = i"));
        } else {
            body.push(format!("$r{r} = a[{idx}]"));
        }
    }

    let upd = 3 + body.len();
    let back = upd + 1;
    let exit = back + 1;
    let mut src = String::new();
    src.push_str("entry gen\n");
    src.push_str("func gen(a: array-int) : void {\n");
    src.push_str(&format!("  locals {{ i : int slot 1 span [1, {back}) ; }}\n"));
    src.push_str("  0: a := param 0\n");
    src.push_str(&format!("  1: i = {lb}\n"));
    src.push_str(&format!("  2: if i >= {ub} goto {exit}\n"));
    for (k, line) in body.iter().enumerate() {
        src.push_str(&format!("  {}: {line}\n", 3 + k));
    }
    src.push_str(&format!("  {upd}: i = i + 1\n"));
    src.push_str(&format!("  {back}: goto 2\n"));
    src.push_str(&format!("  {exit}: return\n"));
    src.push_str("}\n");
    (src, (max_idx + 1).max(1) as usize)
}

#[test]
fn c4_solver_agrees_with_runtime_oracle() {
    let begun = Instant::now();
    let cfg = ExecConfig::default();
    let mut rng = Lcg::new(0x5EED_CAFE);
    let mut conflicts = 0usize;
    let mut independent = 0usize;
    for case in 0..100 {
        let (src, len) = gen_case(&mut rng);
        let p = parse_program(&src).unwrap_or_else(|e| panic!("case {case}: {e}\n{src}"));
        let (reports, _) = analyze(&p, &AnalyzeOptions::default());
        assert_eq!(reports.len(), 1, "case {case}: one loop expected\n{src}");
        let r = &reports[0];
        let predicted_conflict = match r.verdict {
            Verdict::Parallel => false,
            Verdict::Rejected => {
                assert_eq!(r.stage, Stage::Solver, "case {case}: {}\n{src}", r.detail);
                assert_eq!(r.detail, "sat", "case {case}: solver must be decisive\n{src}");
                true
            }
        };
        let args = [ArgValue::AInt(vec![0; len])];
        let outcome = conflict_oracle(&p, "gen", &args, "gen", 2, &cfg)
            .unwrap_or_else(|e| panic!("case {case}: {e}\n{src}"));
        assert_eq!(
            predicted_conflict, outcome.conflict,
            "case {case}: solver and oracle disagree (witness {:?})\n{src}",
            outcome.witness
        );
        if outcome.conflict {
            conflicts += 1;
        } else {
            independent += 1;
        }
    }
    let spent = begun.elapsed();
    assert!(conflicts >= 10 && independent >= 10, "lopsided sample: {conflicts} vs {independent}");
    assert!(spent < Duration::from_secs(60), "took {spent:?}");
    println!(
        "PASS: solver matches the oracle on 100 random loops \
         ({conflicts} dependent, {independent} independent, {spent:?})"
    );
}

#[test]
fn c5_dependence_formula_golden_file() {
    let p = program(corpus_src("scaled_store"));
    let scripts = smt_scripts(&p);
    assert_eq!(scripts.len(), 1);
    let (name, outcome) = &scripts[0];
    assert_eq!(name, "scaled_store_loop2.smt2");
    let SmtOutcome::Script(text) = outcome else { panic!("formula generation was skipped") };
    assert_eq!(text.as_str(), include_str!("golden/scaled_store_loop2.smt2"));
    println!("PASS: emitted dependence formula is byte-identical to the golden file");
}

#[test]
fn c6_reordered_execution_preserves_results() {
    const VARIANTS: usize = 10;
    const SEEDS: u64 = 10;
    let cfg = ExecConfig::default();
    let mut checked_loops = 0usize;
    for &(file, src) in CORPUS {
        let p = program(src);
        let (_, map) = analyze(&p, &AnalyzeOptions::default());
        let annotated = annotated_loops(&p, &map);
        if annotated.is_empty() {
            continue;
        }
        let entry = p.entry.clone().expect("annotated corpus programs declare an entry");
        let base: Vec<RunResult> = (0..VARIANTS)
            .map(|v| interpret(&p, &entry, &corpus_args(file, v), &cfg).unwrap())
            .collect();
        for (func, headers) in &annotated {
            for &header in headers {
                checked_loops += 1;
                for (v, want) in base.iter().enumerate() {
                    let args = corpus_args(file, v);
                    for seed in 0..SEEDS {
                        let got =
                            run_shuffled(&p, &entry, &args, func, header, seed * 7919 + 17, &cfg)
                                .unwrap();
                        assert_eq!(
                            &got, want,
                            "{file}: shuffled {func} loop@{header}, variant {v}, seed {seed}"
                        );
                    }
                }
            }
        }
        for (v, want) in base.iter().enumerate() {
            let args = corpus_args(file, v);
            for workers in [1, 2, 4, 8] {
                let got = run_parallel(&p, &entry, &args, &map, workers, &cfg).unwrap();
                assert_eq!(&got, want, "{file}: {workers} workers, variant {v}");
            }
        }
    }
    assert_eq!(checked_loops, 18, "every identified loop must be exercised");
    println!(
        "PASS: {checked_loops} loops keep sequential results under \
         {} shuffles each and 1/2/4/8 workers",
        VARIANTS * SEEDS as usize
    );
}

#[test]
fn c7_annotation_map_golden_and_budget() {
    let p = program(corpus_src("deptest"));
    let (_, map) = analyze(&p, &AnalyzeOptions::default());
    let json = annotmap::to_json(&map);
    assert_eq!(json, include_str!("golden/deptest.map.json"));
    assert!(json.contains(r#"{"start":2,"length":35,"slot":1}"#));
    assert_eq!(annotmap::from_json(&json).expect("round-trip"), map);
    for &(file, src) in CORPUS {
        let (_, map) = analyze(&program(src), &AnalyzeOptions::default());
        let bytes = annotmap::to_json(&map).len();
        assert!(bytes <= 2048, "{file}: annotation map is {bytes} bytes");
    }
    println!("PASS: annotation maps match the golden file and stay within 2 KiB");
}

#[test]
fn c8_purity_flags_exact() {
    let p = program(corpus_src("purity_cases"));
    let pt = compute_points_to(&p);
    let purity = compute_purity(&p, &pt);
    let expected: &[(&str, bool, bool)] = &[
        ("<clinit>", false, true),
        ("calls_external", false, true),
        ("calls_init", false, true),
        ("calls_reader", true, false),
        ("calls_writer", false, true),
        ("fresh_writer", false, false),
        ("global_reader", true, false),
        ("global_writer", false, true),
        ("param_reader", true, false),
        ("param_writer", false, true),
        ("pure_scalar", false, false),
    ];
    assert_eq!(purity.len(), expected.len());
    for &(name, read, write) in expected {
        let got = purity.get(name).unwrap_or_else(|| panic!("no purity entry for {name}"));
        assert_eq!(
            (got.read_impure, got.write_impure),
            (read, write),
            "{name}: (read_impure, write_impure)"
        );
    }
    println!("PASS: purity flags are exact for all {} fixtures", expected.len());
}

#[test]
fn c9_large_matmul_parallel_run_matches() {
    let p = program(include_str!("big/matmul256.taj"));
    let (_, map) = analyze(&p, &AnalyzeOptions::default());
    assert_eq!(map.values().map(Vec::len).sum::<usize>(), 2);
    let entry = p.entry.clone().expect("big workload declares an entry");
    let cfg = ExecConfig { step_limit: 1_000_000_000 };
    let args = [ArgValue::I(3)];
    let begun = Instant::now();
    let seq = interpret(&p, &entry, &args, &cfg).unwrap();
    let t_seq = begun.elapsed();
    let begun = Instant::now();
    let par = run_parallel(&p, &entry, &args, &map, 4, &cfg).unwrap();
    let t_par = begun.elapsed();
    assert_eq!(par, seq);
    println!(
        "PASS: 256x256 matmul with 4 workers matches sequential bit for bit \
         (sequential {t_seq:?}, parallel {t_par:?}; timing informational)"
    );
}
