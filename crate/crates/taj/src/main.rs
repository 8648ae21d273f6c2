//! Command-line driver for the TAJ analyzer and interpreter.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use taj::annotmap;
use taj::driver::{self, AnalyzeOptions, SmtOutcome};
use taj::exec::{self, ExecConfig, RunResult, DEFAULT_STEP_LIMIT};
use taj::text::parse_program;
use taj_core::annotate::AnnotationMap;
use taj_core::canon::find_loops;
use taj_core::ir::Program;

#[derive(Parser)]
#[command(
    name = "taj",
    version,
    about = "Static loop-parallelism analysis and validation for TAJ programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a program and write its annotation map.
    Analyze {
        input: PathBuf,
        /// Write the annotation map here instead of standard output.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Largest variable-domain product the solver may enumerate.
        #[arg(long, default_value_t = 4096)]
        enum_bound: u64,
        /// Wall-clock budget for the whole analysis, in milliseconds.
        #[arg(long, default_value_t = 5000)]
        timeout_millis: u64,
    },
    /// Execute a program, running annotated loops across worker threads.
    Run {
        input: PathBuf,
        /// Annotation map produced by `analyze`; omit to run sequentially.
        #[arg(long)]
        map: Option<PathBuf>,
        /// JSON array of arguments for the entry function.
        #[arg(long)]
        args: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: u64,
        /// Run one loop's iterations in a seeded random order instead,
        /// written `function@header`.
        #[arg(long, value_name = "FUNCTION@HEADER")]
        shuffle: Option<String>,
        /// Permutation seed for --shuffle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Replay every canonical loop sequentially and print observed
    /// cross-iteration dependences.
    Oracle {
        input: PathBuf,
        #[arg(long)]
        args: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: u64,
    },
    /// Write each loop's dependence formula as an SMT-LIB2 script.
    EmitSmt {
        input: PathBuf,
        /// Directory receiving one `.smt2` file per loop.
        #[arg(short, long)]
        out: PathBuf,
        /// Per-file analysis budget in milliseconds.
        #[arg(long, default_value_t = 5000)]
        timeout_millis: u64,
    },
    /// Print a summary table over one or more programs.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 4096)]
        enum_bound: u64,
        #[arg(long, default_value_t = 5000)]
        timeout_millis: u64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))?;
    parse_program(&text).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn load_map(path: &Path) -> Result<AnnotationMap, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))?;
    annotmap::from_json(&text).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn entry_name(p: &Program) -> Result<String, Failure> {
    match &p.entry {
        Some(name) => Ok(name.clone()),
        None => Err(fail(2, "the program declares no entry function")),
    }
}

fn load_args(
    p: &Program,
    entry: &str,
    path: &Option<PathBuf>,
) -> Result<Vec<exec::ArgValue>, Failure> {
    let f =
        p.function_by_name(entry).ok_or_else(|| fail(2, format!("no function named `{entry}`")))?;
    match path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))?;
            driver::decode_args(f, &text).map_err(|e| fail(2, e))
        }
        None if f.params.is_empty() => Ok(Vec::new()),
        None => Err(fail(2, format!("`{entry}` takes arguments; pass --args"))),
    }
}

fn print_run(r: &RunResult) {
    println!("heapDigest: {}", r.heap_digest);
    println!("stepCount: {}", r.step_count);
    if let Some(v) = r.return_value {
        println!("returnValue: {v}");
    }
}

fn cmd_analyze(
    input: &Path,
    out: Option<&Path>,
    enum_bound: u64,
    timeout_millis: u64,
) -> Result<(), Failure> {
    let p = load_program(input)?;
    let (reports, map) = driver::analyze(&p, &AnalyzeOptions { enum_bound, timeout_millis });
    for r in &reports {
        println!("{}", driver::format_report(r));
    }
    let json = annotmap::to_json(&map);
    match out {
        Some(path) => fs::write(path, &json)
            .map_err(|e| fail(1, format!("cannot write {}: {e}", path.display())))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_run(
    input: &Path,
    map: Option<&Path>,
    args: &Option<PathBuf>,
    workers: usize,
    step_limit: u64,
    shuffle: Option<&str>,
    seed: u64,
) -> Result<(), Failure> {
    let p = load_program(input)?;
    let entry = entry_name(&p)?;
    let argv = load_args(&p, &entry, args)?;
    let cfg = ExecConfig { step_limit };
    let result = match shuffle {
        Some(spec) => {
            let (function, header) = spec
                .rsplit_once('@')
                .and_then(|(f, h)| h.parse::<usize>().ok().map(|h| (f, h)))
                .ok_or_else(|| fail(2, "--shuffle expects `function@header`"))?;
            exec::run_shuffled(&p, &entry, &argv, function, header, seed, &cfg)
        }
        None => {
            let map = match map {
                Some(path) => load_map(path)?,
                None => AnnotationMap::new(),
            };
            exec::run_parallel(&p, &entry, &argv, &map, workers, &cfg)
        }
    }
    .map_err(|e| fail(3, e.to_string()))?;
    print_run(&result);
    Ok(())
}

fn cmd_oracle(input: &Path, args: &Option<PathBuf>, step_limit: u64) -> Result<(), Failure> {
    let p = load_program(input)?;
    let entry = entry_name(&p)?;
    let argv = load_args(&p, &entry, args)?;
    let cfg = ExecConfig { step_limit };
    let mut ran = BTreeSet::new();
    for f in &p.functions {
        for (l, found) in find_loops(f) {
            match found {
                Err(r) => {
                    println!("{} loop@{}: not canonical ({})", f.name, l.header, r.code());
                    continue;
                }
                Ok(_) => {
                    let o = exec::conflict_oracle(&p, &entry, &argv, &f.name, l.header, &cfg)
                        .map_err(|e| fail(3, e.to_string()))?;
                    match o.witness {
                        Some(w) => println!(
                            "{} loop@{}: conflict between iterations {} and {} at {}",
                            f.name, l.header, w.iter_a, w.iter_b, w.location
                        ),
                        None => println!("{} loop@{}: no conflict observed", f.name, l.header),
                    }
                    ran.insert((f.name.clone(), l.header));
                }
            }
        }
    }
    if ran.is_empty() {
        println!("no canonical loops");
    }
    Ok(())
}

fn cmd_emit_smt(input: &Path, out: &Path, _timeout_millis: u64) -> Result<(), Failure> {
    let p = load_program(input)?;
    fs::create_dir_all(out)
        .map_err(|e| fail(1, format!("cannot create {}: {e}", out.display())))?;
    for (file, outcome) in driver::smt_scripts(&p) {
        match outcome {
            SmtOutcome::Script(script) => {
                let path = out.join(&file);
                fs::write(&path, script)
                    .map_err(|e| fail(1, format!("cannot write {}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
            SmtOutcome::Skipped(reason) => println!("skipped {file}: {reason}"),
        }
    }
    Ok(())
}

fn cmd_report(inputs: &[PathBuf], enum_bound: u64, timeout_millis: u64) -> Result<(), Failure> {
    let opts = AnalyzeOptions { enum_bound, timeout_millis };
    println!("{}", driver::REPORT_HEADER);
    for input in inputs {
        let p = load_program(input)?;
        let name = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| input.display().to_string());
        println!("{}", driver::format_row(&driver::report_row(&name, &p, &opts)));
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Analyze { input, out, enum_bound, timeout_millis } => {
            cmd_analyze(&input, out.as_deref(), enum_bound, timeout_millis)
        }
        Command::Run { input, map, args, workers, step_limit, shuffle, seed } => {
            cmd_run(&input, map.as_deref(), &args, workers, step_limit, shuffle.as_deref(), seed)
        }
        Command::Oracle { input, args, step_limit } => cmd_oracle(&input, &args, step_limit),
        Command::EmitSmt { input, out, timeout_millis } => {
            cmd_emit_smt(&input, &out, timeout_millis)
        }
        Command::Report { inputs, enum_bound, timeout_millis } => {
            cmd_report(&inputs, enum_bound, timeout_millis)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
