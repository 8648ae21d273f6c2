//! TAJ interpreter and validation harness.
//!
//! Four entry points share one execution core: `interpret` (plain
//! sequential), `run_shuffled` (one loop's iterations in a seeded random
//! order), `run_parallel` (annotated loops block-partitioned across worker
//! threads over a shared heap), and `conflict_oracle` (sequential run that
//! tags every heap access with its iteration and intersects the access
//! sets). Step counts follow one protocol in every mode: each executed
//! statement is one step, a loop iteration costs its header test plus its
//! body trace, and the exit test costs one more, so a run over the same
//! inputs yields the same `RunResult` regardless of schedule whenever the
//! iterations are independent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use sha2::{Digest, Sha256};
use taj_core::annotate::AnnotationMap;
use taj_core::canon::find_loops;
use taj_core::ir::{
    Alloc, BinOp, CmpOp, Expr, FunctionDef, GlobalDecl, GlobalKind, Kind, Operand, Program,
    StmtKind,
};
use taj_core::scope::get_local_vars;

pub const DEFAULT_STEP_LIMIT: u64 = 100_000_000;

#[derive(Debug, Clone, Copy)]
pub struct ExecConfig {
    pub step_limit: u64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { step_limit: DEFAULT_STEP_LIMIT }
    }
}

/// Runtime value. Reals are 64-bit floats; integer arithmetic wraps at 64
/// bits; locals start as `Uninit` and reading one is an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    I(i64),
    R(f64),
    Ref(u32),
    Uninit,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::I(v) => write!(f, "{v}"),
            Value::R(x) => write!(f, "{x:?}"),
            Value::Ref(id) => write!(f, "obj#{id}"),
            Value::Uninit => write!(f, "uninit"),
        }
    }
}

/// Argument vector entry for an entry-point call.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    I(i64),
    R(f64),
    AInt(Vec<i64>),
    AReal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub return_value: Option<Value>,
    pub heap_digest: String,
    pub step_count: u64,
}

/// A heap or global location, the unit the conflict oracle reasons over.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Loc {
    Elem(u32, i64),
    Field(u32, String),
    Global(String),
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Elem(id, i) => write!(f, "obj#{id}[{i}]"),
            Loc::Field(id, name) => write!(f, "obj#{id}.{name}"),
            Loc::Global(name) => write!(f, "global {name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub iter_a: i64,
    pub iter_b: i64,
    pub location: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub conflict: bool,
    pub witness: Option<Witness>,
    pub result: RunResult,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecError {
    NoEntry(String),
    NoSuchLoop { function: String, header: usize },
    BadArgs(String),
    OutOfBounds { function: String, statement: usize, index: i64, len: usize },
    StepLimit,
    ExternalCall { function: String, statement: usize, callee: String },
    UninitRead { function: String, statement: usize, name: String },
    Invalid { function: String, statement: usize, message: String },
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::NoEntry(name) => write!(f, "no function named `{name}`"),
            ExecError::NoSuchLoop { function, header } => {
                write!(f, "`{function}` has no canonical loop with header {header}")
            }
            ExecError::BadArgs(m) => write!(f, "bad arguments: {m}"),
            ExecError::OutOfBounds { function, statement, index, len } => write!(
                f,
                "{function}: statement {statement}: index {index} outside array of length {len}"
            ),
            ExecError::StepLimit => write!(f, "step limit exceeded"),
            ExecError::ExternalCall { function, statement, callee } => {
                write!(f, "{function}: statement {statement}: call to external function `{callee}`")
            }
            ExecError::UninitRead { function, statement, name } => {
                write!(f, "{function}: statement {statement}: read of uninitialized local `{name}`")
            }
            ExecError::Invalid { function, statement, message } => {
                write!(f, "{function}: statement {statement}: {message}")
            }
        }
    }
}

impl std::error::Error for ExecError {}

#[derive(Debug, Clone, Copy)]
enum LOp {
    Local(usize),
    Const(i64),
}

#[derive(Debug)]
enum LCallee {
    Defined(usize),
    External(String),
}

#[derive(Debug)]
enum LStmt {
    Identity { target: usize, param: usize },
    AssignConst { target: usize, value: i64 },
    AssignLocal { target: usize, source: usize },
    AssignBin { target: usize, op: BinOp, lhs: LOp, rhs: LOp },
    ArrayLoad { target: usize, base: usize, index: LOp },
    ArrayStore { base: usize, index: LOp, value: LOp },
    FieldLoad { target: usize, base: usize, field: String },
    FieldStore { base: usize, field: String, value: LOp },
    GlobalLoad { target: usize, global: String },
    GlobalStore { global: String, value: LOp },
    NewArrayInt { target: usize, size: LOp },
    NewArrayReal { target: usize, size: LOp },
    NewObject { target: usize },
    Call { target: Option<usize>, callee: LCallee, args: Vec<LOp> },
    IfGoto { lhs: LOp, op: CmpOp, rhs: LOp, target: usize },
    Goto { target: usize },
    Return { value: Option<LOp> },
}

struct LFunc {
    name: String,
    nlocals: usize,
    names: Vec<String>,
    index_of: BTreeMap<String, usize>,
    stmts: Vec<LStmt>,
}

struct Lowered {
    funcs: Vec<LFunc>,
    by_name: BTreeMap<String, usize>,
    globals: Vec<GlobalDecl>,
}

struct Pool {
    index_of: BTreeMap<String, usize>,
    names: Vec<String>,
}

impl Pool {
    fn id(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index_of.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index_of.insert(name.to_string(), i);
        i
    }

    fn op(&mut self, o: &Operand) -> LOp {
        match o {
            Operand::Local(n) => LOp::Local(self.id(n)),
            Operand::Const(c) => LOp::Const(*c),
        }
    }
}

fn lower_function(f: &FunctionDef, by_name: &BTreeMap<String, usize>) -> LFunc {
    let mut pool = Pool { index_of: BTreeMap::new(), names: Vec::new() };
    for p in &f.params {
        pool.id(&p.name);
    }
    for e in &f.local_table {
        pool.id(&e.name);
    }
    let mut stmts = Vec::with_capacity(f.statements.len());
    for s in &f.statements {
        let lowered = match &s.kind {
            StmtKind::Identity { target, param } => {
                LStmt::Identity { target: pool.id(target), param: *param }
            }
            StmtKind::Assign { target, expr } => match expr {
                Expr::Const(v) => LStmt::AssignConst { target: pool.id(target), value: *v },
                Expr::Local(x) => {
                    LStmt::AssignLocal { target: pool.id(target), source: pool.id(x) }
                }
                Expr::Bin(op, a, b) => {
                    let lhs = pool.op(a);
                    let rhs = pool.op(b);
                    LStmt::AssignBin { target: pool.id(target), op: *op, lhs, rhs }
                }
            },
            StmtKind::ArrayLoad { target, base, index } => {
                let index = pool.op(index);
                LStmt::ArrayLoad { target: pool.id(target), base: pool.id(base), index }
            }
            StmtKind::ArrayStore { base, index, value } => {
                let index = pool.op(index);
                let value = pool.op(value);
                LStmt::ArrayStore { base: pool.id(base), index, value }
            }
            StmtKind::FieldLoad { target, base, field } => LStmt::FieldLoad {
                target: pool.id(target),
                base: pool.id(base),
                field: field.clone(),
            },
            StmtKind::FieldStore { base, field, value } => {
                let value = pool.op(value);
                LStmt::FieldStore { base: pool.id(base), field: field.clone(), value }
            }
            StmtKind::GlobalLoad { target, global } => {
                LStmt::GlobalLoad { target: pool.id(target), global: global.clone() }
            }
            StmtKind::GlobalStore { global, value } => {
                LStmt::GlobalStore { global: global.clone(), value: pool.op(value) }
            }
            StmtKind::New { target, alloc } => match alloc {
                Alloc::ArrayInt(size) => {
                    let size = pool.op(size);
                    LStmt::NewArrayInt { target: pool.id(target), size }
                }
                Alloc::ArrayReal(size) => {
                    let size = pool.op(size);
                    LStmt::NewArrayReal { target: pool.id(target), size }
                }
                Alloc::Object => LStmt::NewObject { target: pool.id(target) },
            },
            StmtKind::Call { target, callee, args } => {
                let args = args.iter().map(|a| pool.op(a)).collect();
                let callee = match by_name.get(callee) {
                    Some(&idx) => LCallee::Defined(idx),
                    None => LCallee::External(callee.clone()),
                };
                LStmt::Call { target: target.as_ref().map(|t| pool.id(t)), callee, args }
            }
            StmtKind::IfGoto { cond, target } => {
                let lhs = pool.op(&cond.lhs);
                let rhs = pool.op(&cond.rhs);
                LStmt::IfGoto { lhs, op: cond.op, rhs, target: *target }
            }
            StmtKind::Goto { target } => LStmt::Goto { target: *target },
            StmtKind::Return { value } => {
                LStmt::Return { value: value.as_ref().map(|v| pool.op(v)) }
            }
        };
        stmts.push(lowered);
    }
    LFunc {
        name: f.name.clone(),
        nlocals: pool.names.len(),
        names: pool.names,
        index_of: pool.index_of,
        stmts,
    }
}

fn lower(p: &Program) -> Lowered {
    let by_name: BTreeMap<String, usize> =
        p.functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
    let funcs = p.functions.iter().map(|f| lower_function(f, &by_name)).collect();
    Lowered { funcs, by_name, globals: p.globals.clone() }
}

/// Heap object. Array elements are atomics so worker threads can share the
/// heap without locks; annotated loops have disjoint effective write sets, so
/// relaxed ordering plus the join barrier is enough.
enum Obj {
    AInt(Box<[AtomicI64]>),
    AReal(Box<[AtomicU64]>),
    Fields(Mutex<BTreeMap<String, Value>>),
}

impl Obj {
    fn int_array(n: usize) -> Obj {
        Obj::AInt((0..n).map(|_| AtomicI64::new(0)).collect())
    }

    fn real_array(n: usize) -> Obj {
        Obj::AReal((0..n).map(|_| AtomicU64::new(0f64.to_bits())).collect())
    }
}

#[derive(Clone)]
struct Heap {
    objects: Vec<Arc<Obj>>,
    globals: BTreeMap<String, Value>,
}

impl Heap {
    fn alloc(&mut self, o: Obj) -> Value {
        let id = self.objects.len() as u32;
        self.objects.push(Arc::new(o));
        Value::Ref(id)
    }

    fn obj(&self, id: u32) -> Option<Arc<Obj>> {
        self.objects.get(id as usize).cloned()
    }
}

fn initial_heap(p: &Program) -> Heap {
    let mut heap = Heap { objects: Vec::new(), globals: BTreeMap::new() };
    for g in &p.globals {
        let v = match (g.kind, g.init_size) {
            (GlobalKind::Int, _) => Value::I(0),
            (GlobalKind::Real, _) => Value::R(0.0),
            (GlobalKind::ArrayInt, Some(n)) => heap.alloc(Obj::int_array(n)),
            (GlobalKind::ArrayReal, Some(n)) => heap.alloc(Obj::real_array(n)),
            (_, None) => Value::Uninit,
        };
        heap.globals.insert(g.name.clone(), v);
    }
    heap
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Plain,
    Shuffle { seed: u64 },
    Parallel { workers: usize },
}

/// Everything the dispatcher needs to run one canonical loop out of line.
struct LoopPlan {
    iter: usize,
    locals: Vec<usize>,
    inc: i64,
    cond: CmpOp,
    ub: LOp,
}

struct OracleState {
    fidx: usize,
    header: usize,
    iter_idx: usize,
    active: Option<(u64, i64)>,
    reads: BTreeMap<Loc, BTreeSet<i64>>,
    writes: BTreeMap<Loc, BTreeSet<i64>>,
    conflict: bool,
    witness: Option<Witness>,
}

impl OracleState {
    fn new(fidx: usize, header: usize, iter_idx: usize) -> OracleState {
        OracleState {
            fidx,
            header,
            iter_idx,
            active: None,
            reads: BTreeMap::new(),
            writes: BTreeMap::new(),
            conflict: false,
            witness: None,
        }
    }

    /// Closes a dynamic loop instance: scans for a location written in one
    /// iteration and touched in another, keeping the first witness found in
    /// (location, writer, other) order.
    fn finalize(&mut self) {
        if !self.conflict {
            for (loc, ws) in &self.writes {
                let Some(&a) = ws.iter().next() else { continue };
                let mut others: BTreeSet<i64> = ws.iter().copied().filter(|&x| x != a).collect();
                if let Some(rs) = self.reads.get(loc) {
                    others.extend(rs.iter().copied().filter(|&x| x != a));
                }
                if let Some(&b) = others.iter().next() {
                    self.conflict = true;
                    self.witness = Some(Witness { iter_a: a, iter_b: b, location: loc.clone() });
                    break;
                }
            }
        }
        self.reads.clear();
        self.writes.clear();
        self.active = None;
    }
}

enum Flow {
    Next,
    Ret(Option<Value>),
}

struct Interp<'p> {
    prog: &'p Lowered,
    plans: &'p BTreeMap<(usize, usize), LoopPlan>,
    mode: Mode,
    heap: Heap,
    steps: u64,
    limit: u64,
    oracle: Option<OracleState>,
    next_frame: u64,
}

fn eval_bin(op: BinOp, a: Value, b: Value) -> Result<Value, String> {
    match (a, b) {
        (Value::I(x), Value::I(y)) => Ok(Value::I(match op {
            BinOp::Add => x.wrapping_add(y),
            BinOp::Sub => x.wrapping_sub(y),
            BinOp::Mul => x.wrapping_mul(y),
        })),
        (Value::R(_), _) | (_, Value::R(_)) => {
            let fx = match a {
                Value::I(x) => x as f64,
                Value::R(x) => x,
                v => return Err(format!("arithmetic on {v}")),
            };
            let fy = match b {
                Value::I(y) => y as f64,
                Value::R(y) => y,
                v => return Err(format!("arithmetic on {v}")),
            };
            Ok(Value::R(match op {
                BinOp::Add => fx + fy,
                BinOp::Sub => fx - fy,
                BinOp::Mul => fx * fy,
            }))
        }
        (v, w) => Err(format!("arithmetic on {v} and {w}")),
    }
}

fn int_cmp(op: CmpOp, x: i64, y: i64) -> bool {
    match op {
        CmpOp::Lt => x < y,
        CmpOp::Le => x <= y,
        CmpOp::Gt => x > y,
        CmpOp::Ge => x >= y,
        CmpOp::Eq => x == y,
        CmpOp::Ne => x != y,
    }
}

fn float_cmp(op: CmpOp, x: f64, y: f64) -> bool {
    match op {
        CmpOp::Lt => x < y,
        CmpOp::Le => x <= y,
        CmpOp::Gt => x > y,
        CmpOp::Ge => x >= y,
        CmpOp::Eq => x == y,
        CmpOp::Ne => x != y,
    }
}

fn eval_cmp(op: CmpOp, a: Value, b: Value) -> Result<bool, String> {
    match (a, b) {
        (Value::I(x), Value::I(y)) => Ok(int_cmp(op, x, y)),
        (Value::R(x), Value::R(y)) => Ok(float_cmp(op, x, y)),
        (Value::I(x), Value::R(y)) => Ok(float_cmp(op, x as f64, y)),
        (Value::R(x), Value::I(y)) => Ok(float_cmp(op, x, y as f64)),
        (Value::Ref(x), Value::Ref(y)) if matches!(op, CmpOp::Eq | CmpOp::Ne) => {
            Ok(int_cmp(op, i64::from(x), i64::from(y)))
        }
        (v, w) => Err(format!("comparison of {v} and {w}")),
    }
}

impl<'p> Interp<'p> {
    fn invalid(&self, lf: &LFunc, at: usize, message: String) -> ExecError {
        ExecError::Invalid { function: lf.name.clone(), statement: at, message }
    }

    fn local(
        &self,
        lf: &LFunc,
        frame: &[Value],
        at: usize,
        idx: usize,
    ) -> Result<Value, ExecError> {
        match frame[idx] {
            Value::Uninit => Err(ExecError::UninitRead {
                function: lf.name.clone(),
                statement: at,
                name: lf.names[idx].clone(),
            }),
            v => Ok(v),
        }
    }

    fn operand(&self, lf: &LFunc, frame: &[Value], at: usize, o: &LOp) -> Result<Value, ExecError> {
        match o {
            LOp::Const(c) => Ok(Value::I(*c)),
            LOp::Local(idx) => self.local(lf, frame, at, *idx),
        }
    }

    fn expect_ref(&self, lf: &LFunc, at: usize, v: Value) -> Result<u32, ExecError> {
        match v {
            Value::Ref(id) => Ok(id),
            v => Err(self.invalid(lf, at, format!("expected a reference, found {v}"))),
        }
    }

    fn expect_int(&self, lf: &LFunc, at: usize, v: Value, what: &str) -> Result<i64, ExecError> {
        match v {
            Value::I(x) => Ok(x),
            v => Err(self.invalid(lf, at, format!("{what} must be an integer, found {v}"))),
        }
    }

    fn log(&mut self, loc: Loc, write: bool) {
        if let Some(o) = self.oracle.as_mut() {
            if let Some((_, iter)) = o.active {
                let map = if write { &mut o.writes } else { &mut o.reads };
                map.entry(loc).or_default().insert(iter);
            }
        }
    }

    fn load_elem(
        &mut self,
        lf: &LFunc,
        at: usize,
        base: Value,
        index: Value,
    ) -> Result<Value, ExecError> {
        let id = self.expect_ref(lf, at, base)?;
        let i = self.expect_int(lf, at, index, "array index")?;
        let obj = self
            .heap
            .obj(id)
            .ok_or_else(|| self.invalid(lf, at, format!("dangling reference obj#{id}")))?;
        let out = match &*obj {
            Obj::AInt(a) => {
                let Some(cell) = usize::try_from(i).ok().and_then(|u| a.get(u)) else {
                    return Err(self.oob(lf, at, i, a.len()));
                };
                Value::I(cell.load(Ordering::Relaxed))
            }
            Obj::AReal(a) => {
                let Some(cell) = usize::try_from(i).ok().and_then(|u| a.get(u)) else {
                    return Err(self.oob(lf, at, i, a.len()));
                };
                Value::R(f64::from_bits(cell.load(Ordering::Relaxed)))
            }
            Obj::Fields(_) => {
                return Err(self.invalid(lf, at, "element access on a plain object".to_string()))
            }
        };
        self.log(Loc::Elem(id, i), false);
        Ok(out)
    }

    fn store_elem(
        &mut self,
        lf: &LFunc,
        at: usize,
        base: Value,
        index: Value,
        value: Value,
    ) -> Result<(), ExecError> {
        let id = self.expect_ref(lf, at, base)?;
        let i = self.expect_int(lf, at, index, "array index")?;
        let obj = self
            .heap
            .obj(id)
            .ok_or_else(|| self.invalid(lf, at, format!("dangling reference obj#{id}")))?;
        match &*obj {
            Obj::AInt(a) => {
                let Some(cell) = usize::try_from(i).ok().and_then(|u| a.get(u)) else {
                    return Err(self.oob(lf, at, i, a.len()));
                };
                match value {
                    Value::I(v) => cell.store(v, Ordering::Relaxed),
                    v => {
                        return Err(self.invalid(
                            lf,
                            at,
                            format!("{v} stored into an integer array"),
                        ))
                    }
                }
            }
            Obj::AReal(a) => {
                let Some(cell) = usize::try_from(i).ok().and_then(|u| a.get(u)) else {
                    return Err(self.oob(lf, at, i, a.len()));
                };
                let bits = match value {
                    Value::R(x) => x.to_bits(),
                    Value::I(v) => (v as f64).to_bits(),
                    v => return Err(self.invalid(lf, at, format!("{v} stored into a real array"))),
                };
                cell.store(bits, Ordering::Relaxed);
            }
            Obj::Fields(_) => {
                return Err(self.invalid(lf, at, "element access on a plain object".to_string()))
            }
        }
        self.log(Loc::Elem(id, i), true);
        Ok(())
    }

    fn oob(&self, lf: &LFunc, at: usize, index: i64, len: usize) -> ExecError {
        ExecError::OutOfBounds { function: lf.name.clone(), statement: at, index, len }
    }

    fn step(
        &mut self,
        fidx: usize,
        frame: &mut [Value],
        args: &[Value],
        pc: &mut usize,
    ) -> Result<Flow, ExecError> {
        self.steps += 1;
        if self.steps > self.limit {
            return Err(ExecError::StepLimit);
        }
        let prog = self.prog;
        let lf = &prog.funcs[fidx];
        let at = *pc;
        let Some(stmt) = lf.stmts.get(at) else {
            return Err(self.invalid(
                lf,
                at.saturating_sub(1),
                "execution fell off the end".to_string(),
            ));
        };
        match stmt {
            LStmt::Identity { target, param } => {
                let v = args.get(*param).copied().ok_or_else(|| {
                    self.invalid(lf, at, format!("no argument for parameter {param}"))
                })?;
                frame[*target] = v;
                *pc = at + 1;
            }
            LStmt::AssignConst { target, value } => {
                frame[*target] = Value::I(*value);
                *pc = at + 1;
            }
            LStmt::AssignLocal { target, source } => {
                frame[*target] = self.local(lf, frame, at, *source)?;
                *pc = at + 1;
            }
            LStmt::AssignBin { target, op, lhs, rhs } => {
                let a = self.operand(lf, frame, at, lhs)?;
                let b = self.operand(lf, frame, at, rhs)?;
                frame[*target] = eval_bin(*op, a, b).map_err(|m| self.invalid(lf, at, m))?;
                *pc = at + 1;
            }
            LStmt::ArrayLoad { target, base, index } => {
                let b = self.local(lf, frame, at, *base)?;
                let i = self.operand(lf, frame, at, index)?;
                frame[*target] = self.load_elem(lf, at, b, i)?;
                *pc = at + 1;
            }
            LStmt::ArrayStore { base, index, value } => {
                let b = self.local(lf, frame, at, *base)?;
                let i = self.operand(lf, frame, at, index)?;
                let v = self.operand(lf, frame, at, value)?;
                self.store_elem(lf, at, b, i, v)?;
                *pc = at + 1;
            }
            LStmt::FieldLoad { target, base, field } => {
                let b = self.local(lf, frame, at, *base)?;
                let id = self.expect_ref(lf, at, b)?;
                let obj = self
                    .heap
                    .obj(id)
                    .ok_or_else(|| self.invalid(lf, at, format!("dangling reference obj#{id}")))?;
                let Obj::Fields(fields) = &*obj else {
                    return Err(self.invalid(lf, at, "field access on an array".to_string()));
                };
                let v = fields.lock().unwrap().get(field).copied().ok_or_else(|| {
                    self.invalid(lf, at, format!("field `{field}` read before any store"))
                })?;
                self.log(Loc::Field(id, field.clone()), false);
                frame[*target] = v;
                *pc = at + 1;
            }
            LStmt::FieldStore { base, field, value } => {
                let b = self.local(lf, frame, at, *base)?;
                let v = self.operand(lf, frame, at, value)?;
                let id = self.expect_ref(lf, at, b)?;
                let obj = self
                    .heap
                    .obj(id)
                    .ok_or_else(|| self.invalid(lf, at, format!("dangling reference obj#{id}")))?;
                let Obj::Fields(fields) = &*obj else {
                    return Err(self.invalid(lf, at, "field access on an array".to_string()));
                };
                fields.lock().unwrap().insert(field.clone(), v);
                self.log(Loc::Field(id, field.clone()), true);
                *pc = at + 1;
            }
            LStmt::GlobalLoad { target, global } => {
                let v =
                    self.heap.globals.get(global).copied().ok_or_else(|| {
                        self.invalid(lf, at, format!("unknown global `{global}`"))
                    })?;
                if v == Value::Uninit {
                    return Err(self.invalid(
                        lf,
                        at,
                        format!("global `{global}` read before any store"),
                    ));
                }
                self.log(Loc::Global(global.clone()), false);
                frame[*target] = v;
                *pc = at + 1;
            }
            LStmt::GlobalStore { global, value } => {
                let v = self.operand(lf, frame, at, value)?;
                match self.heap.globals.get_mut(global) {
                    Some(slot) => *slot = v,
                    None => return Err(self.invalid(lf, at, format!("unknown global `{global}`"))),
                }
                self.log(Loc::Global(global.clone()), true);
                *pc = at + 1;
            }
            LStmt::NewArrayInt { target, size } => {
                let n = self.operand(lf, frame, at, size)?;
                let n = self.expect_int(lf, at, n, "array size")?;
                let n = usize::try_from(n)
                    .map_err(|_| self.invalid(lf, at, format!("negative array size {n}")))?;
                frame[*target] = self.heap.alloc(Obj::int_array(n));
                *pc = at + 1;
            }
            LStmt::NewArrayReal { target, size } => {
                let n = self.operand(lf, frame, at, size)?;
                let n = self.expect_int(lf, at, n, "array size")?;
                let n = usize::try_from(n)
                    .map_err(|_| self.invalid(lf, at, format!("negative array size {n}")))?;
                frame[*target] = self.heap.alloc(Obj::real_array(n));
                *pc = at + 1;
            }
            LStmt::NewObject { target } => {
                frame[*target] = self.heap.alloc(Obj::Fields(Mutex::new(BTreeMap::new())));
                *pc = at + 1;
            }
            LStmt::Call { target, callee, args: call_args } => {
                let mut vals = Vec::with_capacity(call_args.len());
                for a in call_args {
                    vals.push(self.operand(lf, frame, at, a)?);
                }
                match callee {
                    LCallee::External(name) => {
                        return Err(ExecError::ExternalCall {
                            function: lf.name.clone(),
                            statement: at,
                            callee: name.clone(),
                        })
                    }
                    LCallee::Defined(ci) => {
                        let ret = self.run_function(*ci, &vals)?;
                        if let Some(t) = target {
                            let v = ret.ok_or_else(|| {
                                self.invalid(lf, at, "void call used as a value".to_string())
                            })?;
                            frame[*t] = v;
                        }
                    }
                }
                *pc = at + 1;
            }
            LStmt::IfGoto { lhs, op, rhs, target } => {
                let a = self.operand(lf, frame, at, lhs)?;
                let b = self.operand(lf, frame, at, rhs)?;
                let taken = eval_cmp(*op, a, b).map_err(|m| self.invalid(lf, at, m))?;
                *pc = if taken { *target } else { at + 1 };
            }
            LStmt::Goto { target } => *pc = *target,
            LStmt::Return { value } => {
                let v = match value {
                    Some(o) => Some(self.operand(lf, frame, at, o)?),
                    None => None,
                };
                return Ok(Flow::Ret(v));
            }
        }
        Ok(Flow::Next)
    }

    /// Oracle bookkeeping around the target loop's header: falling through
    /// begins (or renumbers) an iteration, branching out ends the instance.
    fn note_header(
        &mut self,
        fidx: usize,
        frame_id: u64,
        executed: usize,
        new_pc: usize,
        frame: &[Value],
    ) {
        let Some(o) = self.oracle.as_mut() else { return };
        if o.fidx != fidx || o.header != executed {
            return;
        }
        if new_pc == executed + 1 {
            match o.active {
                Some((fid, _)) if fid != frame_id => {}
                _ => {
                    if let Value::I(v) = frame[o.iter_idx] {
                        o.active = Some((frame_id, v));
                    }
                }
            }
        } else if matches!(o.active, Some((fid, _)) if fid == frame_id) {
            o.finalize();
        }
    }

    fn run_function(&mut self, fidx: usize, args: &[Value]) -> Result<Option<Value>, ExecError> {
        let frame_id = self.next_frame;
        self.next_frame += 1;
        let mut frame = vec![Value::Uninit; self.prog.funcs[fidx].nlocals];
        let mut pc = 0usize;
        loop {
            if !matches!(self.mode, Mode::Plain) {
                let plans = self.plans;
                if let Some(plan) = plans.get(&(fidx, pc)) {
                    pc = self.dispatch(fidx, &mut frame, pc, plan)?;
                    continue;
                }
            }
            let executed = pc;
            match self.step(fidx, &mut frame, args, &mut pc)? {
                Flow::Next => {
                    if self.oracle.is_some() {
                        self.note_header(fidx, frame_id, executed, pc, &frame);
                    }
                }
                Flow::Ret(v) => {
                    if let Some(o) = self.oracle.as_mut() {
                        if matches!(o.active, Some((fid, _)) if fid == frame_id) {
                            o.finalize();
                        }
                    }
                    return Ok(v);
                }
            }
        }
    }

    /// One loop iteration: from the header test through the back jump. The
    /// caller has already placed the iteration value in the iterator slot.
    fn run_iteration(
        &mut self,
        fidx: usize,
        frame: &mut [Value],
        header: usize,
    ) -> Result<(), ExecError> {
        let mut pc = header;
        loop {
            match self.step(fidx, frame, &[], &mut pc)? {
                Flow::Next => {}
                Flow::Ret(_) => {
                    let lf = &self.prog.funcs[fidx];
                    return Err(self.invalid(
                        lf,
                        header,
                        "return inside a dispatched loop".to_string(),
                    ));
                }
            }
            if pc == header {
                return Ok(());
            }
        }
    }

    fn dispatch(
        &mut self,
        fidx: usize,
        frame: &mut [Value],
        header: usize,
        plan: &LoopPlan,
    ) -> Result<usize, ExecError> {
        let prog = self.prog;
        let lf = &prog.funcs[fidx];
        let start = match frame[plan.iter] {
            Value::I(v) => v,
            v => return Err(self.invalid(lf, header, format!("loop iterator holds {v}"))),
        };
        let ub = match plan.ub {
            LOp::Const(c) => c,
            LOp::Local(idx) => match frame[idx] {
                Value::I(v) => v,
                v => return Err(self.invalid(lf, header, format!("loop bound holds {v}"))),
            },
        };
        let mut values = Vec::new();
        let mut v = start;
        while int_cmp(plan.cond, v, ub) {
            values.push(v);
            // Every iteration executes at least the header test, the update,
            // and the back jump, so more values than limit/3 cannot finish.
            if values.len() as u64 > self.limit / 3 + 1 {
                return Err(ExecError::StepLimit);
            }
            v = v.wrapping_add(plan.inc);
        }
        let exit_value = v;

        match self.mode {
            Mode::Plain => {
                return Err(self.invalid(lf, header, "dispatch without a schedule".to_string()))
            }
            Mode::Shuffle { seed } => {
                shuffle_values(&mut values, seed);
                for &val in &values {
                    let mut private = frame.to_vec();
                    for &l in &plan.locals {
                        private[l] = Value::Uninit;
                    }
                    private[plan.iter] = Value::I(val);
                    self.run_iteration(fidx, &mut private, header)?;
                }
            }
            Mode::Parallel { workers } => {
                if !values.is_empty() {
                    let mut base = frame.to_vec();
                    for &l in &plan.locals {
                        base[l] = Value::Uninit;
                    }
                    let blocks = split_blocks(&values, workers);
                    let limit = self.limit;
                    let plans = self.plans;
                    let iter_idx = plan.iter;
                    let results: Vec<Result<u64, ExecError>> = thread::scope(|s| {
                        let mut handles = Vec::with_capacity(blocks.len());
                        for block in blocks {
                            let heap = self.heap.clone();
                            let mut wframe = base.clone();
                            handles.push(s.spawn(move || {
                                let mut w = Interp {
                                    prog,
                                    plans,
                                    mode: Mode::Plain,
                                    heap,
                                    steps: 0,
                                    limit,
                                    oracle: None,
                                    next_frame: 0,
                                };
                                for val in block {
                                    wframe[iter_idx] = Value::I(val);
                                    w.run_iteration(fidx, &mut wframe, header)?;
                                }
                                Ok(w.steps)
                            }));
                        }
                        handles
                            .into_iter()
                            .map(|h| {
                                h.join().unwrap_or_else(|_| {
                                    Err(ExecError::Invalid {
                                        function: prog.funcs[fidx].name.clone(),
                                        statement: header,
                                        message: "worker thread panicked".to_string(),
                                    })
                                })
                            })
                            .collect()
                    });
                    for r in results {
                        self.steps += r?;
                    }
                    if self.steps > self.limit {
                        return Err(ExecError::StepLimit);
                    }
                }
            }
        }

        for &l in &plan.locals {
            frame[l] = Value::Uninit;
        }
        frame[plan.iter] = Value::I(exit_value);
        let mut pc = header;
        match self.step(fidx, frame, &[], &mut pc)? {
            Flow::Next => {}
            Flow::Ret(_) => {
                return Err(self.invalid(
                    &prog.funcs[fidx],
                    header,
                    "loop header returned".to_string(),
                ))
            }
        }
        if pc == header + 1 {
            return Err(self.invalid(
                &prog.funcs[fidx],
                header,
                "loop bound changed during a dispatched run".to_string(),
            ));
        }
        Ok(pc)
    }
}

struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Rng {
        let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        Rng(if z == 0 { 0x9e37_79b9_7f4a_7c15 } else { z })
    }

    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }
}

pub(crate) fn shuffle_values(values: &mut [i64], seed: u64) {
    if values.len() < 2 {
        return;
    }
    let mut rng = Rng::new(seed);
    for i in (1..values.len()).rev() {
        let j = (rng.next() % (i as u64 + 1)) as usize;
        values.swap(i, j);
    }
}

fn split_blocks(values: &[i64], workers: usize) -> Vec<Vec<i64>> {
    let w = workers.clamp(1, values.len().max(1));
    let base = values.len() / w;
    let extra = values.len() % w;
    let mut out = Vec::with_capacity(w);
    let mut at = 0;
    for k in 0..w {
        let size = base + usize::from(k < extra);
        out.push(values[at..at + size].to_vec());
        at += size;
    }
    out
}

/// Canonical digest of the heap reachable from the entry arguments, the
/// globals, and the return value. Object identities are renumbered in
/// first-visit order, so allocation order never shows through.
struct Digester {
    hasher: Sha256,
    ids: BTreeMap<u32, u32>,
    queue: VecDeque<u32>,
}

impl Digester {
    fn new() -> Digester {
        Digester { hasher: Sha256::new(), ids: BTreeMap::new(), queue: VecDeque::new() }
    }

    fn value(&mut self, v: Value) {
        match v {
            Value::I(x) => {
                self.hasher.update([1u8]);
                self.hasher.update(x.to_le_bytes());
            }
            Value::R(x) => {
                self.hasher.update([2u8]);
                self.hasher.update(x.to_bits().to_le_bytes());
            }
            Value::Ref(id) => {
                let next = self.ids.len() as u32;
                let canon = *self.ids.entry(id).or_insert_with(|| next);
                if canon == next && !self.queue.contains(&id) {
                    self.queue.push_back(id);
                }
                self.hasher.update([3u8]);
                self.hasher.update(canon.to_le_bytes());
            }
            Value::Uninit => self.hasher.update([4u8]),
        }
    }

    fn run(
        mut self,
        heap: &Heap,
        globals: &[GlobalDecl],
        args: &[Value],
        ret: Option<Value>,
    ) -> String {
        for v in args {
            self.hasher.update(b"a");
            self.value(*v);
        }
        for g in globals {
            self.hasher.update(b"g");
            self.hasher.update(g.name.as_bytes());
            self.hasher.update([0u8]);
            let v = heap.globals.get(&g.name).copied().unwrap_or(Value::Uninit);
            self.value(v);
        }
        self.hasher.update(b"r");
        match ret {
            Some(v) => {
                self.hasher.update([1u8]);
                self.value(v);
            }
            None => self.hasher.update([0u8]),
        }
        while let Some(id) = self.queue.pop_front() {
            match heap.obj(id) {
                None => self.hasher.update([255u8]),
                Some(obj) => match &*obj {
                    Obj::AInt(a) => {
                        self.hasher.update([16u8]);
                        self.hasher.update((a.len() as u64).to_le_bytes());
                        for cell in a.iter() {
                            self.hasher.update(cell.load(Ordering::Relaxed).to_le_bytes());
                        }
                    }
                    Obj::AReal(a) => {
                        self.hasher.update([17u8]);
                        self.hasher.update((a.len() as u64).to_le_bytes());
                        for cell in a.iter() {
                            self.hasher.update(cell.load(Ordering::Relaxed).to_le_bytes());
                        }
                    }
                    Obj::Fields(fields) => {
                        let pairs: Vec<(String, Value)> =
                            fields.lock().unwrap().iter().map(|(k, v)| (k.clone(), *v)).collect();
                        self.hasher.update([18u8]);
                        self.hasher.update((pairs.len() as u64).to_le_bytes());
                        for (k, v) in pairs {
                            self.hasher.update(k.as_bytes());
                            self.hasher.update([0u8]);
                            self.value(v);
                        }
                    }
                },
            }
        }
        let bytes = self.hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in bytes {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

fn bind_args(f: &FunctionDef, heap: &mut Heap, args: &[ArgValue]) -> Result<Vec<Value>, ExecError> {
    if args.len() != f.params.len() {
        return Err(ExecError::BadArgs(format!(
            "`{}` takes {} arguments, got {}",
            f.name,
            f.params.len(),
            args.len()
        )));
    }
    let mut out = Vec::with_capacity(args.len());
    for (k, (param, arg)) in f.params.iter().zip(args).enumerate() {
        let v = match (param.kind, arg) {
            (Kind::Int, ArgValue::I(v)) => Value::I(*v),
            (Kind::Real, ArgValue::I(v)) => Value::R(*v as f64),
            (Kind::Real, ArgValue::R(x)) => Value::R(*x),
            (Kind::ArrayInt, ArgValue::AInt(v)) => {
                let arr = Obj::AInt(v.iter().map(|&x| AtomicI64::new(x)).collect());
                heap.alloc(arr)
            }
            (Kind::ArrayReal, ArgValue::AReal(v)) => {
                let arr = Obj::AReal(v.iter().map(|&x| AtomicU64::new(x.to_bits())).collect());
                heap.alloc(arr)
            }
            (Kind::ArrayReal, ArgValue::AInt(v)) => {
                let arr =
                    Obj::AReal(v.iter().map(|&x| AtomicU64::new((x as f64).to_bits())).collect());
                heap.alloc(arr)
            }
            (kind, arg) => {
                return Err(ExecError::BadArgs(format!(
                    "argument {k} of `{}`: cannot pass {arg:?} as {}",
                    f.name,
                    kind.text()
                )))
            }
        };
        out.push(v);
    }
    Ok(out)
}

enum Setup<'a> {
    Plain,
    Shuffled { function: &'a str, header: usize, seed: u64 },
    Parallel { map: &'a AnnotationMap, workers: usize },
    Oracle { function: &'a str, header: usize },
}

fn make_plan(f: &FunctionDef, lf: &LFunc, cl: &taj_core::canon::CanonicalLoop) -> LoopPlan {
    let iter = lf.index_of[&cl.iter];
    let names = match get_local_vars(f, cl) {
        Ok(set) => set,
        Err(_) => BTreeSet::from([cl.iter.clone()]),
    };
    let ub = match &cl.ub {
        Operand::Local(n) => LOp::Local(lf.index_of[n]),
        Operand::Const(c) => LOp::Const(*c),
    };
    // The bound may live in a name the scope rules call loop-local (a
    // temporary computed just before the loop); the header re-reads it every
    // iteration, so it must survive the private-copy reset. The same goes for
    // any live-in temporary: scope treats every `$`-name as loop-local, but a
    // value defined only before the header flows into each iteration and must
    // be copied, not cleared.
    let ub_idx = match ub {
        LOp::Local(i) => Some(i),
        LOp::Const(_) => None,
    };
    let defined_inside: BTreeSet<&str> =
        cl.body.iter().filter_map(|&s| f.statements[s].def_target()).collect();
    let locals = names
        .iter()
        .filter(|n| defined_inside.contains(n.as_str()))
        .map(|n| lf.index_of[n])
        .filter(|&i| i != iter && Some(i) != ub_idx)
        .collect();
    LoopPlan { iter, locals, inc: cl.inc, cond: cl.cond_op, ub }
}

fn plan_for(
    p: &Program,
    lowered: &Lowered,
    function: &str,
    header: usize,
) -> Result<(usize, LoopPlan), ExecError> {
    let no_such = || ExecError::NoSuchLoop { function: function.to_string(), header };
    let &fidx = lowered.by_name.get(function).ok_or_else(no_such)?;
    let f = &p.functions[fidx];
    for (_, found) in find_loops(f) {
        if let Ok(cl) = found {
            if cl.header == header {
                return Ok((fidx, make_plan(f, &lowered.funcs[fidx], &cl)));
            }
        }
    }
    Err(no_such())
}

/// Headers of the canonical loops an annotation map marks, per function.
pub fn annotated_loops(p: &Program, map: &AnnotationMap) -> BTreeMap<String, BTreeSet<usize>> {
    let mut out: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for f in &p.functions {
        let Some(anns) = map.get(&f.signature()) else { continue };
        let keys: BTreeSet<(usize, usize, u32)> =
            anns.iter().map(|a| (a.start, a.length, a.slot)).collect();
        for (_, found) in find_loops(f) {
            let Ok(cl) = found else { continue };
            let Some(entry) = f.lookup_local_entry(&cl.iter) else { continue };
            if keys.contains(&(entry.start_idx, entry.length, entry.slot)) {
                out.entry(f.name.clone()).or_default().insert(cl.header);
            }
        }
    }
    out
}

/// What the conflict oracle saw, when one ran: the verdict and a witness.
type OracleReport = Option<(bool, Option<Witness>)>;

fn execute(
    p: &Program,
    entry: &str,
    args: &[ArgValue],
    setup: Setup<'_>,
    cfg: &ExecConfig,
) -> Result<(RunResult, OracleReport), ExecError> {
    let lowered = lower(p);
    let mut plans: BTreeMap<(usize, usize), LoopPlan> = BTreeMap::new();
    let mut mode = Mode::Plain;
    let mut oracle = None;
    match setup {
        Setup::Plain => {}
        Setup::Shuffled { function, header, seed } => {
            let (fidx, plan) = plan_for(p, &lowered, function, header)?;
            plans.insert((fidx, header), plan);
            mode = Mode::Shuffle { seed };
        }
        Setup::Parallel { map, workers } => {
            for (fname, headers) in annotated_loops(p, map) {
                for h in headers {
                    let (fidx, plan) = plan_for(p, &lowered, &fname, h)?;
                    plans.insert((fidx, h), plan);
                }
            }
            mode = Mode::Parallel { workers: workers.max(1) };
        }
        Setup::Oracle { function, header } => {
            let (fidx, plan) = plan_for(p, &lowered, function, header)?;
            oracle = Some(OracleState::new(fidx, header, plan.iter));
        }
    }
    let entry_idx =
        *lowered.by_name.get(entry).ok_or_else(|| ExecError::NoEntry(entry.to_string()))?;
    let mut heap = initial_heap(p);
    let arg_vals = bind_args(&p.functions[entry_idx], &mut heap, args)?;
    let mut interp = Interp {
        prog: &lowered,
        plans: &plans,
        mode,
        heap,
        steps: 0,
        limit: cfg.step_limit,
        oracle,
        next_frame: 0,
    };
    if let Some(&ci) = lowered.by_name.get("<clinit>") {
        interp.run_function(ci, &[])?;
    }
    let ret = interp.run_function(entry_idx, &arg_vals)?;
    let digest = Digester::new().run(&interp.heap, &lowered.globals, &arg_vals, ret);
    let result = RunResult { return_value: ret, heap_digest: digest, step_count: interp.steps };
    let oracle_out = interp.oracle.map(|o| (o.conflict, o.witness));
    Ok((result, oracle_out))
}

/// Sequential big-step execution from `entry`.
pub fn interpret(
    p: &Program,
    entry: &str,
    args: &[ArgValue],
    cfg: &ExecConfig,
) -> Result<RunResult, ExecError> {
    execute(p, entry, args, Setup::Plain, cfg).map(|(r, _)| r)
}

/// Sequential execution with one loop's iterations run in a seeded random
/// permutation, each with fresh private copies of its loop-local variables.
pub fn run_shuffled(
    p: &Program,
    entry: &str,
    args: &[ArgValue],
    function: &str,
    header: usize,
    seed: u64,
    cfg: &ExecConfig,
) -> Result<RunResult, ExecError> {
    execute(p, entry, args, Setup::Shuffled { function, header, seed }, cfg).map(|(r, _)| r)
}

/// Multi-worker execution: every loop the map annotates is block-partitioned
/// across `workers` threads sharing the heap, joined by a barrier before the
/// statement after the loop.
pub fn run_parallel(
    p: &Program,
    entry: &str,
    args: &[ArgValue],
    map: &AnnotationMap,
    workers: usize,
    cfg: &ExecConfig,
) -> Result<RunResult, ExecError> {
    execute(p, entry, args, Setup::Parallel { map, workers }, cfg).map(|(r, _)| r)
}

/// Sequential run logging every non-private access inside the target loop
/// with its iteration value; reports whether two iterations touch the same
/// location with at least one write.
pub fn conflict_oracle(
    p: &Program,
    entry: &str,
    args: &[ArgValue],
    function: &str,
    header: usize,
    cfg: &ExecConfig,
) -> Result<OracleOutcome, ExecError> {
    let (result, o) = execute(p, entry, args, Setup::Oracle { function, header }, cfg)?;
    let (conflict, witness) = o.unwrap_or((false, None));
    Ok(OracleOutcome { conflict, witness, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;
    use taj_core::annotate::analyze_program;
    use taj_core::solver::SolverConfig;

    const SAXPY: &str = r#"
func saxpy(a: real, x: array-real, y: array-real, n: int) : void {
  locals { i : int slot 4 span [4, 12) ; }
  0: a := param 0
  1: x := param 1
  2: y := param 2
  3: n := param 3
  4: i = 0
  5: if i >= n goto 13
  6: $t0 = x[i]
  7: $t1 = $t0 * a
  8: $t2 = y[i]
  9: $t3 = $t1 + $t2
  10: y[i] = $t3
  11: i = i + 1
  12: goto 5
  13: return
}
"#;

    const SAXPY_PRESET: &str = r#"
func saxpy(a: real, x: array-real, y: array-real, n: int) : void {
  0: a := param 0
  1: x := param 1
  2: y := param 2
  3: n := param 3
  4: y[0] = 12
  5: y[1] = 24
  6: y[2] = 36
  7: return
}
"#;

    const SWAP: &str = r#"
func swap(arr: array-int, n: int) : void {
  locals { i : int slot 2 span [3, 11) ; }
  0: arr := param 0
  1: n := param 1
  2: $m = n - 1
  3: i = 0
  4: if i >= $m goto 12
  5: $t = arr[i]
  6: $k = i + 1
  7: $u = arr[$k]
  8: arr[i] = $u
  9: arr[$k] = $t
  10: i = i + 1
  11: goto 4
  12: return
}
"#;

    fn int_preset(values: &[i64]) -> String {
        let mut body = String::from("func swap(arr: array-int, n: int) : void {\n");
        body.push_str("  0: arr := param 0\n  1: n := param 1\n");
        for (i, v) in values.iter().enumerate() {
            body.push_str(&format!("  {}: arr[{i}] = {v}\n", i + 2));
        }
        body.push_str(&format!("  {}: return\n}}\n", values.len() + 2));
        body
    }

    fn saxpy_args() -> Vec<ArgValue> {
        vec![
            ArgValue::R(2.0),
            ArgValue::AReal(vec![1.0, 2.0, 3.0]),
            ArgValue::AReal(vec![10.0, 20.0, 30.0]),
            ArgValue::I(3),
        ]
    }

    #[test]
    fn saxpy_evaluates_three_iterations() {
        let p = parse_program(SAXPY).unwrap();
        let r = interpret(&p, "saxpy", &saxpy_args(), &ExecConfig::default()).unwrap();
        assert_eq!(r.return_value, None);
        assert_eq!(r.step_count, 31);

        let preset = parse_program(SAXPY_PRESET).unwrap();
        let expect = interpret(&preset, "saxpy", &saxpy_args(), &ExecConfig::default()).unwrap();
        assert_eq!(r.heap_digest, expect.heap_digest);
    }

    #[test]
    fn zero_trip_loop_leaves_arguments_alone() {
        let p = parse_program(SAXPY).unwrap();
        let mut args = saxpy_args();
        args[3] = ArgValue::I(0);
        let seq = interpret(&p, "saxpy", &args, &ExecConfig::default()).unwrap();
        assert_eq!(seq.step_count, 4 + 1 + 1 + 1);
        let shuf = run_shuffled(&p, "saxpy", &args, "saxpy", 5, 7, &ExecConfig::default()).unwrap();
        assert_eq!(seq, shuf);
        let map = analyze_program(&p, &SolverConfig::default()).1;
        let par = run_parallel(&p, "saxpy", &args, &map, 4, &ExecConfig::default()).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn swap_rotates_left_sequentially() {
        let p = parse_program(SWAP).unwrap();
        let args = vec![ArgValue::AInt(vec![1, 2, 3, 4]), ArgValue::I(4)];
        let r = interpret(&p, "swap", &args, &ExecConfig::default()).unwrap();
        let preset = parse_program(&int_preset(&[2, 3, 4, 1])).unwrap();
        let expect = interpret(&preset, "swap", &args, &ExecConfig::default()).unwrap();
        assert_eq!(r.heap_digest, expect.heap_digest);
    }

    #[test]
    fn swap_run_in_reverse_rotates_right() {
        let reversing_seed = (0..)
            .find(|&seed| {
                let mut order = vec![0, 1, 2];
                shuffle_values(&mut order, seed);
                order == [2, 1, 0]
            })
            .unwrap();
        let p = parse_program(SWAP).unwrap();
        let args = vec![ArgValue::AInt(vec![1, 2, 3, 4]), ArgValue::I(4)];
        let r = run_shuffled(&p, "swap", &args, "swap", 4, reversing_seed, &ExecConfig::default())
            .unwrap();
        let preset = parse_program(&int_preset(&[4, 1, 2, 3])).unwrap();
        let expect = interpret(&preset, "swap", &args, &ExecConfig::default()).unwrap();
        assert_eq!(r.heap_digest, expect.heap_digest);

        let seq = interpret(&p, "swap", &args, &ExecConfig::default()).unwrap();
        assert_ne!(seq.heap_digest, r.heap_digest);
        assert_eq!(seq.step_count, r.step_count);
    }

    #[test]
    fn shuffled_saxpy_matches_sequential_for_many_seeds() {
        let p = parse_program(SAXPY).unwrap();
        let args = saxpy_args();
        let seq = interpret(&p, "saxpy", &args, &ExecConfig::default()).unwrap();
        for seed in 0..10 {
            let shuf =
                run_shuffled(&p, "saxpy", &args, "saxpy", 5, seed, &ExecConfig::default()).unwrap();
            assert_eq!(seq, shuf, "seed {seed}");
        }
    }

    #[test]
    fn parallel_saxpy_matches_sequential_for_all_worker_counts() {
        let p = parse_program(SAXPY).unwrap();
        let args = saxpy_args();
        let seq = interpret(&p, "saxpy", &args, &ExecConfig::default()).unwrap();
        let (_, map) = analyze_program(&p, &SolverConfig::default());
        assert_eq!(map.len(), 1);
        for workers in [1, 2, 4, 8] {
            let par =
                run_parallel(&p, "saxpy", &args, &map, workers, &ExecConfig::default()).unwrap();
            assert_eq!(seq, par, "workers {workers}");
        }
    }

    #[test]
    fn empty_map_runs_sequentially() {
        let p = parse_program(SWAP).unwrap();
        let args = vec![ArgValue::AInt(vec![1, 2, 3, 4]), ArgValue::I(4)];
        let seq = interpret(&p, "swap", &args, &ExecConfig::default()).unwrap();
        let par = run_parallel(&p, "swap", &args, &AnnotationMap::new(), 8, &ExecConfig::default())
            .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn single_iteration_loop_is_order_insensitive() {
        let p = parse_program(SWAP).unwrap();
        let args = vec![ArgValue::AInt(vec![9, 5]), ArgValue::I(2)];
        let seq = interpret(&p, "swap", &args, &ExecConfig::default()).unwrap();
        for seed in 0..5 {
            let shuf =
                run_shuffled(&p, "swap", &args, "swap", 4, seed, &ExecConfig::default()).unwrap();
            assert_eq!(seq, shuf);
        }
    }

    #[test]
    fn oracle_reports_the_swap_dependence() {
        let p = parse_program(SWAP).unwrap();
        let args = vec![ArgValue::AInt(vec![0; 8]), ArgValue::I(8)];
        let o = conflict_oracle(&p, "swap", &args, "swap", 4, &ExecConfig::default()).unwrap();
        assert!(o.conflict);
        assert_eq!(o.witness, Some(Witness { iter_a: 0, iter_b: 1, location: Loc::Elem(0, 1) }));
    }

    #[test]
    fn oracle_clears_independent_iterations() {
        let p = parse_program(SAXPY).unwrap();
        let o = conflict_oracle(&p, "saxpy", &saxpy_args(), "saxpy", 5, &ExecConfig::default())
            .unwrap();
        assert!(!o.conflict);
        assert_eq!(o.witness, None);
    }

    #[test]
    fn oracle_ignores_loop_private_scalars() {
        let src = r#"
func f(n: int) : int {
  locals { i : int slot 1 span [1, 6) ; s : int slot 2 span [3, 6) ; }
  0: n := param 0
  1: i = 0
  2: if i >= n goto 7
  3: s = i * 2
  4: $u = s + 1
  5: i = i + 1
  6: goto 2
  7: return n
}
"#;
        let p = parse_program(src).unwrap();
        let o =
            conflict_oracle(&p, "f", &[ArgValue::I(6)], "f", 2, &ExecConfig::default()).unwrap();
        assert!(!o.conflict);
        assert_eq!(o.result.return_value, Some(Value::I(6)));
    }

    #[test]
    fn globals_and_clinit_run_before_entry() {
        let src = r#"
global TOTAL: int
global GRID: array-int[4]
entry main

func <clinit>() : void {
  0: global TOTAL = 7
  1: return
}

func main() : int {
  0: $g = global TOTAL
  1: $r = global GRID
  2: $r[0] = $g
  3: return $g
}
"#;
        let p = parse_program(src).unwrap();
        let a = interpret(&p, "main", &[], &ExecConfig::default()).unwrap();
        assert_eq!(a.return_value, Some(Value::I(7)));
        assert_eq!(a.step_count, 6);
        let b = interpret(&p, "main", &[], &ExecConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_calls_inside_loops_execute() {
        let src = r#"
func sq(v: int) : int {
  0: v := param 0
  1: $r = v * v
  2: return $r
}

func kernel(arr: array-int, n: int) : void {
  locals { i : int slot 2 span [2, 8) ; }
  0: arr := param 0
  1: n := param 1
  2: i = 0
  3: if i >= n goto 9
  4: $v = arr[i]
  5: $s = call sq($v)
  6: arr[i] = $s
  7: i = i + 1
  8: goto 3
  9: return
}
"#;
        let p = parse_program(src).unwrap();
        let args = vec![ArgValue::AInt(vec![1, 2, 3, 4]), ArgValue::I(4)];
        let seq = interpret(&p, "kernel", &args, &ExecConfig::default()).unwrap();
        let preset = parse_program(&int_preset(&[1, 4, 9, 16])).unwrap();
        let expect = interpret(&preset, "swap", &args, &ExecConfig::default()).unwrap();
        assert_eq!(seq.heap_digest, expect.heap_digest);

        let (_, map) = analyze_program(&p, &SolverConfig::default());
        assert!(map.contains_key("kernel(array-int,int):void"));
        for workers in [1, 2, 4, 8] {
            let par =
                run_parallel(&p, "kernel", &args, &map, workers, &ExecConfig::default()).unwrap();
            assert_eq!(seq, par, "workers {workers}");
        }
        for seed in 0..10 {
            let shuf = run_shuffled(&p, "kernel", &args, "kernel", 3, seed, &ExecConfig::default())
                .unwrap();
            assert_eq!(seq, shuf, "seed {seed}");
        }
    }

    #[test]
    fn annotated_loop_resolution_follows_the_map() {
        let p = parse_program(SAXPY).unwrap();
        let (_, map) = analyze_program(&p, &SolverConfig::default());
        let loops = annotated_loops(&p, &map);
        assert_eq!(loops.len(), 1);
        assert_eq!(loops["saxpy"], BTreeSet::from([5]));
    }

    #[test]
    fn step_limit_stops_execution() {
        let p = parse_program(SAXPY).unwrap();
        let err =
            interpret(&p, "saxpy", &saxpy_args(), &ExecConfig { step_limit: 10 }).unwrap_err();
        assert_eq!(err, ExecError::StepLimit);
    }

    #[test]
    fn out_of_bounds_access_is_reported() {
        let p = parse_program(SAXPY).unwrap();
        let args = vec![
            ArgValue::R(2.0),
            ArgValue::AReal(vec![1.0]),
            ArgValue::AReal(vec![1.0]),
            ArgValue::I(5),
        ];
        let err = interpret(&p, "saxpy", &args, &ExecConfig::default()).unwrap_err();
        assert_eq!(
            err,
            ExecError::OutOfBounds { function: "saxpy".into(), statement: 6, index: 1, len: 1 }
        );
    }

    #[test]
    fn external_calls_are_runtime_errors() {
        let src = "func f() : void {\n  0: call missing()\n  1: return\n}\n";
        let p = parse_program(src).unwrap();
        let err = interpret(&p, "f", &[], &ExecConfig::default()).unwrap_err();
        assert_eq!(
            err,
            ExecError::ExternalCall {
                function: "f".into(),
                statement: 0,
                callee: "missing".into()
            }
        );
    }

    #[test]
    fn uninitialized_reads_are_runtime_errors() {
        let src = "func f() : int {\n  locals { x : int slot 0 span [0, 2) ; }\n  0: $y = x + 1\n  1: return $y\n}\n";
        let p = parse_program(src).unwrap();
        let err = interpret(&p, "f", &[], &ExecConfig::default()).unwrap_err();
        assert_eq!(
            err,
            ExecError::UninitRead { function: "f".into(), statement: 0, name: "x".into() }
        );
    }

    #[test]
    fn missing_entry_is_reported() {
        let p = parse_program(SAXPY).unwrap();
        let err = interpret(&p, "nope", &[], &ExecConfig::default()).unwrap_err();
        assert_eq!(err, ExecError::NoEntry("nope".into()));
    }

    #[test]
    fn argument_arity_and_kinds_are_checked() {
        let p = parse_program(SAXPY).unwrap();
        let err = interpret(&p, "saxpy", &[], &ExecConfig::default()).unwrap_err();
        assert!(matches!(err, ExecError::BadArgs(_)));
        let args = vec![
            ArgValue::AInt(vec![1]),
            ArgValue::AReal(vec![1.0]),
            ArgValue::AReal(vec![1.0]),
            ArgValue::I(1),
        ];
        let err = interpret(&p, "saxpy", &args, &ExecConfig::default()).unwrap_err();
        assert!(matches!(err, ExecError::BadArgs(_)));
    }

    #[test]
    fn digest_renumbers_objects_canonically() {
        let template = |first: &str, second: &str, fill: i64| {
            format!(
                r#"
func f() : object {{
  locals {{ a : array-int slot 0 span [0, 8) ; b : array-int slot 1 span [0, 8) ; o : object slot 2 span [0, 8) ; }}
  0: {first}
  1: {second}
  2: o = new object
  3: a[0] = {fill}
  4: b[0] = 9
  5: o.p = a
  6: o.q = b
  7: return o
}}
"#
            )
        };
        let a_first = "a = new array-int[2]";
        let b_first = "b = new array-int[3]";
        let pa = parse_program(&template(a_first, b_first, 7)).unwrap();
        let pb = parse_program(&template(b_first, a_first, 7)).unwrap();
        let ra = interpret(&pa, "f", &[], &ExecConfig::default()).unwrap();
        let rb = interpret(&pb, "f", &[], &ExecConfig::default()).unwrap();
        assert_eq!(ra.heap_digest, rb.heap_digest);

        let pc = parse_program(&template(a_first, b_first, 8)).unwrap();
        let rc = interpret(&pc, "f", &[], &ExecConfig::default()).unwrap();
        assert_ne!(ra.heap_digest, rc.heap_digest);
    }
}
