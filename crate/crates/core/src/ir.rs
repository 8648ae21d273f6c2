//! TAJ program representation.
//!
//! Statements are three-address: every operand is a local name or an integer
//! constant, and every statement performs at most one operation. Compiler
//! temporaries are `$`-prefixed and need no local-table entry; every other
//! local must either be a declared parameter or carry a [`LocalVarEntry`]
//! giving its slot and live statement range.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Value kinds. Arrays hold scalars only; `Object` values carry named fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Real,
    ArrayInt,
    ArrayReal,
    Object,
}

impl Kind {
    pub fn is_ref(self) -> bool {
        matches!(self, Kind::ArrayInt | Kind::ArrayReal | Kind::Object)
    }

    pub fn text(self) -> &'static str {
        match self {
            Kind::Int => "int",
            Kind::Real => "real",
            Kind::ArrayInt => "array-int",
            Kind::ArrayReal => "array-real",
            Kind::Object => "object",
        }
    }
}

/// An atomic operand: a local variable or an integer literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Local(String),
    Const(i64),
}

impl Operand {
    pub fn as_local(&self) -> Option<&str> {
        match self {
            Operand::Local(n) => Some(n),
            Operand::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn text(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }
}

/// Right-hand side of a plain assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    Local(String),
    Bin(BinOp, Operand, Operand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn text(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    /// The operator accepting exactly the values this one rejects.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    /// The same relation with its operands swapped.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        }
    }
}

/// A single comparison; branch conditions are never compound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondExpr {
    pub lhs: Operand,
    pub op: CmpOp,
    pub rhs: Operand,
}

/// What a `new` statement allocates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Alloc {
    ArrayInt(Operand),
    ArrayReal(Operand),
    Object,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    /// `x := param k` binds parameter `k`; only legal as a prefix of the
    /// statement list, one per parameter, in declaration order.
    Identity {
        target: String,
        param: usize,
    },
    Assign {
        target: String,
        expr: Expr,
    },
    ArrayLoad {
        target: String,
        base: String,
        index: Operand,
    },
    ArrayStore {
        base: String,
        index: Operand,
        value: Operand,
    },
    FieldLoad {
        target: String,
        base: String,
        field: String,
    },
    FieldStore {
        base: String,
        field: String,
        value: Operand,
    },
    GlobalLoad {
        target: String,
        global: String,
    },
    GlobalStore {
        global: String,
        value: Operand,
    },
    New {
        target: String,
        alloc: Alloc,
    },
    /// Direct call by function name; a target name not defined in the
    /// program is an external callee.
    Call {
        target: Option<String>,
        callee: String,
        args: Vec<Operand>,
    },
    IfGoto {
        cond: CondExpr,
        target: usize,
    },
    Goto {
        target: usize,
    },
    Return {
        value: Option<Operand>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub index: usize,
    pub kind: StmtKind,
}

impl Statement {
    /// The local this statement defines, if any.
    pub fn def_target(&self) -> Option<&str> {
        match &self.kind {
            StmtKind::Identity { target, .. }
            | StmtKind::Assign { target, .. }
            | StmtKind::ArrayLoad { target, .. }
            | StmtKind::FieldLoad { target, .. }
            | StmtKind::GlobalLoad { target, .. }
            | StmtKind::New { target, .. } => Some(target),
            StmtKind::Call { target, .. } => target.as_deref(),
            _ => None,
        }
    }

    /// Every local name this statement reads.
    pub fn uses(&self) -> Vec<&str> {
        fn op<'a>(out: &mut Vec<&'a str>, o: &'a Operand) {
            if let Operand::Local(n) = o {
                out.push(n.as_str());
            }
        }
        let mut out = Vec::new();
        match &self.kind {
            StmtKind::Identity { .. } => {}
            StmtKind::Assign { expr, .. } => match expr {
                Expr::Const(_) => {}
                Expr::Local(n) => out.push(n.as_str()),
                Expr::Bin(_, a, b) => {
                    op(&mut out, a);
                    op(&mut out, b);
                }
            },
            StmtKind::ArrayLoad { base, index, .. } => {
                out.push(base.as_str());
                op(&mut out, index);
            }
            StmtKind::ArrayStore { base, index, value } => {
                out.push(base.as_str());
                op(&mut out, index);
                op(&mut out, value);
            }
            StmtKind::FieldLoad { base, .. } => out.push(base.as_str()),
            StmtKind::FieldStore { base, value, .. } => {
                out.push(base.as_str());
                op(&mut out, value);
            }
            StmtKind::GlobalLoad { .. } => {}
            StmtKind::GlobalStore { value, .. } => op(&mut out, value),
            StmtKind::New { alloc, .. } => match alloc {
                Alloc::ArrayInt(sz) | Alloc::ArrayReal(sz) => op(&mut out, sz),
                Alloc::Object => {}
            },
            StmtKind::Call { args, .. } => {
                for a in args {
                    op(&mut out, a);
                }
            }
            StmtKind::IfGoto { cond, .. } => {
                op(&mut out, &cond.lhs);
                op(&mut out, &cond.rhs);
            }
            StmtKind::Goto { .. } => {}
            StmtKind::Return { value } => {
                if let Some(v) = value {
                    op(&mut out, v);
                }
            }
        }
        out
    }
}

/// Local-variable table row: `name` occupies `slot` over statement indices
/// `[start_idx, start_idx + length)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalVarEntry {
    pub name: String,
    pub kind: Kind,
    pub slot: u32,
    pub start_idx: usize,
    pub length: usize,
}

impl LocalVarEntry {
    pub fn end_idx(&self) -> usize {
        self.start_idx + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetKind {
    Void,
    Value(Kind),
}

impl RetKind {
    pub fn text(self) -> &'static str {
        match self {
            RetKind::Void => "void",
            RetKind::Value(k) => k.text(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: RetKind,
    pub local_table: Vec<LocalVarEntry>,
    pub statements: Vec<Statement>,
}

impl FunctionDef {
    /// Canonical signature text: `name(kind,kind,...):ret`.
    pub fn signature(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.name);
        s.push('(');
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(p.kind.text());
        }
        s.push(')');
        s.push(':');
        s.push_str(self.ret.text());
        s
    }

    pub fn returns_value(&self) -> bool {
        !matches!(self.ret, RetKind::Void)
    }

    /// First table entry declared for `name`, if any.
    pub fn lookup_local_entry(&self, name: &str) -> Option<&LocalVarEntry> {
        self.local_table.iter().find(|e| e.name == name)
    }

    pub fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalKind {
    Int,
    Real,
    ArrayInt,
    ArrayReal,
}

impl GlobalKind {
    pub fn is_array(self) -> bool {
        matches!(self, GlobalKind::ArrayInt | GlobalKind::ArrayReal)
    }

    pub fn text(self) -> &'static str {
        match self {
            GlobalKind::Int => "int",
            GlobalKind::Real => "real",
            GlobalKind::ArrayInt => "array-int",
            GlobalKind::ArrayReal => "array-real",
        }
    }
}

/// A program-level variable; models a static field. Array globals with an
/// `init_size` start life as a zeroed array of that many elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDecl {
    pub name: String,
    pub kind: GlobalKind,
    pub init_size: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<FunctionDef>,
    /// Name of the designated entry function, when the program declares one.
    pub entry: Option<String>,
}

impl Program {
    pub fn function_by_name(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_by_signature(&self, sig: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.signature() == sig)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }
}

/// One validation finding. Validation reports everything it sees rather than
/// stopping at the first problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub function: Option<String>,
    pub statement: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.function, self.statement) {
            (Some(fun), Some(s)) => write!(f, "{fun}: statement {s}: {}", self.message),
            (Some(fun), None) => write!(f, "{fun}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

fn violation(function: Option<&str>, statement: Option<usize>, message: String) -> Violation {
    Violation { function: function.map(Into::into), statement, message }
}

fn is_temp(name: &str) -> bool {
    name.starts_with('$')
}

/// Checks every structural invariant of `p` and returns the violations found
/// (empty means valid).
pub fn validate_program(p: &Program) -> Vec<Violation> {
    use alloc::collections::BTreeSet;
    use alloc::format;

    let mut out = Vec::new();

    let mut global_names = BTreeSet::new();
    for g in &p.globals {
        if !global_names.insert(g.name.as_str()) {
            out.push(violation(None, None, format!("duplicate global `{}`", g.name)));
        }
        if g.init_size.is_some() && !g.kind.is_array() {
            out.push(violation(
                None,
                None,
                format!("scalar global `{}` declares an initial size", g.name),
            ));
        }
    }

    let mut signatures = BTreeSet::new();
    let mut names = BTreeSet::new();
    for f in &p.functions {
        if !signatures.insert(f.signature()) {
            out.push(violation(None, None, format!("duplicate signature `{}`", f.signature())));
        }
        if !names.insert(f.name.as_str()) {
            out.push(violation(
                None,
                None,
                format!("duplicate function name `{}` (call sites resolve by name)", f.name),
            ));
        }
    }

    if let Some(e) = &p.entry {
        if p.function_by_name(e).is_none() {
            out.push(violation(None, None, format!("entry `{e}` is not defined")));
        }
    }

    for f in &p.functions {
        validate_function(p, f, &mut out);
    }
    out
}

fn validate_function(p: &Program, f: &FunctionDef, out: &mut Vec<Violation>) {
    use alloc::collections::BTreeSet;
    use alloc::format;

    let fname = Some(f.name.as_str());
    let n = f.statements.len();

    for (pos, s) in f.statements.iter().enumerate() {
        if s.index != pos {
            out.push(violation(
                fname,
                Some(pos),
                format!("statement carries index {}, expected {}", s.index, pos),
            ));
        }
    }

    // Identity prefix: one bind per parameter, in order, then none at all.
    for (pos, param) in f.params.iter().enumerate() {
        match f.statements.get(pos).map(|s| &s.kind) {
            Some(StmtKind::Identity { target, param: k }) if *k == pos && *target == param.name => {
            }
            _ => {
                out.push(violation(
                    fname,
                    Some(pos),
                    format!("expected `{} := param {pos}` binding parameter {pos}", param.name),
                ));
            }
        }
    }
    for s in f.statements.iter().skip(f.params.len()) {
        if matches!(s.kind, StmtKind::Identity { .. }) {
            out.push(violation(
                fname,
                Some(s.index),
                "identity statement outside the parameter prefix".into(),
            ));
        }
    }

    // Local table: ranges in bounds, names unique, slots unique where ranges
    // overlap, no shadowing of parameters or temporaries.
    let mut table_names = BTreeSet::new();
    for e in &f.local_table {
        if !table_names.insert(e.name.as_str()) {
            out.push(violation(fname, None, format!("duplicate local-table entry `{}`", e.name)));
        }
        if is_temp(&e.name) {
            out.push(violation(fname, None, format!("`$`-temporary `{}` in local table", e.name)));
        }
        if f.is_param(&e.name) {
            out.push(violation(fname, None, format!("parameter `{}` in local table", e.name)));
        }
        if e.length == 0 || e.end_idx() > n {
            out.push(violation(
                fname,
                None,
                format!(
                    "local `{}` spans [{}, {}) outside statements [0, {n})",
                    e.name,
                    e.start_idx,
                    e.end_idx()
                ),
            ));
        }
    }
    for (i, a) in f.local_table.iter().enumerate() {
        for b in &f.local_table[i + 1..] {
            let overlap = a.start_idx < b.end_idx() && b.start_idx < a.end_idx();
            if a.slot == b.slot && overlap {
                out.push(violation(
                    fname,
                    None,
                    format!(
                        "locals `{}` and `{}` share slot {} over overlapping ranges",
                        a.name, b.name, a.slot
                    ),
                ));
            }
        }
    }

    for s in &f.statements {
        let at = Some(s.index);

        // Referenced locals must be declared somewhere: parameter, table
        // entry, or `$`-temporary.
        let check_name = |name: &str, out: &mut Vec<Violation>| {
            if !is_temp(name) && !f.is_param(name) && f.lookup_local_entry(name).is_none() {
                out.push(violation(fname, at, format!("local `{name}` has no table entry")));
            }
        };
        for u in s.uses() {
            check_name(u, out);
        }
        if let Some(d) = s.def_target() {
            check_name(d, out);
        }

        match &s.kind {
            StmtKind::Identity { param, .. } => {
                if *param >= f.params.len() {
                    out.push(violation(fname, at, format!("parameter index {param} out of range")));
                }
            }
            StmtKind::GlobalLoad { global, .. } | StmtKind::GlobalStore { global, .. } => {
                if p.global(global).is_none() {
                    out.push(violation(fname, at, format!("unknown global `{global}`")));
                }
            }
            StmtKind::Call { target, callee, args } => {
                if let Some(callee_def) = p.function_by_name(callee) {
                    if callee_def.params.len() != args.len() {
                        out.push(violation(
                            fname,
                            at,
                            format!(
                                "call to `{callee}` passes {} arguments, expected {}",
                                args.len(),
                                callee_def.params.len()
                            ),
                        ));
                    }
                    if target.is_some() && !callee_def.returns_value() {
                        out.push(violation(
                            fname,
                            at,
                            format!("void call to `{callee}` assigns a target"),
                        ));
                    }
                }
                // Unresolved callees are legal: they are external functions.
            }
            StmtKind::IfGoto { target, .. } | StmtKind::Goto { target } => {
                if *target >= n {
                    out.push(violation(fname, at, format!("branch target {target} out of range")));
                }
            }
            StmtKind::Return { value } => {
                if f.returns_value() && value.is_none() {
                    out.push(violation(fname, at, "missing return value".into()));
                }
                if !f.returns_value() && value.is_some() {
                    out.push(violation(fname, at, "void function returns a value".into()));
                }
            }
            _ => {}
        }

        // Control must not fall off the end of the function.
        if s.index + 1 == n {
            let falls = !matches!(s.kind, StmtKind::Goto { .. } | StmtKind::Return { .. });
            if falls {
                out.push(violation(fname, at, "control reaches the end of the function".into()));
            }
        }
    }

    if f.statements.is_empty() {
        out.push(violation(fname, None, "function has no statements".into()));
    }
}
