//! TAJ text format: parser and printer.
//!
//! One statement per line in canonical output, `k:` prefixes giving the
//! statement index. The parser itself is token-based and accepts any
//! whitespace layout; `parse_program` additionally runs the structural
//! validator so a returned `Program` always satisfies the IR invariants.

use std::fmt;

use taj_core::ir::{
    validate_program, Alloc, BinOp, CmpOp, CondExpr, Expr, FunctionDef, GlobalDecl, GlobalKind,
    Kind, LocalVarEntry, Operand, Param, Program, RetKind, Statement, StmtKind, Violation,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TextError {
    Syntax { line: usize, col: usize, message: String },
    Invalid(Vec<Violation>),
}

impl fmt::Display for TextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextError::Syntax { line, col, message } => {
                write!(f, "line {line}, column {col}: {message}")
            }
            TextError::Invalid(violations) => {
                let mut sep = "";
                for v in violations {
                    write!(f, "{sep}{v}")?;
                    sep = "\n";
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for TextError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::Int(v) => v.to_string(),
            Tok::Punct(p) => (*p).to_string(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_' || c == b'$'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'/') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        if self.peek().is_some_and(is_ident_start) {
            self.bump();
        }
        while self.peek().is_some_and(is_ident_char) {
            self.bump();
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn error(&self, message: String) -> TextError {
        TextError::Syntax { line: self.line, col: self.col, message }
    }

    fn next_token(&mut self) -> Result<Option<(Tok, usize, usize)>, TextError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let tok = if is_ident_start(c) {
            let mut name = self.word();
            // Kind names are written with a hyphen; merge only when the
            // hyphen is adjacent on both sides so `a - b` still lexes as
            // subtraction.
            if name == "array" && self.peek() == Some(b'-') {
                let next = self.src.get(self.pos + 1).copied().unwrap_or(0);
                if is_ident_start(next) {
                    self.bump();
                    name.push('-');
                    name.push_str(&self.word());
                }
            }
            Tok::Ident(name)
        } else if c.is_ascii_digit() {
            let start = self.pos;
            while self.peek().is_some_and(|d| d.is_ascii_digit()) {
                self.bump();
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let value: i64 = text
                .parse()
                .map_err(|_| self.error(format!("integer literal `{text}` out of range")))?;
            Tok::Int(value)
        } else if c == b'<' && self.src.get(self.pos + 1).copied().is_some_and(is_ident_start) {
            // Runtime-reserved names such as `<clinit>` read as one token.
            let save = (self.pos, self.line, self.col);
            self.bump();
            let name = self.word();
            if self.peek() == Some(b'>') {
                self.bump();
                Tok::Ident(format!("<{name}>"))
            } else {
                (self.pos, self.line, self.col) = save;
                self.bump();
                Tok::Punct("<")
            }
        } else {
            let two: &[u8] = &self.src[self.pos..(self.pos + 2).min(self.src.len())];
            let punct2 = match two {
                b":=" => Some(":="),
                b"==" => Some("=="),
                b"!=" => Some("!="),
                b"<=" => Some("<="),
                b">=" => Some(">="),
                _ => None,
            };
            if let Some(p) = punct2 {
                self.bump();
                self.bump();
                Tok::Punct(p)
            } else {
                let p = match c {
                    b':' => ":",
                    b'=' => "=",
                    b'[' => "[",
                    b']' => "]",
                    b'(' => "(",
                    b')' => ")",
                    b'{' => "{",
                    b'}' => "}",
                    b',' => ",",
                    b';' => ";",
                    b'.' => ".",
                    b'+' => "+",
                    b'-' => "-",
                    b'*' => "*",
                    b'<' => "<",
                    b'>' => ">",
                    _ => {
                        return Err(self.error(format!("unexpected character `{}`", c as char)));
                    }
                };
                self.bump();
                Tok::Punct(p)
            }
        };
        Ok(Some((tok, line, col)))
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, TextError> {
    let mut lexer = Lexer::new(src);
    let mut out = Vec::new();
    while let Some(t) = lexer.next_token()? {
        out.push(t);
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Tok> {
        self.toks.get(self.pos + ahead).map(|(t, _, _)| t)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(&(_, line, col)) => (line, col),
            None => match self.toks.last() {
                Some(&(_, line, col)) => (line, col + 1),
                None => (1, 1),
            },
        }
    }

    fn error(&self, message: String) -> TextError {
        let (line, col) = self.here();
        TextError::Syntax { line, col, message }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, punct: &'static str) -> Result<(), TextError> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == punct => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected `{punct}`, found `{}`", t.text()))),
            None => Err(self.error(format!("expected `{punct}`, found end of input"))),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), TextError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == word => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected `{word}`, found `{}`", t.text()))),
            None => Err(self.error(format!("expected `{word}`, found end of input"))),
        }
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == word)
    }

    fn at_punct(&self, punct: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(p)) if *p == punct)
    }

    fn ident(&mut self) -> Result<String, TextError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.error(format!("expected a name, found `{}`", t.text()))),
            None => Err(self.error("expected a name, found end of input".to_string())),
        }
    }

    fn int(&mut self) -> Result<i64, TextError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            Some(t) => Err(self.error(format!("expected an integer, found `{}`", t.text()))),
            None => Err(self.error("expected an integer, found end of input".to_string())),
        }
    }

    fn index(&mut self) -> Result<usize, TextError> {
        let v = self.int()?;
        usize::try_from(v).map_err(|_| self.error(format!("negative index `{v}`")))
    }

    fn kind(&mut self) -> Result<Kind, TextError> {
        let name = self.ident()?;
        match name.as_str() {
            "int" => Ok(Kind::Int),
            "real" => Ok(Kind::Real),
            "array-int" => Ok(Kind::ArrayInt),
            "array-real" => Ok(Kind::ArrayReal),
            "object" => Ok(Kind::Object),
            _ => Err(self.error(format!("unknown kind `{name}`"))),
        }
    }

    fn operand(&mut self) -> Result<Operand, TextError> {
        if self.at_punct("-") {
            self.pos += 1;
            let v = self.int()?;
            return Ok(Operand::Const(-v));
        }
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Operand::Const(v))
            }
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(Operand::Local(s))
            }
            Some(t) => Err(self.error(format!("expected an operand, found `{}`", t.text()))),
            None => Err(self.error("expected an operand, found end of input".to_string())),
        }
    }

    fn bin_op(&self) -> Option<BinOp> {
        match self.peek() {
            Some(Tok::Punct("+")) => Some(BinOp::Add),
            Some(Tok::Punct("-")) => Some(BinOp::Sub),
            Some(Tok::Punct("*")) => Some(BinOp::Mul),
            _ => None,
        }
    }

    fn cmp_op(&mut self) -> Result<CmpOp, TextError> {
        let op = match self.peek() {
            Some(Tok::Punct("<")) => CmpOp::Lt,
            Some(Tok::Punct("<=")) => CmpOp::Le,
            Some(Tok::Punct(">")) => CmpOp::Gt,
            Some(Tok::Punct(">=")) => CmpOp::Ge,
            Some(Tok::Punct("==")) => CmpOp::Eq,
            Some(Tok::Punct("!=")) => CmpOp::Ne,
            Some(t) => {
                return Err(self.error(format!("expected a comparison, found `{}`", t.text())))
            }
            None => return Err(self.error("expected a comparison, found end of input".to_string())),
        };
        self.pos += 1;
        Ok(op)
    }

    fn global(&mut self) -> Result<GlobalDecl, TextError> {
        self.keyword("global")?;
        let name = self.ident()?;
        self.expect(":")?;
        let kind_name = self.ident()?;
        let kind = match kind_name.as_str() {
            "int" => GlobalKind::Int,
            "real" => GlobalKind::Real,
            "array-int" => GlobalKind::ArrayInt,
            "array-real" => GlobalKind::ArrayReal,
            _ => return Err(self.error(format!("unknown global kind `{kind_name}`"))),
        };
        let init_size = if self.at_punct("[") {
            if !kind.is_array() {
                return Err(self.error(format!("scalar global `{name}` cannot take a size")));
            }
            self.expect("[")?;
            let size = self.index()?;
            self.expect("]")?;
            Some(size)
        } else {
            None
        };
        Ok(GlobalDecl { name, kind, init_size })
    }

    fn locals_block(&mut self) -> Result<Vec<LocalVarEntry>, TextError> {
        self.keyword("locals")?;
        self.expect("{")?;
        let mut table = Vec::new();
        while !self.at_punct("}") {
            let name = self.ident()?;
            self.expect(":")?;
            let kind = self.kind()?;
            self.keyword("slot")?;
            let slot = self.index()? as u32;
            self.keyword("span")?;
            self.expect("[")?;
            let start_idx = self.index()?;
            self.expect(",")?;
            let end_idx = self.index()?;
            self.expect(")")?;
            self.expect(";")?;
            if end_idx < start_idx {
                return Err(self.error(format!("span of `{name}` ends before it starts")));
            }
            table.push(LocalVarEntry { name, kind, slot, start_idx, length: end_idx - start_idx });
        }
        self.expect("}")?;
        Ok(table)
    }

    fn call_args(&mut self) -> Result<Vec<Operand>, TextError> {
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.at_punct(")") {
            loop {
                args.push(self.operand()?);
                if self.at_punct(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(args)
    }

    fn assign_rhs(&mut self, target: String) -> Result<StmtKind, TextError> {
        if self.at_word("new") {
            self.pos += 1;
            let kind_name = self.ident()?;
            return match kind_name.as_str() {
                "object" => Ok(StmtKind::New { target, alloc: Alloc::Object }),
                "array-int" | "array-real" => {
                    self.expect("[")?;
                    let size = self.operand()?;
                    self.expect("]")?;
                    let alloc = if kind_name == "array-int" {
                        Alloc::ArrayInt(size)
                    } else {
                        Alloc::ArrayReal(size)
                    };
                    Ok(StmtKind::New { target, alloc })
                }
                _ => Err(self.error(format!("cannot allocate kind `{kind_name}`"))),
            };
        }
        if self.at_word("call") {
            self.pos += 1;
            let callee = self.ident()?;
            let args = self.call_args()?;
            return Ok(StmtKind::Call { target: Some(target), callee, args });
        }
        if self.at_word("global") {
            self.pos += 1;
            let global = self.ident()?;
            return Ok(StmtKind::GlobalLoad { target, global });
        }
        let first = self.operand()?;
        if let Operand::Local(base) = &first {
            if self.at_punct("[") {
                self.pos += 1;
                let index = self.operand()?;
                self.expect("]")?;
                return Ok(StmtKind::ArrayLoad { target, base: base.clone(), index });
            }
            if self.at_punct(".") {
                self.pos += 1;
                let field = self.ident()?;
                return Ok(StmtKind::FieldLoad { target, base: base.clone(), field });
            }
        }
        if let Some(op) = self.bin_op() {
            self.pos += 1;
            let rhs = self.operand()?;
            return Ok(StmtKind::Assign { target, expr: Expr::Bin(op, first, rhs) });
        }
        let expr = match first {
            Operand::Const(v) => Expr::Const(v),
            Operand::Local(n) => Expr::Local(n),
        };
        Ok(StmtKind::Assign { target, expr })
    }

    fn statement_kind(&mut self) -> Result<StmtKind, TextError> {
        if self.at_word("return") {
            self.pos += 1;
            // A following bare integer is the return value unless it is the
            // next statement's `k:` prefix.
            let value = match (self.peek(), self.peek_at(1)) {
                (Some(Tok::Int(_)), Some(Tok::Punct(":")))
                | (Some(Tok::Punct("}")), _)
                | (None, _) => None,
                (Some(Tok::Int(_)), None) => Some(self.operand()?),
                (Some(Tok::Ident(_)), _) | (Some(Tok::Int(_)), _) | (Some(Tok::Punct("-")), _) => {
                    Some(self.operand()?)
                }
                _ => None,
            };
            return Ok(StmtKind::Return { value });
        }
        if self.at_word("goto") {
            self.pos += 1;
            return Ok(StmtKind::Goto { target: self.index()? });
        }
        if self.at_word("if") {
            self.pos += 1;
            let lhs = self.operand()?;
            let op = self.cmp_op()?;
            let rhs = self.operand()?;
            self.keyword("goto")?;
            let target = self.index()?;
            return Ok(StmtKind::IfGoto { cond: CondExpr { lhs, op, rhs }, target });
        }
        if self.at_word("call") {
            self.pos += 1;
            let callee = self.ident()?;
            let args = self.call_args()?;
            return Ok(StmtKind::Call { target: None, callee, args });
        }
        if self.at_word("global") {
            self.pos += 1;
            let global = self.ident()?;
            self.expect("=")?;
            let value = self.operand()?;
            return Ok(StmtKind::GlobalStore { global, value });
        }
        let name = self.ident()?;
        if self.at_punct(":=") {
            self.pos += 1;
            self.keyword("param")?;
            let param = self.index()?;
            return Ok(StmtKind::Identity { target: name, param });
        }
        if self.at_punct("[") {
            self.pos += 1;
            let index = self.operand()?;
            self.expect("]")?;
            self.expect("=")?;
            let value = self.operand()?;
            return Ok(StmtKind::ArrayStore { base: name, index, value });
        }
        if self.at_punct(".") {
            self.pos += 1;
            let field = self.ident()?;
            self.expect("=")?;
            let value = self.operand()?;
            return Ok(StmtKind::FieldStore { base: name, field, value });
        }
        self.expect("=")?;
        self.assign_rhs(name)
    }

    fn function(&mut self) -> Result<FunctionDef, TextError> {
        self.keyword("func")?;
        let name = self.ident()?;
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.at_punct(")") {
            loop {
                let pname = self.ident()?;
                self.expect(":")?;
                let kind = self.kind()?;
                params.push(Param { name: pname, kind });
                if self.at_punct(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(")")?;
        self.expect(":")?;
        let ret = if self.at_word("void") {
            self.pos += 1;
            RetKind::Void
        } else {
            RetKind::Value(self.kind()?)
        };
        self.expect("{")?;
        let local_table = if self.at_word("locals") { self.locals_block()? } else { Vec::new() };
        let mut statements = Vec::new();
        while !self.at_punct("}") {
            let index = self.index()?;
            self.expect(":")?;
            if index != statements.len() {
                return Err(self.error(format!(
                    "statement index {index} where {} was expected",
                    statements.len()
                )));
            }
            let kind = self.statement_kind()?;
            statements.push(Statement { index, kind });
        }
        self.expect("}")?;
        Ok(FunctionDef { name, params, ret, local_table, statements })
    }
}

/// Parses TAJ source and validates every IR invariant.
pub fn parse_program(src: &str) -> Result<Program, TextError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let mut globals = Vec::new();
    let mut functions = Vec::new();
    let mut entry = None;
    loop {
        if p.at_word("global") {
            globals.push(p.global()?);
        } else if p.at_word("entry") {
            p.bump();
            entry = Some(p.ident()?);
        } else if p.at_word("func") {
            functions.push(p.function()?);
        } else if p.peek().is_none() {
            break;
        } else {
            return Err(p.error(format!(
                "expected `global`, `entry`, or `func`, found `{}`",
                p.peek().unwrap().text()
            )));
        }
    }
    let program = Program { globals, functions, entry };
    let violations = validate_program(&program);
    if !violations.is_empty() {
        return Err(TextError::Invalid(violations));
    }
    Ok(program)
}

fn write_operand(out: &mut String, o: &Operand) {
    match o {
        Operand::Local(n) => out.push_str(n),
        Operand::Const(v) => out.push_str(&v.to_string()),
    }
}

fn write_statement(out: &mut String, s: &Statement) {
    out.push_str(&format!("  {}: ", s.index));
    match &s.kind {
        StmtKind::Identity { target, param } => {
            out.push_str(&format!("{target} := param {param}"));
        }
        StmtKind::Assign { target, expr } => {
            out.push_str(&format!("{target} = "));
            match expr {
                Expr::Const(v) => out.push_str(&v.to_string()),
                Expr::Local(n) => out.push_str(n),
                Expr::Bin(op, a, b) => {
                    write_operand(out, a);
                    out.push_str(&format!(" {} ", op.text()));
                    write_operand(out, b);
                }
            }
        }
        StmtKind::ArrayLoad { target, base, index } => {
            out.push_str(&format!("{target} = {base}["));
            write_operand(out, index);
            out.push(']');
        }
        StmtKind::ArrayStore { base, index, value } => {
            out.push_str(&format!("{base}["));
            write_operand(out, index);
            out.push_str("] = ");
            write_operand(out, value);
        }
        StmtKind::FieldLoad { target, base, field } => {
            out.push_str(&format!("{target} = {base}.{field}"));
        }
        StmtKind::FieldStore { base, field, value } => {
            out.push_str(&format!("{base}.{field} = "));
            write_operand(out, value);
        }
        StmtKind::GlobalLoad { target, global } => {
            out.push_str(&format!("{target} = global {global}"));
        }
        StmtKind::GlobalStore { global, value } => {
            out.push_str(&format!("global {global} = "));
            write_operand(out, value);
        }
        StmtKind::New { target, alloc } => {
            out.push_str(&format!("{target} = new "));
            match alloc {
                Alloc::ArrayInt(size) => {
                    out.push_str("array-int[");
                    write_operand(out, size);
                    out.push(']');
                }
                Alloc::ArrayReal(size) => {
                    out.push_str("array-real[");
                    write_operand(out, size);
                    out.push(']');
                }
                Alloc::Object => out.push_str("object"),
            }
        }
        StmtKind::Call { target, callee, args } => {
            if let Some(t) = target {
                out.push_str(&format!("{t} = "));
            }
            out.push_str(&format!("call {callee}("));
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_operand(out, a);
            }
            out.push(')');
        }
        StmtKind::IfGoto { cond, target } => {
            out.push_str("if ");
            write_operand(out, &cond.lhs);
            out.push_str(&format!(" {} ", cond.op.text()));
            write_operand(out, &cond.rhs);
            out.push_str(&format!(" goto {target}"));
        }
        StmtKind::Goto { target } => out.push_str(&format!("goto {target}")),
        StmtKind::Return { value } => {
            out.push_str("return");
            if let Some(v) = value {
                out.push(' ');
                write_operand(out, v);
            }
        }
    }
    out.push('\n');
}

/// Canonical text for a program; reparses to a structurally equal value.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for g in &p.globals {
        out.push_str(&format!("global {}: {}", g.name, g.kind.text()));
        if let Some(size) = g.init_size {
            out.push_str(&format!("[{size}]"));
        }
        out.push('\n');
    }
    if let Some(e) = &p.entry {
        out.push_str(&format!("entry {e}\n"));
    }
    for f in &p.functions {
        out.push('\n');
        out.push_str(&format!("func {}(", f.name));
        for (i, param) in f.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("{}: {}", param.name, param.kind.text()));
        }
        out.push_str(&format!(") : {} {{\n", f.ret.text()));
        if !f.local_table.is_empty() {
            out.push_str("  locals {");
            for e in &f.local_table {
                out.push_str(&format!(
                    " {} : {} slot {} span [{}, {}) ;",
                    e.name,
                    e.kind.text(),
                    e.slot,
                    e.start_idx,
                    e.end_idx()
                ));
            }
            out.push_str(" }\n");
        }
        for s in &f.statements {
            write_statement(&mut out, s);
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAXPY: &str = r#"
// y[i] = a * x[i] + y[i] over 0..n
func saxpy(a: real, x: array-real, y: array-real, n: int) : void {
  locals { i : int slot 1 span [4, 10) ; }
  0: a := param 0
  1: x := param 1
  2: y := param 2
  3: n := param 3
  4: i = 0
  5: if i >= n goto 12
  6: $t0 = x[i]
  7: $t1 = $t0 * a
  8: y[i] = $t1
  9: i = i + 1
  10: goto 5
  11: return
  12: return
}
"#;

    #[test]
    fn saxpy_parses() {
        let p = parse_program(SAXPY).unwrap();
        assert_eq!(p.functions.len(), 1);
        let f = &p.functions[0];
        assert_eq!(f.signature(), "saxpy(real,array-real,array-real,int):void");
        assert_eq!(f.statements.len(), 13);
        assert_eq!(f.local_table[0].length, 6);
        assert_eq!(
            f.statements[8].kind,
            StmtKind::ArrayStore {
                base: "y".to_string(),
                index: Operand::Local("i".to_string()),
                value: Operand::Local("$t1".to_string()),
            }
        );
    }

    #[test]
    fn empty_input_is_an_empty_program() {
        let p = parse_program("").unwrap();
        assert_eq!(p.functions.len(), 0);
        assert_eq!(p.globals.len(), 0);
        assert_eq!(p.entry, None);
    }

    #[test]
    fn round_trips_through_the_printer() {
        let p = parse_program(SAXPY).unwrap();
        let printed = print_program(&p);
        let again = parse_program(&printed).unwrap();
        assert_eq!(p, again);
        assert_eq!(printed, print_program(&again));
    }

    #[test]
    fn all_statement_forms_round_trip() {
        let src = r#"
global COUNT: int
global GRID: array-real[64]
entry main

func helper(o: object) : int {
  0: o := param 0
  1: $v = o.size
  2: return $v
}

func main() : int {
  locals { n : int slot 0 span [0, 14) ; a : array-int slot 1 span [1, 14) ; o : object slot 2 span [2, 14) ; r : real slot 3 span [6, 14) ; }
  0: n = global COUNT
  1: a = new array-int[8]
  2: o = new object
  3: o.size = -3
  4: a[0] = n
  5: $t = a[0]
  6: r = new array-real[n]
  7: global COUNT = 5
  8: $c = call helper(o)
  9: call helper(o)
  10: if $c != 0 goto 12
  11: goto 13
  12: n = $c - 1
  13: return n
}
"#;
        let p = parse_program(src).unwrap();
        let printed = print_program(&p);
        let again = parse_program(&printed).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn clinit_name_is_one_token() {
        let src =
            "func <clinit>() : void {\n  0: global COUNT = 1\n  1: return\n}\nglobal COUNT: int\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.functions[0].name, "<clinit>");
        let again = parse_program(&print_program(&p)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn comparison_is_not_confused_with_angle_names() {
        let src = "func f(n: int) : int {\n  0: n := param 0\n  1: if n < 5 goto 3\n  2: return 1\n  3: return 0\n}\n";
        let p = parse_program(src).unwrap();
        match &p.functions[0].statements[1].kind {
            StmtKind::IfGoto { cond, target } => {
                assert_eq!(cond.op, CmpOp::Lt);
                assert_eq!(*target, 3);
            }
            other => panic!("unexpected statement {other:?}"),
        }
    }

    #[test]
    fn return_value_and_index_prefix_disambiguate() {
        let src = "func f() : int {\n  0: goto 2\n  1: return 7\n  2: goto 1\n}\n";
        let p = parse_program(src).unwrap();
        assert_eq!(
            p.functions[0].statements[1].kind,
            StmtKind::Return { value: Some(Operand::Const(7)) }
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_program("func f() : void {\n  0: i = = 3\n}").unwrap_err();
        match err {
            TextError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert!(col > 1);
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn out_of_range_branch_is_a_validation_error() {
        let err = parse_program("func f() : void {\n  0: goto 99\n  1: return\n}").unwrap_err();
        match err {
            TextError::Invalid(violations) => {
                assert!(violations.iter().any(|v| v.message.contains("target")));
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn misnumbered_statement_is_rejected() {
        let err = parse_program("func f() : void {\n  0: goto 2\n  2: return\n}").unwrap_err();
        match err {
            TextError::Syntax { message, .. } => assert!(message.contains("statement index")),
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn scalar_global_with_size_is_rejected() {
        let err = parse_program("global S: int[4]\n").unwrap_err();
        assert!(matches!(err, TextError::Syntax { .. }));
    }

    #[test]
    fn adjacent_hyphen_makes_a_kind_spaced_hyphen_subtracts() {
        let src = "func f(array: int) : int {\n  0: array := param 0\n  1: $t = array - 1\n  2: return $t\n}\n";
        let p = parse_program(src).unwrap();
        match &p.functions[0].statements[1].kind {
            StmtKind::Assign { expr: Expr::Bin(BinOp::Sub, a, b), .. } => {
                assert_eq!(a, &Operand::Local("array".to_string()));
                assert_eq!(b, &Operand::Const(1));
            }
            other => panic!("unexpected statement {other:?}"),
        }
    }
}
