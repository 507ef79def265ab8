// SPDX-License-Identifier: Apache-2.0

//! The target instruction set: opcodes, operands, the `.isa` text format and
//! the issue-timing rule shared by the analyzer and the simulator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::multithread::ThreadSpec;

pub const NUM_REGS: u8 = 12;

/// Cycles between two successive issues of the same thread.
pub fn issue_latency(n_active_threads: u32) -> u32 {
    n_active_threads.max(4)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opcode {
    Add,
    Sub,
    Mul,
    Macc,
    Div,
    Ldc,
    Ldw,
    Stw,
    Mov,
    Icmp,
    Bt,
    Bf,
    Bu,
    Call,
    Ret,
    In,
    Out,
    Nop,
    /// Fetch no-op, inserted by the processor when the instruction buffer runs dry.
    Fnop,
}

impl Opcode {
    pub const ALL: [Opcode; 19] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::Macc,
        Opcode::Div,
        Opcode::Ldc,
        Opcode::Ldw,
        Opcode::Stw,
        Opcode::Mov,
        Opcode::Icmp,
        Opcode::Bt,
        Opcode::Bf,
        Opcode::Bu,
        Opcode::Call,
        Opcode::Ret,
        Opcode::In,
        Opcode::Out,
        Opcode::Nop,
        Opcode::Fnop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::Macc => "macc",
            Opcode::Div => "div",
            Opcode::Ldc => "ldc",
            Opcode::Ldw => "ldw",
            Opcode::Stw => "stw",
            Opcode::Mov => "mov",
            Opcode::Icmp => "icmp",
            Opcode::Bt => "bt",
            Opcode::Bf => "bf",
            Opcode::Bu => "bu",
            Opcode::Call => "call",
            Opcode::Ret => "ret",
            Opcode::In => "in",
            Opcode::Out => "out",
            Opcode::Nop => "nop",
            Opcode::Fnop => "fnop",
        }
    }

    pub fn from_name(s: &str) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|op| op.name() == s)
    }

    /// Memory and port instructions occupy the fetch path during their issue slot.
    pub fn blocks_fetch(self) -> bool {
        matches!(self, Opcode::Ldw | Opcode::Stw | Opcode::In | Opcode::Out)
    }

    pub fn is_conditional_branch(self) -> bool {
        matches!(self, Opcode::Bt | Opcode::Bf)
    }

    /// Instructions that end a basic block.
    pub fn ends_block(self) -> bool {
        matches!(self, Opcode::Bt | Opcode::Bf | Opcode::Bu | Opcode::Call | Opcode::Ret)
    }

    fn shapes(self) -> &'static [&'static [Kind]] {
        use Kind::*;
        match self {
            Opcode::Add | Opcode::Sub | Opcode::Icmp => &[&[R, R, RI]],
            Opcode::Mul | Opcode::Div | Opcode::Macc => &[&[R, R, R]],
            Opcode::Ldc => &[&[R, I]],
            Opcode::Ldw | Opcode::Stw => &[&[R, RI], &[R, R, RI]],
            Opcode::Mov => &[&[R, R]],
            Opcode::Bt | Opcode::Bf => &[&[R, L]],
            Opcode::Bu | Opcode::Call => &[&[L]],
            Opcode::Ret | Opcode::Nop | Opcode::Fnop => &[&[]],
            Opcode::In => &[&[R, I]],
            Opcode::Out => &[&[I, R]],
        }
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    R,
    I,
    RI,
    L,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reg(pub u8);

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Reg),
    Imm(i64),
    Label(String),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "{r}"),
            Operand::Imm(v) => write!(f, "{v}"),
            Operand::Label(l) => f.write_str(l),
        }
    }
}

impl Operand {
    fn kind_ok(&self, kind: Kind) -> bool {
        matches!(
            (self, kind),
            (Operand::Reg(_), Kind::R | Kind::RI) | (Operand::Imm(_), Kind::I | Kind::RI) | (Operand::Label(_), Kind::L)
        )
    }
}

/// One machine instruction with its optional IR debug location.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IsaInstruction {
    pub opcode: Opcode,
    pub operands: Vec<Operand>,
    pub loc: Option<u32>,
}

impl IsaInstruction {
    pub fn new(opcode: Opcode, operands: Vec<Operand>) -> Self {
        IsaInstruction {
            opcode,
            operands,
            loc: None,
        }
    }

    pub fn with_loc(mut self, loc: u32) -> Self {
        self.loc = Some(loc);
        self
    }

    /// Branch or call target label, if any.
    pub fn target(&self) -> Option<&str> {
        match (self.opcode, self.operands.last()) {
            (Opcode::Bt | Opcode::Bf | Opcode::Bu | Opcode::Call, Some(Operand::Label(l))) => Some(l),
            _ => None,
        }
    }

    pub fn check_arity(&self) -> std::result::Result<(), String> {
        let shapes = self.opcode.shapes();
        let ok = shapes.iter().any(|shape| {
            shape.len() == self.operands.len() && shape.iter().zip(&self.operands).all(|(k, o)| o.kind_ok(*k))
        });
        if ok {
            Ok(())
        } else {
            Err(format!(
                "operands `{}` do not match any form of `{}`",
                self.operands.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", "),
                self.opcode
            ))
        }
    }
}

impl fmt::Display for IsaInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.opcode.name())?;
        for (i, op) in self.operands.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { ", " })?;
            write!(f, "{op}")?;
        }
        if let Some(loc) = self.loc {
            write!(f, " !loc {loc}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsaFunction {
    pub name: String,
    pub instrs: Vec<IsaInstruction>,
    /// Labels in source order; a label names the instruction index it precedes.
    pub labels: Vec<(String, usize)>,
}

impl IsaFunction {
    pub fn new(name: impl Into<String>) -> Self {
        IsaFunction {
            name: name.into(),
            instrs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().find(|(l, _)| l == label).map(|(_, i)| *i)
    }

    /// First label attached to instruction `idx`.
    pub fn label_at(&self, idx: usize) -> Option<&str> {
        self.labels.iter().find(|(_, i)| *i == idx).map(|(l, _)| l.as_str())
    }

    pub fn push_label(&mut self, label: impl Into<String>) {
        let at = self.instrs.len();
        self.labels.push((label.into(), at));
    }

    pub fn push(&mut self, instr: IsaInstruction) {
        self.instrs.push(instr);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IsaProgram {
    /// Words of flat per-thread data memory.
    pub mem_words: u32,
    pub threads: Option<ThreadSpec>,
    pub functions: Vec<IsaFunction>,
}

impl IsaProgram {
    pub fn function(&self, name: &str) -> Option<&IsaFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn instruction_count(&self) -> usize {
        self.functions.iter().map(|f| f.instrs.len()).sum()
    }

    /// Names of functions that start a hardware thread.
    pub fn thread_entries(&self) -> Vec<String> {
        match &self.threads {
            Some(spec) => spec.entry_functions(),
            None => vec!["main".to_string()],
        }
    }

    /// Direct callees of each function.
    pub fn call_graph(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.functions
            .iter()
            .map(|f| {
                let callees = f
                    .instrs
                    .iter()
                    .filter(|i| i.opcode == Opcode::Call)
                    .filter_map(|i| i.target().map(str::to_string))
                    .collect();
                (f.name.clone(), callees)
            })
            .collect()
    }

    /// Checks every structural invariant of a parsed or generated program.
    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for f in &self.functions {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Validation(format!("duplicate function `{}`", f.name)));
            }
        }
        for f in &self.functions {
            let mut labels = BTreeSet::new();
            for (l, idx) in &f.labels {
                if !labels.insert(l.as_str()) {
                    return Err(Error::Validation(format!("duplicate label `{l}` in `{}`", f.name)));
                }
                if *idx > f.instrs.len() {
                    return Err(Error::Validation(format!("label `{l}` out of range in `{}`", f.name)));
                }
            }
            for (k, ins) in f.instrs.iter().enumerate() {
                if ins.opcode == Opcode::Fnop {
                    return Err(Error::Validation(format!("fnop cannot appear in a program (`{}` #{k})", f.name)));
                }
                ins.check_arity().map_err(|m| Error::Validation(format!("`{}` #{k}: {m}", f.name)))?;
                for op in &ins.operands {
                    if let Operand::Reg(r) = op {
                        if r.0 >= NUM_REGS {
                            return Err(Error::Validation(format!("register {r} out of range")));
                        }
                    }
                }
                if let Some(t) = ins.target() {
                    if ins.opcode == Opcode::Call {
                        if !names.contains(t) {
                            return Err(Error::Validation(format!("call to undefined function `{t}`")));
                        }
                    } else if !labels.contains(t) {
                        return Err(Error::Validation(format!("undefined label `{t}` in `{}`", f.name)));
                    }
                }
            }
        }
        for entry in self.thread_entries() {
            if !names.contains(entry.as_str()) {
                return Err(Error::Validation(format!("thread entry `{entry}` is not defined")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for IsaProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mem_words > 0 {
            writeln!(f, "mem {}", self.mem_words)?;
        }
        if let Some(t) = &self.threads {
            writeln!(f, "{t}")?;
        }
        for func in &self.functions {
            writeln!(f, "func {}:", func.name)?;
            for idx in 0..=func.instrs.len() {
                for (l, _) in func.labels.iter().filter(|(_, i)| *i == idx) {
                    writeln!(f, "{l}:")?;
                }
                if let Some(ins) = func.instrs.get(idx) {
                    writeln!(f, "    {ins}")?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_operand(tok: &str) -> Option<Operand> {
    if let Some(n) = tok.strip_prefix('r') {
        if let Ok(v) = n.parse::<u8>() {
            return Some(Operand::Reg(Reg(v)));
        }
    }
    if let Ok(v) = tok.parse::<i64>() {
        return Some(Operand::Imm(v));
    }
    if is_ident(tok) {
        return Some(Operand::Label(tok.to_string()));
    }
    None
}

/// Parses `.isa` text. `file` is used only in error messages.
pub fn parse_isa(text: &str, file: &str) -> Result<IsaProgram> {
    let mut prog = IsaProgram::default();
    let mut current: Option<IsaFunction> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = line.len() - line.trim_start().len() + 1;
        let err = |msg: String| Error::parse(file, line_no, col, msg);
        if let Some(rest) = trimmed.strip_prefix("mem ") {
            prog.mem_words = rest.trim().parse().map_err(|_| err(format!("bad memory size `{}`", rest.trim())))?;
            continue;
        }
        if trimmed.starts_with("threads") {
            let spec = ThreadSpec::parse(trimmed).map_err(err)?;
            prog.threads = Some(spec);
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("func ") {
            let name = rest.trim().strip_suffix(':').ok_or_else(|| err("expected `func <name>:`".into()))?.trim();
            if !is_ident(name) {
                return Err(err(format!("bad function name `{name}`")));
            }
            if let Some(f) = current.take() {
                prog.functions.push(f);
            }
            current = Some(IsaFunction::new(name));
            continue;
        }
        let func = current.as_mut().ok_or_else(|| err("instruction outside of a function".into()))?;
        if let Some(label) = trimmed.strip_suffix(':') {
            let label = label.trim();
            if !is_ident(label) {
                return Err(err(format!("bad label `{label}`")));
            }
            func.push_label(label);
            continue;
        }
        let (body, loc) = match trimmed.find("!loc") {
            Some(i) => {
                let tag = trimmed[i + 4..].trim();
                let v: u32 = tag.parse().map_err(|_| {
                    Error::parse(file, line_no, col + i, format!("bad debug location `{tag}`"))
                })?;
                (trimmed[..i].trim(), Some(v))
            }
            None => (trimmed, None),
        };
        let (mnemonic, args) = match body.split_once(char::is_whitespace) {
            Some((m, a)) => (m, a.trim()),
            None => (body, ""),
        };
        let opcode = Opcode::from_name(mnemonic).ok_or_else(|| err(format!("unknown opcode `{mnemonic}`")))?;
        if opcode == Opcode::Fnop {
            return Err(err("fnop is synthetic and cannot be written in source".into()));
        }
        let mut operands = Vec::new();
        if !args.is_empty() {
            for tok in args.split(',') {
                let tok = tok.trim();
                let tok_col = col + body.find(tok).unwrap_or(0);
                let op = parse_operand(tok)
                    .ok_or_else(|| Error::parse(file, line_no, tok_col, format!("bad operand `{tok}`")))?;
                if let Operand::Reg(r) = op {
                    if r.0 >= NUM_REGS {
                        return Err(Error::parse(file, line_no, tok_col, format!("register `{tok}` out of range r0-r11")));
                    }
                }
                operands.push(op);
            }
        }
        let ins = IsaInstruction { opcode, operands, loc };
        ins.check_arity().map_err(err)?;
        func.push(ins);
    }
    if let Some(f) = current.take() {
        prog.functions.push(f);
    }
    // Resolve labels per function, reporting the first offending line.
    for f in &prog.functions {
        for ins in &f.instrs {
            if let Some(t) = ins.target() {
                let defined = if ins.opcode == Opcode::Call {
                    prog.functions.iter().any(|g| g.name == t)
                } else {
                    f.label_index(t).is_some()
                };
                if !defined {
                    let line = text
                        .lines()
                        .position(|l| {
                            let l = strip_comment(l);
                            l.contains(ins.opcode.name()) && l.split(|c: char| c == ',' || c.is_whitespace()).any(|w| w == t)
                        })
                        .map(|p| p + 1)
                        .unwrap_or(0);
                    let what = if ins.opcode == Opcode::Call { "function" } else { "label" };
                    return Err(Error::parse(file, line, 1, format!("undefined {what} `{t}` in `{}`", f.name)));
                }
            }
        }
    }
    prog.validate().map_err(|e| Error::parse(file, 0, 0, e.to_string()))?;
    Ok(prog)
}
