// SPDX-License-Identifier: Apache-2.0

//! A small SSA intermediate representation (`.mir`), its optimizer and the
//! lowering to the target ISA.

mod interp;
mod lower;
mod opt;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cfg::{BlockSpec, Cfg, Edge, EdgeKind};
use crate::error::{Error, Result};

pub use interp::{interpret, IrOutcome};
pub use lower::{lower, LowerOptions, Lowered};
pub use opt::{assign_ir_locations, const_fold, dce, optimize, prepare, split_critical_edges};
pub use parse::parse_ir;

pub type IrId = u32;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Var(String),
    Const(i64),
}

impl Value {
    pub fn var(&self) -> Option<&str> {
        match self {
            Value::Var(v) => Some(v),
            Value::Const(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Var(v) => write!(f, "%{v}"),
            Value::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
        }
    }

    /// `None` on division by zero.
    pub fn eval(self, a: i64, b: i64) -> Option<i64> {
        Some(match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::Div => {
                if b == 0 {
                    return None;
                }
                a.wrapping_div(b)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pred {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

impl Pred {
    pub const ALL: [Pred; 6] = [Pred::Lt, Pred::Gt, Pred::Le, Pred::Ge, Pred::Eq, Pred::Ne];

    pub fn name(self) -> &'static str {
        match self {
            Pred::Lt => "lt",
            Pred::Gt => "gt",
            Pred::Le => "le",
            Pred::Ge => "ge",
            Pred::Eq => "eq",
            Pred::Ne => "ne",
        }
    }

    pub fn eval(self, a: i64, b: i64) -> i64 {
        i64::from(match self {
            Pred::Lt => a < b,
            Pred::Gt => a > b,
            Pred::Le => a <= b,
            Pred::Ge => a >= b,
            Pred::Eq => a == b,
            Pred::Ne => a != b,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IrOp {
    Const(i64),
    Bin(BinOp, Value, Value),
    Icmp(Pred, Value, Value),
    /// Incoming value per predecessor label.
    Phi(Vec<(Value, String)>),
    Br(Value, String, String),
    Jump(String),
    Load(Value),
    /// Address, then value.
    Store(Value, Value),
    Call(String, Vec<Value>),
    Ret(Option<Value>),
}

impl IrOp {
    pub fn is_terminator(&self) -> bool {
        matches!(self, IrOp::Br(..) | IrOp::Jump(_) | IrOp::Ret(_))
    }

    pub fn has_side_effects(&self) -> bool {
        matches!(self, IrOp::Store(..) | IrOp::Call(..)) || self.is_terminator()
    }

    pub fn operands(&self) -> Vec<&Value> {
        match self {
            IrOp::Const(_) | IrOp::Jump(_) | IrOp::Ret(None) => vec![],
            IrOp::Bin(_, a, b) | IrOp::Icmp(_, a, b) | IrOp::Store(a, b) => vec![a, b],
            IrOp::Phi(inc) => inc.iter().map(|(v, _)| v).collect(),
            IrOp::Br(c, _, _) => vec![c],
            IrOp::Load(a) => vec![a],
            IrOp::Call(_, args) => args.iter().collect(),
            IrOp::Ret(Some(v)) => vec![v],
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Value> {
        match self {
            IrOp::Const(_) | IrOp::Jump(_) | IrOp::Ret(None) => vec![],
            IrOp::Bin(_, a, b) | IrOp::Icmp(_, a, b) | IrOp::Store(a, b) => vec![a, b],
            IrOp::Phi(inc) => inc.iter_mut().map(|(v, _)| v).collect(),
            IrOp::Br(c, _, _) => vec![c],
            IrOp::Load(a) => vec![a],
            IrOp::Call(_, args) => args.iter_mut().collect(),
            IrOp::Ret(Some(v)) => vec![v],
        }
    }

    pub fn successors(&self) -> Vec<&str> {
        match self {
            IrOp::Br(_, t, f) => vec![t, f],
            IrOp::Jump(t) => vec![t],
            _ => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrInstr {
    pub id: IrId,
    pub result: Option<String>,
    pub op: IrOp,
    /// Debug location carried into the lowered code.
    pub loc: Option<IrId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrBlock {
    pub label: String,
    pub instrs: Vec<IrInstr>,
}

impl IrBlock {
    pub fn terminator(&self) -> Option<&IrInstr> {
        self.instrs.last().filter(|i| i.op.is_terminator())
    }

    pub fn successors(&self) -> Vec<&str> {
        self.terminator().map(|t| t.op.successors()).unwrap_or_default()
    }

    pub fn phis(&self) -> impl Iterator<Item = &IrInstr> {
        self.instrs.iter().take_while(|i| matches!(i.op, IrOp::Phi(_)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrFunction {
    pub name: String,
    pub params: Vec<String>,
    pub blocks: Vec<IrBlock>,
}

impl IrFunction {
    pub fn block(&self, label: &str) -> Option<&IrBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn instrs(&self) -> impl Iterator<Item = &IrInstr> {
        self.blocks.iter().flat_map(|b| b.instrs.iter())
    }

    pub fn predecessors(&self) -> BTreeMap<String, Vec<String>> {
        let mut preds: BTreeMap<String, Vec<String>> = self.blocks.iter().map(|b| (b.label.clone(), Vec::new())).collect();
        for b in &self.blocks {
            let mut seen = BTreeSet::new();
            for s in b.successors() {
                if seen.insert(s) {
                    if let Some(p) = preds.get_mut(s) {
                        p.push(b.label.clone());
                    }
                }
            }
        }
        preds
    }

    /// Number of uses of every variable.
    pub fn use_counts(&self) -> BTreeMap<String, usize> {
        let mut uses = BTreeMap::new();
        for i in self.instrs() {
            for v in i.op.operands() {
                if let Value::Var(name) = v {
                    *uses.entry(name.clone()).or_insert(0) += 1;
                }
            }
        }
        uses
    }

    pub fn callees(&self) -> BTreeSet<String> {
        self.instrs()
            .filter_map(|i| match &i.op {
                IrOp::Call(f, _) => Some(f.clone()),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IrProgram {
    /// Words of data memory visible to `load` and `store`.
    pub mem_words: u32,
    pub functions: Vec<IrFunction>,
}

impl IrProgram {
    pub fn function(&self, name: &str) -> Option<&IrFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn instrs(&self) -> impl Iterator<Item = &IrInstr> {
        self.functions.iter().flat_map(|f| f.instrs())
    }

    pub fn ids(&self) -> BTreeSet<IrId> {
        self.instrs().map(|i| i.id).collect()
    }

    pub fn max_id(&self) -> IrId {
        self.instrs().map(|i| i.id).max().unwrap_or(0)
    }

    pub fn locations(&self) -> BTreeSet<IrId> {
        self.instrs().filter_map(|i| i.loc).collect()
    }

    /// Function, block label and instruction of every ID.
    pub fn id_table(&self) -> BTreeMap<IrId, (&str, &str, &IrInstr)> {
        let mut t = BTreeMap::new();
        for f in &self.functions {
            for b in &f.blocks {
                for i in &b.instrs {
                    t.insert(i.id, (f.name.as_str(), b.label.as_str(), i));
                }
            }
        }
        t
    }

    /// Checks SSA form, block structure, phi placement and call targets.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Validation(m));
        let mut ids = BTreeSet::new();
        let mut fnames = BTreeSet::new();
        for f in &self.functions {
            if !fnames.insert(f.name.as_str()) {
                return err(format!("duplicate function `{}`", f.name));
            }
        }
        for f in &self.functions {
            if f.blocks.is_empty() {
                return err(format!("`{}` has no blocks", f.name));
            }
            let mut defs: BTreeSet<&str> = BTreeSet::new();
            for p in &f.params {
                if !defs.insert(p) {
                    return err(format!("`{}`: parameter %{p} declared twice", f.name));
                }
            }
            let mut labels = BTreeSet::new();
            for b in &f.blocks {
                if !labels.insert(b.label.as_str()) {
                    return err(format!("`{}`: duplicate block `{}`", f.name, b.label));
                }
            }
            let preds = f.predecessors();
            for b in &f.blocks {
                let Some(term) = b.terminator() else {
                    return err(format!("`{}`: block `{}` does not end in br, jump or ret", f.name, b.label));
                };
                for s in term.op.successors() {
                    if !labels.contains(s) {
                        return err(format!("`{}`: branch to undefined block `{s}`", f.name));
                    }
                }
                let mut in_phis = true;
                for (k, i) in b.instrs.iter().enumerate() {
                    if !ids.insert(i.id) {
                        return err(format!("duplicate instruction id {}", i.id));
                    }
                    if i.op.is_terminator() && k + 1 != b.instrs.len() {
                        return err(format!("`{}`: terminator in the middle of block `{}`", f.name, b.label));
                    }
                    match &i.op {
                        IrOp::Phi(inc) => {
                            if !in_phis {
                                return err(format!("`{}`: phi after non-phi in block `{}`", f.name, b.label));
                            }
                            let from: BTreeSet<&str> = inc.iter().map(|(_, l)| l.as_str()).collect();
                            let expect: BTreeSet<&str> = preds[&b.label].iter().map(String::as_str).collect();
                            if from != expect || from.len() != inc.len() {
                                return err(format!(
                                    "`{}`: phi %{} in `{}` must have one incoming value per predecessor",
                                    f.name,
                                    i.result.as_deref().unwrap_or("?"),
                                    b.label
                                ));
                            }
                        }
                        _ => in_phis = false,
                    }
                    if let IrOp::Call(callee, args) = &i.op {
                        match self.function(callee) {
                            None => return err(format!("call to undefined function `{callee}`")),
                            Some(g) if g.params.len() != args.len() => {
                                return err(format!("`{callee}` takes {} arguments, {} given", g.params.len(), args.len()))
                            }
                            _ => {}
                        }
                    }
                    let needs_result = matches!(i.op, IrOp::Const(_) | IrOp::Bin(..) | IrOp::Icmp(..) | IrOp::Phi(_) | IrOp::Load(_));
                    match (&i.result, needs_result) {
                        (None, true) => return err(format!("instruction {} needs a result", i.id)),
                        (Some(_), false) if !matches!(i.op, IrOp::Call(..)) => {
                            return err(format!("instruction {} produces no value", i.id))
                        }
                        _ => {}
                    }
                    if let Some(r) = &i.result {
                        if !defs.insert(r) {
                            return err(format!("`{}`: %{r} defined twice", f.name));
                        }
                    }
                }
            }
            for i in f.instrs() {
                for v in i.op.operands() {
                    if let Value::Var(name) = v {
                        if !defs.contains(name.as_str()) {
                            return err(format!("`{}`: use of undefined %{name}", f.name));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Functions in callee-first order. Recursion is rejected.
    pub fn bottom_up_order(&self) -> Result<Vec<String>> {
        let mut order = Vec::new();
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn visit<'a>(p: &'a IrProgram, f: &'a str, state: &mut BTreeMap<&'a str, u8>, order: &mut Vec<String>) -> Result<()> {
            match state.get(f) {
                Some(2) => return Ok(()),
                Some(1) => return Err(Error::Lowering(format!("recursive call involving `{f}` is not supported"))),
                _ => {}
            }
            state.insert(f, 1);
            let func = p.function(f).expect("validated");
            for i in func.instrs() {
                if let IrOp::Call(g, _) = &i.op {
                    visit(p, g, state, order)?;
                }
            }
            state.insert(f, 2);
            order.push(f.to_string());
            Ok(())
        }
        for f in &self.functions {
            visit(self, &f.name, &mut state, &mut order)?;
        }
        Ok(order)
    }
}

impl fmt::Display for IrInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = &self.result {
            write!(f, "%{r} = ")?;
        }
        let join = |vs: &[Value]| vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
        match &self.op {
            IrOp::Const(c) => write!(f, "const {c}")?,
            IrOp::Bin(op, a, b) => write!(f, "{} {a}, {b}", op.name())?,
            IrOp::Icmp(p, a, b) => write!(f, "icmp {} {a}, {b}", p.name())?,
            IrOp::Phi(inc) => {
                let parts: Vec<String> = inc.iter().map(|(v, l)| format!("[{v}, {l}]")).collect();
                write!(f, "phi {}", parts.join(", "))?
            }
            IrOp::Br(c, t, e) => write!(f, "br {c}, {t}, {e}")?,
            IrOp::Jump(t) => write!(f, "jump {t}")?,
            IrOp::Load(a) => write!(f, "load {a}")?,
            IrOp::Store(a, v) => write!(f, "store {a}, {v}")?,
            IrOp::Call(g, args) => write!(f, "call {g}({})", join(args))?,
            IrOp::Ret(None) => write!(f, "ret")?,
            IrOp::Ret(Some(v)) => write!(f, "ret {v}")?,
        }
        write!(f, " !id {}", self.id)?;
        if let Some(l) = self.loc {
            write!(f, " !loc {l}")?;
        }
        Ok(())
    }
}

impl fmt::Display for IrProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mem_words > 0 {
            writeln!(f, "mem {}", self.mem_words)?;
        }
        for func in &self.functions {
            let params: Vec<String> = func.params.iter().map(|p| format!("%{p}")).collect();
            writeln!(f, "func {}({}):", func.name, params.join(", "))?;
            for b in &func.blocks {
                writeln!(f, "{}:", b.label)?;
                for i in &b.instrs {
                    writeln!(f, "    {i}")?;
                }
            }
        }
        Ok(())
    }
}

/// The IR-level control-flow graph of one function. Blocks keep their IR
/// labels and order; `ret` blocks exit.
pub fn ir_cfg(func: &IrFunction) -> Result<Cfg> {
    let specs = func
        .blocks
        .iter()
        .map(|b| BlockSpec {
            label: b.label.clone(),
            range: 0..b.instrs.len(),
            opcodes: Vec::new(),
            call: None,
            can_exit: matches!(b.terminator().map(|t| &t.op), Some(IrOp::Ret(_))),
        })
        .collect();
    let mut edges = Vec::new();
    for (i, b) in func.blocks.iter().enumerate() {
        let conditional = matches!(b.terminator().map(|t| &t.op), Some(IrOp::Br(..)));
        for s in b.successors() {
            let to = func
                .block_index(s)
                .ok_or_else(|| Error::Validation(format!("branch to undefined block `{s}`")))?;
            edges.push(Edge {
                from: i,
                to,
                kind: if conditional { EdgeKind::CondTaken } else { EdgeKind::Taken },
            });
        }
    }
    Cfg::from_parts(&func.name, specs, edges, 0)
}
