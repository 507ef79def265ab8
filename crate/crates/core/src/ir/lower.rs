// SPDX-License-Identifier: Apache-2.0

//! Template lowering to the target ISA.
//!
//! Every SSA value lives in its own memory word above the data region; each
//! IR instruction loads its operands into scratch registers, computes, and
//! stores the result back. Every emitted instruction carries a `!loc` tag.

use std::collections::BTreeMap;

use super::{BinOp, IrBlock, IrFunction, IrId, IrInstr, IrOp, IrProgram, Pred, Value};
use crate::error::{Error, Result};
use crate::isa::{IsaFunction, IsaInstruction, IsaProgram, Opcode, Operand, Reg, NUM_REGS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LowerOptions {
    /// Fuse an adjacent single-use `mul` into the following `add` as `macc`.
    pub fuse_macc: bool,
    /// Turn an `icmp eq|ne` consumed only by the next `br` into a branch chain.
    pub fuse_eq_branch: bool,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions {
            fuse_macc: true,
            fuse_eq_branch: true,
        }
    }
}

/// A lowered program plus what the lowering decided.
#[derive(Clone, Debug, PartialEq)]
pub struct Lowered {
    pub isa: IsaProgram,
    /// Memory word of every value, keyed by (function, value).
    pub slots: BTreeMap<(String, String), u32>,
    /// (mul, add) pairs emitted as one `macc` tagged with the add.
    pub fused_macc: Vec<(IrId, IrId)>,
    /// (icmp, br) pairs emitted as a chain of single-target branches.
    pub fused_branches: Vec<(IrId, IrId)>,
    pub warnings: Vec<String>,
}

fn reg(r: u8) -> Operand {
    Operand::Reg(Reg(r))
}

fn imm(v: i64) -> Operand {
    Operand::Imm(v)
}

fn lab(l: &str) -> Operand {
    Operand::Label(l.to_string())
}

struct Emitter<'a> {
    func: IsaFunction,
    fname: &'a str,
    slots: &'a BTreeMap<(String, String), u32>,
}

impl Emitter<'_> {
    fn emit(&mut self, op: Opcode, operands: Vec<Operand>, tag: IrId) {
        self.func.push(IsaInstruction::new(op, operands).with_loc(tag));
    }

    fn slot(&self, var: &str) -> i64 {
        self.slots[&(self.fname.to_string(), var.to_string())] as i64
    }

    fn load(&mut self, r: u8, v: &Value, tag: IrId) {
        match v {
            Value::Var(name) => {
                let a = self.slot(name);
                self.emit(Opcode::Ldw, vec![reg(r), imm(a)], tag);
            }
            Value::Const(c) => self.emit(Opcode::Ldc, vec![reg(r), imm(*c)], tag),
        }
    }

    /// Register or immediate for the last operand of `add`, `sub`, `icmp`.
    fn reg_or_imm(&mut self, r: u8, v: &Value, tag: IrId) -> Operand {
        match v {
            Value::Const(c) => imm(*c),
            _ => {
                self.load(r, v, tag);
                reg(r)
            }
        }
    }

    fn store(&mut self, r: u8, var: &str, tag: IrId) {
        let a = self.slot(var);
        self.emit(Opcode::Stw, vec![reg(r), imm(a)], tag);
    }

    /// `r0 = pred(a, b)` without branches.
    fn compare(&mut self, p: Pred, a: &Value, b: &Value, tag: IrId) {
        match p {
            Pred::Lt | Pred::Ge => {
                self.load(0, a, tag);
                let rb = self.reg_or_imm(1, b, tag);
                self.emit(Opcode::Icmp, vec![reg(0), reg(0), rb], tag);
            }
            Pred::Gt | Pred::Le => {
                self.load(0, b, tag);
                let ra = self.reg_or_imm(1, a, tag);
                self.emit(Opcode::Icmp, vec![reg(0), reg(0), ra], tag);
            }
            Pred::Eq | Pred::Ne => {
                self.load(0, a, tag);
                self.load(1, b, tag);
                self.emit(Opcode::Icmp, vec![reg(2), reg(0), reg(1)], tag);
                self.emit(Opcode::Icmp, vec![reg(3), reg(1), reg(0)], tag);
                self.emit(Opcode::Add, vec![reg(0), reg(2), reg(3)], tag);
            }
        }
        if matches!(p, Pred::Ge | Pred::Le | Pred::Eq) {
            self.emit(Opcode::Ldc, vec![reg(1), imm(1)], tag);
            self.emit(Opcode::Sub, vec![reg(0), reg(1), reg(0)], tag);
        }
    }

    fn phi_copies(&mut self, from: &str, succ: &IrBlock) -> Result<()> {
        let phis: Vec<&IrInstr> = succ.phis().collect();
        if phis.len() > NUM_REGS as usize {
            return Err(Error::Lowering(format!(
                "`{}`: block `{}` has {} phis, at most {NUM_REGS} supported",
                self.fname,
                succ.label,
                phis.len()
            )));
        }
        for (k, phi) in phis.iter().enumerate() {
            let IrOp::Phi(inc) = &phi.op else { unreachable!() };
            let (v, _) = inc.iter().find(|(_, l)| l == from).expect("validated phi");
            self.load(k as u8, v, phi.id);
        }
        for (k, phi) in phis.iter().enumerate() {
            self.store(k as u8, phi.result.as_deref().unwrap(), phi.id);
        }
        Ok(())
    }
}

fn allocate_slots(prog: &IrProgram) -> BTreeMap<(String, String), u32> {
    let mut slots = BTreeMap::new();
    let mut next = prog.mem_words;
    for f in &prog.functions {
        let vars = f.params.iter().cloned().chain(f.instrs().filter_map(|i| i.result.clone()));
        for v in vars {
            slots.insert((f.name.clone(), v), next);
            next += 1;
        }
    }
    slots
}

fn lower_function(
    prog: &IrProgram,
    f: &IrFunction,
    slots: &BTreeMap<(String, String), u32>,
    opts: LowerOptions,
    out: &mut Lowered,
) -> Result<IsaFunction> {
    let uses = f.use_counts();
    let single_use = |v: &Option<String>| v.as_ref().is_some_and(|r| uses.get(r.as_str()) == Some(&1));
    let mut e = Emitter {
        func: IsaFunction::new(&f.name),
        fname: &f.name,
        slots,
    };
    for (bi, b) in f.blocks.iter().enumerate() {
        let next_label = f.blocks.get(bi + 1).map(|n| n.label.as_str());
        e.func.push_label(&b.label);
        let body: Vec<&IrInstr> = b.instrs.iter().filter(|i| !matches!(i.op, IrOp::Phi(_))).collect();
        let mut k = 0;
        while k < body.len() {
            let i = body[k];
            let tag = i.id;
            let next = body.get(k + 1).copied();
            // mul + add -> macc
            if let (true, IrOp::Bin(BinOp::Mul, a, bb), Some(n)) = (opts.fuse_macc, &i.op, next) {
                if let IrOp::Bin(BinOp::Add, x, y) = &n.op {
                    let m = i.result.as_deref().unwrap();
                    let acc = match (x, y) {
                        (Value::Var(v), other) if v == m && other.var() != Some(m) => Some(other),
                        (other, Value::Var(v)) if v == m && other.var() != Some(m) => Some(other),
                        _ => None,
                    };
                    if let (Some(acc), true) = (acc, single_use(&i.result)) {
                        e.load(0, acc, n.id);
                        e.load(1, a, n.id);
                        e.load(2, bb, n.id);
                        e.emit(Opcode::Macc, vec![reg(0), reg(1), reg(2)], n.id);
                        e.store(0, n.result.as_deref().unwrap(), n.id);
                        out.fused_macc.push((i.id, n.id));
                        k += 2;
                        continue;
                    }
                }
            }
            // icmp eq|ne + br -> two single-target branches
            if let (true, IrOp::Icmp(p @ (Pred::Eq | Pred::Ne), a, bb), Some(n)) = (opts.fuse_eq_branch, &i.op, next) {
                if let IrOp::Br(Value::Var(c), t, fl) = &n.op {
                    if Some(c.as_str()) == i.result.as_deref() && single_use(&i.result) {
                        let (differ, same) = if *p == Pred::Eq { (fl, t) } else { (t, fl) };
                        e.load(0, a, i.id);
                        e.load(1, bb, i.id);
                        e.emit(Opcode::Icmp, vec![reg(2), reg(0), reg(1)], i.id);
                        e.emit(Opcode::Bt, vec![reg(2), lab(differ)], n.id);
                        e.emit(Opcode::Icmp, vec![reg(2), reg(1), reg(0)], i.id);
                        e.emit(Opcode::Bt, vec![reg(2), lab(differ)], n.id);
                        if next_label != Some(same.as_str()) {
                            e.emit(Opcode::Bu, vec![lab(same)], n.id);
                        }
                        out.fused_branches.push((i.id, n.id));
                        out.warnings.push(format!(
                            "`{}` block `{}`: icmp {} (IR {}) fused into branch chain of br (IR {})",
                            f.name,
                            b.label,
                            p.name(),
                            i.id,
                            n.id
                        ));
                        k += 2;
                        continue;
                    }
                }
            }
            match &i.op {
                IrOp::Const(c) => {
                    e.emit(Opcode::Ldc, vec![reg(0), imm(*c)], tag);
                    e.store(0, i.result.as_deref().unwrap(), tag);
                }
                IrOp::Bin(op, a, bb) => {
                    e.load(0, a, tag);
                    let (opcode, rb) = match op {
                        BinOp::Add => (Opcode::Add, e.reg_or_imm(1, bb, tag)),
                        BinOp::Sub => (Opcode::Sub, e.reg_or_imm(1, bb, tag)),
                        BinOp::Mul => {
                            e.load(1, bb, tag);
                            (Opcode::Mul, reg(1))
                        }
                        BinOp::Div => {
                            e.load(1, bb, tag);
                            (Opcode::Div, reg(1))
                        }
                    };
                    e.emit(opcode, vec![reg(0), reg(0), rb], tag);
                    e.store(0, i.result.as_deref().unwrap(), tag);
                }
                IrOp::Icmp(p, a, bb) => {
                    e.compare(*p, a, bb, tag);
                    e.store(0, i.result.as_deref().unwrap(), tag);
                }
                IrOp::Load(a) => {
                    match a {
                        Value::Const(c) => e.emit(Opcode::Ldw, vec![reg(0), imm(*c)], tag),
                        v => {
                            e.load(1, v, tag);
                            e.emit(Opcode::Ldw, vec![reg(0), reg(1), imm(0)], tag);
                        }
                    }
                    e.store(0, i.result.as_deref().unwrap(), tag);
                }
                IrOp::Store(a, v) => {
                    e.load(0, v, tag);
                    match a {
                        Value::Const(c) => e.emit(Opcode::Stw, vec![reg(0), imm(*c)], tag),
                        addr => {
                            e.load(1, addr, tag);
                            e.emit(Opcode::Stw, vec![reg(0), reg(1), imm(0)], tag);
                        }
                    }
                }
                IrOp::Call(g, args) => {
                    let callee = prog.function(g).expect("validated");
                    for (arg, param) in args.iter().zip(&callee.params) {
                        e.load(0, arg, tag);
                        let a = slots[&(g.clone(), param.clone())] as i64;
                        e.emit(Opcode::Stw, vec![reg(0), imm(a)], tag);
                    }
                    e.emit(Opcode::Call, vec![lab(g)], tag);
                    if let Some(r) = &i.result {
                        e.store(0, r, tag);
                    }
                }
                IrOp::Ret(v) => {
                    if let Some(v) = v {
                        e.load(0, v, tag);
                    }
                    e.emit(Opcode::Ret, vec![], tag);
                }
                IrOp::Jump(t) => {
                    let succ = f.block(t).expect("validated");
                    e.phi_copies(&b.label, succ)?;
                    e.emit(Opcode::Bu, vec![lab(t)], tag);
                }
                IrOp::Br(c, t, fl) => {
                    for s in [t, fl] {
                        if f.block(s).expect("validated").phis().next().is_some() {
                            return Err(Error::Lowering(format!(
                                "`{}`: conditional edge {} -> {s} into a phi block must be split first",
                                f.name, b.label
                            )));
                        }
                    }
                    e.load(0, c, tag);
                    e.emit(Opcode::Bt, vec![reg(0), lab(t)], tag);
                    if next_label != Some(fl.as_str()) {
                        e.emit(Opcode::Bu, vec![lab(fl)], tag);
                    }
                }
                IrOp::Phi(_) => unreachable!(),
            }
            k += 1;
        }
    }
    Ok(e.func)
}

/// Lowers a validated, located IR program.
pub fn lower(prog: &IrProgram, opts: LowerOptions) -> Result<Lowered> {
    prog.validate()?;
    prog.bottom_up_order()?;
    if prog.function("main").is_none() {
        return Err(Error::Lowering("program has no `main`".into()));
    }
    let slots = allocate_slots(prog);
    let mut out = Lowered {
        isa: IsaProgram::default(),
        slots: BTreeMap::new(),
        fused_macc: Vec::new(),
        fused_branches: Vec::new(),
        warnings: Vec::new(),
    };
    let mut functions = Vec::new();
    for f in &prog.functions {
        functions.push(lower_function(prog, f, &slots, opts, &mut out)?);
    }
    out.isa.mem_words = prog.mem_words + slots.len() as u32;
    out.isa.functions = functions;
    out.isa.validate()?;
    out.slots = slots;
    Ok(out)
}
