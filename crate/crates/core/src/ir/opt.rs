// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use super::{IrBlock, IrFunction, IrInstr, IrOp, IrProgram, Value};
use crate::error::Result;

fn fold_function(f: &mut IrFunction) -> bool {
    let mut changed = false;
    let consts: BTreeMap<String, i64> = f
        .instrs()
        .filter_map(|i| match (&i.result, &i.op) {
            (Some(r), IrOp::Const(c)) => Some((r.clone(), *c)),
            _ => None,
        })
        .collect();
    for b in &mut f.blocks {
        for i in &mut b.instrs {
            for v in i.op.operands_mut() {
                if let Value::Var(name) = v {
                    if let Some(c) = consts.get(name.as_str()) {
                        *v = Value::Const(*c);
                        changed = true;
                    }
                }
            }
            let folded = match &i.op {
                IrOp::Bin(op, Value::Const(a), Value::Const(b)) => op.eval(*a, *b).map(IrOp::Const),
                IrOp::Icmp(p, Value::Const(a), Value::Const(b)) => Some(IrOp::Const(p.eval(*a, *b))),
                IrOp::Br(Value::Const(c), t, e) => Some(IrOp::Jump(if *c != 0 { t.clone() } else { e.clone() })),
                IrOp::Br(_, t, e) if t == e => Some(IrOp::Jump(t.clone())),
                _ => None,
            };
            if let Some(op) = folded {
                i.op = op;
                changed = true;
            }
        }
    }
    // Drop phi entries for edges that no longer exist, then unreachable blocks.
    let preds = f.predecessors();
    for b in &mut f.blocks {
        let p: BTreeSet<&String> = preds[&b.label].iter().collect();
        for i in &mut b.instrs {
            if let IrOp::Phi(inc) = &mut i.op {
                let before = inc.len();
                inc.retain(|(_, l)| p.contains(l));
                changed |= inc.len() != before;
            }
        }
    }
    let mut reachable = BTreeSet::new();
    let mut work = vec![f.blocks[0].label.clone()];
    while let Some(l) = work.pop() {
        if reachable.insert(l.clone()) {
            if let Some(b) = f.block(&l) {
                work.extend(b.successors().into_iter().map(str::to_string));
            }
        }
    }
    let before = f.blocks.len();
    f.blocks.retain(|b| reachable.contains(&b.label));
    if f.blocks.len() != before {
        changed = true;
        for b in &mut f.blocks {
            for i in &mut b.instrs {
                if let IrOp::Phi(inc) = &mut i.op {
                    inc.retain(|(_, l)| reachable.contains(l));
                }
            }
        }
    }
    changed
}

/// Constant folding and propagation, including branches on constants.
pub fn const_fold(prog: &IrProgram) -> IrProgram {
    let mut p = prog.clone();
    for f in &mut p.functions {
        while fold_function(f) {}
    }
    p
}

/// Removes side-effect-free instructions whose results are never used.
/// Surviving instructions keep their IDs.
pub fn dce(prog: &IrProgram) -> IrProgram {
    let mut p = prog.clone();
    for f in &mut p.functions {
        loop {
            let uses = f.use_counts();
            let mut removed = false;
            for b in &mut f.blocks {
                b.instrs.retain(|i| {
                    let dead = !i.op.has_side_effects()
                        && i.result.as_ref().is_none_or(|r| !uses.contains_key(r.as_str()));
                    removed |= dead;
                    !dead
                });
            }
            if !removed {
                break;
            }
        }
    }
    p
}

/// The fixed optimization pipeline: constant folding, then dead-code elimination.
pub fn optimize(prog: &IrProgram) -> IrProgram {
    dce(&const_fold(prog))
}

/// Splits every edge from a conditional branch into a block that has several
/// predecessors or phis. The new block `P.to.S` holds a single `jump` with a
/// fresh ID and is placed right after `P`.
pub fn split_critical_edges(prog: &IrProgram) -> IrProgram {
    let mut p = prog.clone();
    let mut next_id = p.max_id() + 1;
    for f in &mut p.functions {
        let preds = f.predecessors();
        let mut out: Vec<IrBlock> = Vec::new();
        let mut renames: Vec<(String, String, String)> = Vec::new();
        let mut taken: BTreeSet<String> = f.blocks.iter().map(|b| b.label.clone()).collect();
        for b in &f.blocks {
            let mut b = b.clone();
            let mut inserted = Vec::new();
            if let Some(IrInstr { op: IrOp::Br(_, t, e), .. }) = b.instrs.last_mut() {
                for target in [t, e] {
                    let s = f.blocks.iter().find(|x| &x.label == target).expect("validated");
                    if preds[&s.label].len() < 2 && s.phis().next().is_none() {
                        continue;
                    }
                    let mut name = format!("{}.to.{}", b.label, s.label);
                    let mut k = 1;
                    while taken.contains(&name) {
                        k += 1;
                        name = format!("{}.to.{}.{k}", b.label, s.label);
                    }
                    taken.insert(name.clone());
                    renames.push((s.label.clone(), b.label.clone(), name.clone()));
                    inserted.push(IrBlock {
                        label: name.clone(),
                        instrs: vec![IrInstr {
                            id: next_id,
                            result: None,
                            op: IrOp::Jump(s.label.clone()),
                            loc: None,
                        }],
                    });
                    next_id += 1;
                    *target = name;
                }
            }
            out.push(b);
            out.extend(inserted);
        }
        for (succ, old, new) in renames {
            let s = out.iter_mut().find(|x| x.label == succ).expect("exists");
            for i in &mut s.instrs {
                if let IrOp::Phi(inc) = &mut i.op {
                    for (_, l) in inc.iter_mut() {
                        if *l == old {
                            *l = new.clone();
                        }
                    }
                }
            }
        }
        f.blocks = out;
    }
    p
}

/// Tags every instruction with its own ID as debug location.
pub fn assign_ir_locations(prog: &IrProgram) -> IrProgram {
    let mut p = prog.clone();
    for f in &mut p.functions {
        for b in &mut f.blocks {
            for i in &mut b.instrs {
                i.loc = Some(i.id);
            }
        }
    }
    p
}

/// Optimization, edge splitting and location assignment, validated.
pub fn prepare(prog: &IrProgram) -> Result<IrProgram> {
    let p = assign_ir_locations(&split_critical_edges(&optimize(prog)));
    p.validate()?;
    Ok(p)
}
