// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::{IrFunction, IrOp, IrProgram, Value};
use crate::error::{Error, Result};

/// Final state of a reference execution of `main`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrOutcome {
    pub ret: Option<i64>,
    pub memory: Vec<i64>,
    /// Executed IR instructions, phis included.
    pub steps: u64,
}

struct Machine<'a> {
    prog: &'a IrProgram,
    memory: Vec<i64>,
    steps: u64,
    max_steps: u64,
}

fn fail(msg: String) -> Error {
    Error::Simulation {
        cycle: 0,
        thread: 0,
        msg,
    }
}

impl Machine<'_> {
    fn addr(&self, a: i64) -> Result<usize> {
        usize::try_from(a)
            .ok()
            .filter(|&a| a < self.memory.len())
            .ok_or_else(|| fail(format!("IR memory access at {a} out of range")))
    }

    fn call(&mut self, f: &IrFunction, args: Vec<i64>) -> Result<Option<i64>> {
        let mut env: BTreeMap<&str, i64> = f.params.iter().map(String::as_str).zip(args).collect();
        let get = |env: &BTreeMap<&str, i64>, v: &Value| match v {
            Value::Const(c) => *c,
            Value::Var(n) => env.get(n.as_str()).copied().unwrap_or(0),
        };
        let mut block = &f.blocks[0];
        let mut prev: Option<&str> = None;
        loop {
            let phis: Vec<(&str, i64)> = block
                .phis()
                .map(|i| {
                    let IrOp::Phi(inc) = &i.op else { unreachable!() };
                    let from = prev.expect("phi in entry block");
                    let (v, _) = inc.iter().find(|(_, l)| l == from).expect("validated phi");
                    (i.result.as_deref().unwrap(), get(&env, v))
                })
                .collect();
            for (r, v) in phis {
                env.insert(r, v);
                self.steps += 1;
            }
            for i in block.instrs.iter().skip_while(|i| matches!(i.op, IrOp::Phi(_))) {
                self.steps += 1;
                if self.steps > self.max_steps {
                    return Err(fail(format!("IR step budget of {} exceeded", self.max_steps)));
                }
                let value = match &i.op {
                    IrOp::Const(c) => Some(*c),
                    IrOp::Bin(op, a, b) => Some(
                        op.eval(get(&env, a), get(&env, b))
                            .ok_or_else(|| fail(format!("division by zero at IR {}", i.id)))?,
                    ),
                    IrOp::Icmp(p, a, b) => Some(p.eval(get(&env, a), get(&env, b))),
                    IrOp::Load(a) => {
                        let a = self.addr(get(&env, a))?;
                        Some(self.memory[a])
                    }
                    IrOp::Store(a, v) => {
                        let a = self.addr(get(&env, a))?;
                        self.memory[a] = get(&env, v);
                        None
                    }
                    IrOp::Call(g, args) => {
                        let callee = self.prog.function(g).expect("validated");
                        let args = args.iter().map(|a| get(&env, a)).collect();
                        self.call(callee, args)?
                    }
                    IrOp::Ret(v) => return Ok(v.as_ref().map(|v| get(&env, v))),
                    IrOp::Jump(t) => {
                        prev = Some(&block.label);
                        block = f.block(t).expect("validated");
                        break;
                    }
                    IrOp::Br(c, t, e) => {
                        prev = Some(&block.label);
                        block = f.block(if get(&env, c) != 0 { t } else { e }).expect("validated");
                        break;
                    }
                    IrOp::Phi(_) => unreachable!(),
                };
                if let (Some(r), Some(v)) = (&i.result, value) {
                    env.insert(r, v);
                }
            }
        }
    }
}

/// Runs `main` of a validated program on a zero-initialized memory with the given presets.
pub fn interpret(prog: &IrProgram, presets: &BTreeMap<u32, i64>, max_steps: u64) -> Result<IrOutcome> {
    let main = prog.function("main").ok_or_else(|| fail("no `main` function".into()))?;
    let mut m = Machine {
        prog,
        memory: vec![0; prog.mem_words as usize],
        steps: 0,
        max_steps,
    };
    for (&a, &v) in presets {
        let a = m.addr(a as i64)?;
        m.memory[a] = v;
    }
    let ret = m.call(main, Vec::new())?;
    Ok(IrOutcome {
        ret,
        memory: m.memory,
        steps: m.steps,
    })
}
