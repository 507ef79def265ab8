// SPDX-License-Identifier: Apache-2.0

//! Cycle-level instruction set simulator with round-robin hardware threads.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::Serialize;

use crate::cfg::{build_cfg, FetchBuffer, BUFFER_CAPACITY};
use crate::energy_model::EnergyModel;
use crate::error::{Error, Result};
use crate::isa::{issue_latency, IsaProgram, Opcode, Operand, NUM_REGS};
use crate::multithread::ThreadPattern;
use crate::num::{exact_string, Energy};

pub const DEFAULT_MAX_CYCLES: u64 = 2_000_000_000;

/// Presets and directives read from a `.in` file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimInputs {
    pub mem: BTreeMap<u32, i64>,
    /// Registers preset in every thread.
    pub regs: BTreeMap<u8, i64>,
    /// Registers preset in one thread, applied after `regs`.
    pub thread_regs: BTreeMap<(usize, u8), i64>,
    pub channels: BTreeMap<i64, Vec<i64>>,
    /// Cycles with no runnable thread appended after the run.
    pub idle_cycles: u64,
    pub max_cycles: Option<u64>,
}

fn parse_values(s: &str) -> std::result::Result<Vec<i64>, String> {
    s.split_whitespace()
        .map(|v| v.parse().map_err(|_| format!("bad integer `{v}`")))
        .collect()
}

fn parse_reg(s: &str) -> std::result::Result<u8, String> {
    s.strip_prefix('r')
        .and_then(|n| n.parse().ok())
        .filter(|&r| r < NUM_REGS)
        .ok_or_else(|| format!("bad register `{s}`"))
}

impl SimInputs {
    /// Parses the `.in` format:
    ///
    /// ```text
    /// mem 0 = 1 2 3        # consecutive words from address 0
    /// reg r1 = 7           # every thread
    /// thread 2 reg r1 = 9  # one thread
    /// chan 0 = 5 6         # words waiting on a channel
    /// idle 100             # idle cycles after the run
    /// budget 1000000       # cycle budget
    /// ```
    pub fn parse(text: &str, file: &str) -> Result<SimInputs> {
        let mut inp = SimInputs::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(file, n + 1, 1, m);
            let (head, values) = match line.split_once('=') {
                Some((h, v)) => (h.trim(), Some(v)),
                None => (line, None),
            };
            let words: Vec<&str> = head.split_whitespace().collect();
            let vals = || parse_values(values.unwrap_or("")).map_err(err);
            let one = |v: Vec<i64>| match v.as_slice() {
                [x] => Ok(*x),
                _ => Err(err("expected exactly one value".into())),
            };
            let num = |s: &str| s.parse::<u64>().map_err(|_| err(format!("bad number `{s}`")));
            match words.as_slice() {
                ["mem", addr] => {
                    let base = num(addr)? as u32;
                    for (k, v) in vals()?.into_iter().enumerate() {
                        inp.mem.insert(base + k as u32, v);
                    }
                }
                ["reg", r] => {
                    inp.regs.insert(parse_reg(r).map_err(err)?, one(vals()?)?);
                }
                ["thread", t, "reg", r] => {
                    inp.thread_regs.insert((num(t)? as usize, parse_reg(r).map_err(err)?), one(vals()?)?);
                }
                ["chan", c] => {
                    let c = c.parse().map_err(|_| err(format!("bad channel `{c}`")))?;
                    inp.channels.entry(c).or_default().extend(vals()?);
                }
                ["idle", c] if values.is_none() => inp.idle_cycles += num(c)?,
                ["budget", c] if values.is_none() => inp.max_cycles = Some(num(c)?),
                _ => return Err(err(format!("unrecognized input line `{line}`"))),
            }
        }
        Ok(inp)
    }
}

/// One issued slot.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub cycle: u64,
    pub thread: usize,
    pub block: String,
    pub opcode: Opcode,
    pub energy: Energy,
}

impl TraceRecord {
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.cycle,
            self.thread,
            self.block,
            self.opcode,
            self.energy.nj_string()
        )
    }
}

pub const TRACE_HEADER: &str = "cycle\tthread\tblock\topcode\tenergy_nj";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockStats {
    pub executions: u64,
    pub fnops: u64,
    pub energy: Energy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTotals {
    pub energy: Energy,
    pub cycles: u64,
    pub fnops: u64,
    pub instructions: u64,
    /// Issue slots per thread, FNOPs included and div weighted.
    pub thread_slots: Vec<u64>,
    /// Keyed by `function:label`.
    pub per_block: BTreeMap<String, BlockStats>,
    /// Issued (opcode, active threads) multiset.
    pub opcode_counts: BTreeMap<(Opcode, u32), u64>,
    pub idle_cycles: u64,
}

impl SimTotals {
    pub fn max_thread_slots(&self) -> u64 {
        self.thread_slots.iter().copied().max().unwrap_or(0)
    }

    pub fn to_json(&self) -> TotalsJson {
        TotalsJson {
            energy_nj: self.energy.nj_f64(),
            energy_exact_j: exact_string(self.energy.joules()),
            cycles: self.cycles,
            fnops: self.fnops,
            instructions: self.instructions,
            thread_slots: self.thread_slots.clone(),
            per_block: self
                .per_block
                .iter()
                .map(|(k, s)| {
                    (
                        k.clone(),
                        BlockJson {
                            executions: s.executions,
                            fnops: s.fnops,
                            energy_nj: s.energy.nj_f64(),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockJson {
    pub executions: u64,
    pub fnops: u64,
    pub energy_nj: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TotalsJson {
    pub energy_nj: f64,
    pub energy_exact_j: String,
    pub cycles: u64,
    pub fnops: u64,
    pub instructions: u64,
    pub thread_slots: Vec<u64>,
    pub per_block: BTreeMap<String, BlockJson>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub totals: SimTotals,
    /// Final private memory of each thread.
    pub memories: Vec<Vec<i64>>,
    /// Final register file of each thread.
    pub registers: Vec<[i64; NUM_REGS as usize]>,
}

struct Thread {
    func: usize,
    pc: usize,
    stack: Vec<(usize, usize)>,
    regs: [i64; NUM_REGS as usize],
    mem: Vec<i64>,
    buf: FetchBuffer,
    stall: u64,
    done: bool,
    slots: u64,
}

/// Instruction index to block id, per function.
struct BlockMap {
    ids: Vec<Vec<usize>>,
    starts: Vec<Vec<bool>>,
    labels: Vec<String>,
}

fn block_map(prog: &IsaProgram) -> Result<BlockMap> {
    let mut m = BlockMap {
        ids: Vec::new(),
        starts: Vec::new(),
        labels: Vec::new(),
    };
    for f in &prog.functions {
        let mut ids = vec![usize::MAX; f.instrs.len()];
        let mut starts = vec![false; f.instrs.len()];
        if !f.instrs.is_empty() {
            let cfg = build_cfg(prog, &f.name)?;
            for b in &cfg.blocks {
                let id = m.labels.len();
                m.labels.push(format!("{}:{}", f.name, b.label));
                for k in b.range.clone() {
                    ids[k] = id;
                }
                if b.range.start < starts.len() {
                    starts[b.range.start] = true;
                }
            }
        }
        m.ids.push(ids);
        m.starts.push(starts);
    }
    Ok(m)
}

#[derive(Default)]
struct BlockAcc {
    executions: u64,
    fnops: u64,
    counts: BTreeMap<(Opcode, u32), u64>,
}

type Sink<'s> = Option<&'s mut dyn FnMut(&TraceRecord) -> Result<()>>;

struct Sim<'a> {
    prog: &'a IsaProgram,
    model: &'a EnergyModel,
    blocks: BlockMap,
    acc: Vec<BlockAcc>,
    labels: Vec<BTreeMap<&'a str, usize>>,
    fn_index: BTreeMap<&'a str, usize>,
    threads: Vec<Thread>,
    channels: BTreeMap<i64, VecDeque<i64>>,
    cycle: u64,
}

impl<'a> Sim<'a> {
    fn trap(&self, t: usize, msg: String) -> Error {
        Error::Simulation {
            cycle: self.cycle,
            thread: t,
            msg,
        }
    }

    fn block_id(&self, func: usize, pc: usize) -> usize {
        let id = self.blocks.ids[func][pc];
        assert!(id != usize::MAX, "executed an instruction outside every block");
        id
    }

    /// Moves thread `t` to `pc`, counting a block execution at block starts.
    fn goto(&mut self, t: usize, func: usize, pc: usize) {
        let th = &mut self.threads[t];
        th.func = func;
        th.pc = pc;
        if self.blocks.starts[func].get(pc).copied().unwrap_or(false) {
            let id = self.block_id(func, pc);
            self.acc[id].executions += 1;
        }
    }

    fn ret(&mut self, t: usize) {
        match self.threads[t].stack.pop() {
            Some((f, pc)) => {
                self.threads[t].buf.flush();
                self.goto(t, f, pc);
            }
            None => self.threads[t].done = true,
        }
    }

    /// Returns from functions whose instructions ran out.
    fn settle(&mut self, t: usize) {
        while !self.threads[t].done {
            let th = &self.threads[t];
            if th.pc < self.prog.functions[th.func].instrs.len() {
                break;
            }
            self.ret(t);
        }
    }

    fn addr(&self, t: usize, a: i64) -> Result<usize> {
        usize::try_from(a)
            .ok()
            .filter(|&a| a < self.threads[t].mem.len())
            .ok_or_else(|| self.trap(t, format!("memory access at {a} out of range")))
    }

    fn record(&mut self, t: usize, op: Opcode, n_active: u32, sink: &mut Sink) -> Result<()> {
        let th = &self.threads[t];
        let id = self.block_id(th.func, th.pc);
        let acc = &mut self.acc[id];
        if op == Opcode::Fnop {
            acc.fnops += 1;
        }
        *acc.counts.entry((op, n_active)).or_default() += 1;
        if let Some(sink) = sink {
            sink(&TraceRecord {
                cycle: self.cycle,
                thread: t,
                block: self.blocks.labels[id].clone(),
                opcode: op,
                energy: self.model.instr_energy(op, n_active)?,
            })?;
        }
        Ok(())
    }

    fn step(&mut self, t: usize, n_active: u32, sink: &mut Sink) -> Result<()> {
        if self.threads[t].stall > 0 {
            self.threads[t].stall -= 1;
            return Ok(());
        }
        let prog = self.prog;
        let (func, pc) = (self.threads[t].func, self.threads[t].pc);
        let ins = &prog.functions[func].instrs[pc];
        if self.threads[t].buf.level == 0 {
            self.threads[t].buf.level = BUFFER_CAPACITY;
            self.threads[t].slots += 1;
            return self.record(t, Opcode::Fnop, n_active, sink);
        }
        self.threads[t].buf.issue(ins.opcode);
        self.threads[t].slots += self.model.issue_slots(ins.opcode);
        self.record(t, ins.opcode, n_active, sink)?;

        let reg = |o: &Operand| match o {
            Operand::Reg(r) => r.0 as usize,
            _ => unreachable!("validated operand"),
        };
        let val = |th: &Thread, o: &Operand| match o {
            Operand::Reg(r) => th.regs[r.0 as usize],
            Operand::Imm(v) => *v,
            Operand::Label(_) => unreachable!("validated operand"),
        };
        let ops = &ins.operands;
        let mut next = Some((func, pc + 1));
        match ins.opcode {
            Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Icmp | Opcode::Div => {
                let th = &self.threads[t];
                let (a, b) = (val(th, &ops[1]), val(th, &ops[2]));
                let v = match ins.opcode {
                    Opcode::Add => a.wrapping_add(b),
                    Opcode::Sub => a.wrapping_sub(b),
                    Opcode::Mul => a.wrapping_mul(b),
                    Opcode::Icmp => i64::from(a < b),
                    _ => {
                        if b == 0 {
                            return Err(self.trap(t, format!("division by zero in `{}` #{pc}", prog.functions[func].name)));
                        }
                        self.threads[t].stall = self.model.issue_slots(Opcode::Div) - 1;
                        a.wrapping_div(b)
                    }
                };
                self.threads[t].regs[reg(&ops[0])] = v;
            }
            Opcode::Macc => {
                let th = &mut self.threads[t];
                let d = reg(&ops[0]);
                th.regs[d] = th.regs[d].wrapping_add(val(th, &ops[1]).wrapping_mul(val(th, &ops[2])));
            }
            Opcode::Ldc | Opcode::Mov => {
                let v = val(&self.threads[t], &ops[1]);
                self.threads[t].regs[reg(&ops[0])] = v;
            }
            Opcode::Ldw | Opcode::Stw => {
                let th = &self.threads[t];
                let a = ops[1..].iter().fold(0i64, |s, o| s.wrapping_add(val(th, o)));
                let a = self.addr(t, a)?;
                let th = &mut self.threads[t];
                if ins.opcode == Opcode::Ldw {
                    th.regs[reg(&ops[0])] = th.mem[a];
                } else {
                    th.mem[a] = th.regs[reg(&ops[0])];
                }
            }
            Opcode::Bt | Opcode::Bf | Opcode::Bu => {
                let taken = match ins.opcode {
                    Opcode::Bt => val(&self.threads[t], &ops[0]) != 0,
                    Opcode::Bf => val(&self.threads[t], &ops[0]) == 0,
                    _ => true,
                };
                if taken {
                    let l = ins.target().expect("branch target");
                    self.threads[t].buf.flush();
                    next = Some((func, self.labels[func][l]));
                }
            }
            Opcode::Call => {
                let callee = self.fn_index[ins.target().expect("call target")];
                self.threads[t].stack.push((func, pc + 1));
                self.threads[t].buf.flush();
                next = Some((callee, 0));
            }
            Opcode::Ret => next = None,
            Opcode::In => {
                let c = val(&self.threads[t], &ops[1]);
                let v = self.channels.get_mut(&c).and_then(VecDeque::pop_front).unwrap_or(0);
                self.threads[t].regs[reg(&ops[0])] = v;
            }
            Opcode::Out => {
                let c = val(&self.threads[t], &ops[0]);
                let v = val(&self.threads[t], &ops[1]);
                self.channels.entry(c).or_default().push_back(v);
            }
            Opcode::Nop => {}
            Opcode::Fnop => unreachable!("validated program"),
        }
        match next {
            Some((f, p)) => self.goto(t, f, p),
            None => self.ret(t),
        }
        self.settle(t);
        Ok(())
    }
}

fn simulate(prog: &IsaProgram, inputs: &SimInputs, model: &EnergyModel, mut sink: Sink) -> Result<SimResult> {
    prog.validate()?;
    let entries: Vec<String> = match &prog.threads {
        Some(spec) if spec.pattern == ThreadPattern::Farm => vec![spec.entries[0].clone(); spec.n_threads as usize],
        Some(spec) => spec.entries.clone(),
        None => vec!["main".to_string()],
    };
    let fn_index: BTreeMap<&str, usize> =
        prog.functions.iter().enumerate().map(|(k, f)| (f.name.as_str(), k)).collect();
    let labels = prog
        .functions
        .iter()
        .map(|f| f.labels.iter().map(|(l, i)| (l.as_str(), *i)).collect())
        .collect();
    let mut threads = Vec::new();
    for (t, e) in entries.iter().enumerate() {
        let func = *fn_index
            .get(e.as_str())
            .ok_or_else(|| Error::Validation(format!("thread entry `{e}` is not defined")))?;
        let mut mem = vec![0i64; prog.mem_words as usize];
        for (&a, &v) in &inputs.mem {
            let slot = mem.get_mut(a as usize).ok_or_else(|| {
                Error::Argument(format!("input preset for address {a} outside memory of {} words", prog.mem_words))
            })?;
            *slot = v;
        }
        let mut regs = [0i64; NUM_REGS as usize];
        for (&r, &v) in &inputs.regs {
            regs[r as usize] = v;
        }
        for (&(tt, r), &v) in &inputs.thread_regs {
            if tt == t {
                regs[r as usize] = v;
            }
        }
        threads.push(Thread {
            func,
            pc: 0,
            stack: Vec::new(),
            regs,
            mem,
            buf: FetchBuffer::full(),
            stall: 0,
            done: false,
            slots: 0,
        });
    }
    let n = threads.len();
    let blocks = block_map(prog)?;
    let mut sim = Sim {
        prog,
        model,
        acc: (0..blocks.labels.len()).map(|_| BlockAcc::default()).collect(),
        blocks,
        labels,
        fn_index,
        threads,
        channels: inputs.channels.iter().map(|(c, v)| (*c, v.iter().copied().collect())).collect(),
        cycle: 0,
    };
    for t in 0..n {
        let f = sim.threads[t].func;
        sim.goto(t, f, 0);
        sim.settle(t);
    }
    let budget = inputs.max_cycles.unwrap_or(DEFAULT_MAX_CYCLES);
    let mut active: Vec<usize> = Vec::with_capacity(n);
    loop {
        active.clear();
        active.extend((0..n).filter(|&t| !sim.threads[t].done));
        if active.is_empty() {
            break;
        }
        let n_active = active.len() as u32;
        if sim.cycle >= budget {
            return Err(sim.trap(active[0], format!("cycle budget of {budget} exceeded")));
        }
        for &t in &active {
            sim.step(t, n_active, &mut sink)?;
        }
        sim.cycle += issue_latency(n_active) as u64;
    }

    let mut prices: BTreeMap<(Opcode, u32), Energy> = BTreeMap::new();
    let mut totals = SimTotals {
        energy: model.idle_energy_cycles(inputs.idle_cycles),
        cycles: sim.cycle + inputs.idle_cycles,
        fnops: 0,
        instructions: 0,
        thread_slots: sim.threads.iter().map(|t| t.slots).collect(),
        per_block: BTreeMap::new(),
        opcode_counts: BTreeMap::new(),
        idle_cycles: inputs.idle_cycles,
    };
    for (id, acc) in sim.acc.iter().enumerate() {
        if acc.executions == 0 && acc.counts.is_empty() {
            continue;
        }
        let mut energy = Energy::zero();
        for (&(op, nt), &c) in &acc.counts {
            if !prices.contains_key(&(op, nt)) {
                prices.insert((op, nt), model.instr_energy(op, nt)?);
            }
            energy += &(&prices[&(op, nt)] * c);
            *totals.opcode_counts.entry((op, nt)).or_default() += c;
            if op != Opcode::Fnop {
                totals.instructions += c;
            }
        }
        totals.fnops += acc.fnops;
        totals.energy += &energy;
        totals.per_block.insert(
            sim.blocks.labels[id].clone(),
            BlockStats {
                executions: acc.executions,
                fnops: acc.fnops,
                energy,
            },
        );
    }
    Ok(SimResult {
        totals,
        memories: sim.threads.iter().map(|t| t.mem.clone()).collect(),
        registers: sim.threads.iter().map(|t| t.regs).collect(),
    })
}

/// Runs the program and streams every issued slot to `sink`.
pub fn run_with(
    prog: &IsaProgram,
    inputs: &SimInputs,
    model: &EnergyModel,
    sink: &mut dyn FnMut(&TraceRecord) -> Result<()>,
) -> Result<SimResult> {
    simulate(prog, inputs, model, Some(sink))
}

/// Runs without keeping a trace.
pub fn run(prog: &IsaProgram, inputs: &SimInputs, model: &EnergyModel) -> Result<SimResult> {
    simulate(prog, inputs, model, None)
}

/// Runs and writes the trace as TSV.
pub fn run_traced(prog: &IsaProgram, inputs: &SimInputs, model: &EnergyModel, out: &mut dyn Write) -> Result<SimResult> {
    writeln!(out, "{TRACE_HEADER}").map_err(|e| Error::Io(e.to_string()))?;
    run_with(prog, inputs, model, &mut |r| {
        writeln!(out, "{}", r.tsv_line()).map_err(|e| Error::Io(e.to_string()))
    })
}

/// Simulated energy for each named input. The model has no data terms, so
/// inputs that share a control path give identical energies.
pub fn data_sensitivity_probe(
    prog: &IsaProgram,
    inputs: &[(String, SimInputs)],
    model: &EnergyModel,
) -> Result<Vec<(String, Energy)>> {
    inputs
        .iter()
        .map(|(name, inp)| Ok((name.clone(), run(prog, inp, model)?.totals.energy)))
        .collect()
}
