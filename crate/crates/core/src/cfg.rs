// SPDX-License-Identifier: Apache-2.0

//! Control-flow graphs, dominators, natural loops, static FNOP placement and
//! per-block energy characterization.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::ops::Range;

use crate::energy_model::EnergyModel;
use crate::error::{Error, Result};
use crate::isa::{IsaProgram, Opcode};
use crate::num::{exact_string, Energy};

pub type BlockId = usize;

/// How control reaches the head of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Fallthrough,
    Taken,
    CondTaken,
    CondFallthrough,
    /// From a block ending in `call` to the continuation after the call.
    CallReturn,
}

impl EdgeKind {
    fn name(self) -> &'static str {
        match self {
            EdgeKind::Fallthrough => "fallthrough",
            EdgeKind::Taken => "taken",
            EdgeKind::CondTaken => "cond-taken",
            EdgeKind::CondFallthrough => "cond-fallthrough",
            EdgeKind::CallReturn => "call-return",
        }
    }

    /// Whether the instruction buffer is flushed along this edge in the static model.
    /// Conditional edges are flushed on both outcomes.
    fn flushes(self) -> bool {
        !matches!(self, EdgeKind::Fallthrough)
    }

    /// Whether every traversal at run time flushes the buffer.
    fn always_flushes(self) -> bool {
        matches!(self, EdgeKind::Taken | EdgeKind::CondTaken | EdgeKind::CallReturn)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: BlockId,
    pub to: BlockId,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasicBlock {
    pub id: BlockId,
    pub label: String,
    /// Instruction indices within the function.
    pub range: Range<usize>,
    pub opcodes: Vec<Opcode>,
    pub succs: Vec<BlockId>,
    pub preds: Vec<BlockId>,
    pub loop_header: bool,
    /// Innermost enclosing loop.
    pub loop_id: Option<usize>,
    pub call: Option<String>,
    /// Control may leave the function from this block.
    pub can_exit: bool,
    pub static_fnop_count: u32,
    /// Offsets within the block before which each static FNOP issues.
    pub fnop_positions: Vec<usize>,
    pub energy_cost: Energy,
    /// Issue slots, FNOPs included.
    pub slot_cost: u64,
    /// Fewest FNOPs any execution can issue, for lower bounds.
    pub min_fnop_count: u32,
    pub energy_cost_min: Energy,
    pub slot_cost_min: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    pub id: usize,
    pub header: BlockId,
    pub members: BTreeSet<BlockId>,
    pub parent: Option<usize>,
    pub back_edges: Vec<(BlockId, BlockId)>,
    pub entry_edges: Vec<(BlockId, BlockId)>,
}

/// Input to [`Cfg::from_parts`].
#[derive(Clone, Debug, Default)]
pub struct BlockSpec {
    pub label: String,
    pub range: Range<usize>,
    pub opcodes: Vec<Opcode>,
    pub call: Option<String>,
    pub can_exit: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cfg {
    pub function: String,
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<Edge>,
    pub entry: BlockId,
    pub loops: Vec<Loop>,
    /// The function starts a thread and is never called, so it begins with a full buffer.
    pub entry_buffer_full: bool,
    /// Extra energy charged when an edge is traversed (used by IR-level analysis).
    pub edge_costs: BTreeMap<(BlockId, BlockId), Energy>,
    pub edge_costs_min: BTreeMap<(BlockId, BlockId), Energy>,
    pub warnings: Vec<String>,
    pub characterized_threads: Option<u32>,
}

impl Cfg {
    /// Builds a graph from explicit blocks and edges. Unreachable blocks are
    /// dropped with a warning; loops are detected; irreducible graphs are rejected.
    pub fn from_parts(function: &str, specs: Vec<BlockSpec>, edges: Vec<Edge>, entry: BlockId) -> Result<Cfg> {
        let n = specs.len();
        if entry >= n {
            return Err(Error::Analysis(format!("`{function}`: entry block out of range")));
        }
        // Deduplicate parallel edges, keeping the first kind.
        let mut seen = BTreeSet::new();
        let edges: Vec<Edge> = edges.into_iter().filter(|e| seen.insert((e.from, e.to))).collect();

        let mut adj = vec![Vec::new(); n];
        for e in &edges {
            adj[e.from].push(e.to);
        }
        let mut reachable = vec![false; n];
        let mut queue = VecDeque::from([entry]);
        reachable[entry] = true;
        while let Some(b) = queue.pop_front() {
            for &s in &adj[b] {
                if !reachable[s] {
                    reachable[s] = true;
                    queue.push_back(s);
                }
            }
        }
        let mut warnings = Vec::new();
        let mut remap = vec![usize::MAX; n];
        let mut blocks = Vec::new();
        for (old, spec) in specs.into_iter().enumerate() {
            if !reachable[old] {
                warnings.push(format!("`{function}`: unreachable block `{}` excluded", spec.label));
                continue;
            }
            remap[old] = blocks.len();
            blocks.push(BasicBlock {
                id: blocks.len(),
                label: spec.label,
                range: spec.range,
                opcodes: spec.opcodes,
                succs: Vec::new(),
                preds: Vec::new(),
                loop_header: false,
                loop_id: None,
                call: spec.call,
                can_exit: spec.can_exit,
                static_fnop_count: 0,
                fnop_positions: Vec::new(),
                energy_cost: Energy::zero(),
                slot_cost: 0,
                min_fnop_count: 0,
                energy_cost_min: Energy::zero(),
                slot_cost_min: 0,
            });
        }
        let edges: Vec<Edge> = edges
            .into_iter()
            .filter(|e| reachable[e.from])
            .map(|e| Edge {
                from: remap[e.from],
                to: remap[e.to],
                kind: e.kind,
            })
            .collect();
        for e in &edges {
            blocks[e.from].succs.push(e.to);
            blocks[e.to].preds.push(e.from);
        }
        let mut cfg = Cfg {
            function: function.to_string(),
            blocks,
            edges,
            entry: remap[entry],
            loops: Vec::new(),
            entry_buffer_full: false,
            edge_costs: BTreeMap::new(),
            edge_costs_min: BTreeMap::new(),
            warnings,
            characterized_threads: None,
        };
        cfg.detect_loops()?;
        Ok(cfg)
    }

    /// Convenience constructor for abstract graphs: block `i` is labelled `b{i}`,
    /// blocks without successors exit.
    pub fn from_graph(function: &str, n: usize, edges: &[(BlockId, BlockId)]) -> Result<Cfg> {
        let specs = (0..n)
            .map(|i| BlockSpec {
                label: format!("b{i}"),
                range: 0..0,
                can_exit: !edges.iter().any(|(a, _)| *a == i),
                ..Default::default()
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(from, to)| Edge {
                from,
                to,
                kind: EdgeKind::Taken,
            })
            .collect();
        Cfg::from_parts(function, specs, edges, 0)
    }

    pub fn block_by_label(&self, label: &str) -> Option<BlockId> {
        self.blocks.iter().find(|b| b.label == label).map(|b| b.id)
    }

    pub fn edge(&self, from: BlockId, to: BlockId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn is_single_path(&self) -> bool {
        self.loops.is_empty() && self.blocks.iter().all(|b| b.succs.len() + usize::from(b.can_exit) <= 1)
    }

    fn rpo(&self) -> Vec<BlockId> {
        let n = self.blocks.len();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![(self.entry, 0usize)];
        visited[self.entry] = true;
        while let Some((b, i)) = stack.pop() {
            if i < self.blocks[b].succs.len() {
                stack.push((b, i + 1));
                let s = self.blocks[b].succs[i];
                if !visited[s] {
                    visited[s] = true;
                    stack.push((s, 0));
                }
            } else {
                order.push(b);
            }
        }
        order.reverse();
        order
    }

    /// Immediate dominators (entry maps to itself).
    pub fn idoms(&self) -> Vec<BlockId> {
        let rpo = self.rpo();
        let mut index = vec![0; self.blocks.len()];
        for (i, &b) in rpo.iter().enumerate() {
            index[b] = i;
        }
        let mut idom: Vec<Option<BlockId>> = vec![None; self.blocks.len()];
        idom[self.entry] = Some(self.entry);
        let mut changed = true;
        while changed {
            changed = false;
            for &b in rpo.iter().skip(1) {
                let mut new: Option<BlockId> = None;
                for &p in &self.blocks[b].preds {
                    if idom[p].is_none() {
                        continue;
                    }
                    new = Some(match new {
                        None => p,
                        Some(cur) => {
                            let (mut x, mut y) = (cur, p);
                            while x != y {
                                while index[x] > index[y] {
                                    x = idom[x].unwrap();
                                }
                                while index[y] > index[x] {
                                    y = idom[y].unwrap();
                                }
                            }
                            x
                        }
                    });
                }
                if idom[b] != new {
                    idom[b] = new;
                    changed = true;
                }
            }
        }
        idom.into_iter().map(|d| d.expect("all blocks reachable")).collect()
    }

    pub fn dominates(&self, idoms: &[BlockId], a: BlockId, mut b: BlockId) -> bool {
        loop {
            if a == b {
                return true;
            }
            if b == self.entry {
                return false;
            }
            b = idoms[b];
        }
    }

    fn detect_loops(&mut self) -> Result<()> {
        let idoms = self.idoms();
        let mut back: BTreeMap<BlockId, Vec<(BlockId, BlockId)>> = BTreeMap::new();
        for e in &self.edges {
            if self.dominates(&idoms, e.to, e.from) {
                back.entry(e.to).or_default().push((e.from, e.to));
            }
        }
        // Reducible iff the graph without back edges is acyclic.
        let n = self.blocks.len();
        let is_back = |e: &Edge| back.get(&e.to).is_some_and(|v| v.contains(&(e.from, e.to)));
        let mut indeg = vec![0usize; n];
        for e in self.edges.iter().filter(|e| !is_back(e)) {
            indeg[e.to] += 1;
        }
        let mut queue: VecDeque<BlockId> = (0..n).filter(|&b| indeg[b] == 0).collect();
        let mut done = 0;
        while let Some(b) = queue.pop_front() {
            done += 1;
            for e in self.edges.iter().filter(|e| e.from == b && !is_back(e)) {
                indeg[e.to] -= 1;
                if indeg[e.to] == 0 {
                    queue.push_back(e.to);
                }
            }
        }
        if done < n {
            let offending: Vec<String> = self
                .edges
                .iter()
                .filter(|e| !is_back(e) && indeg[e.to] > 0 && indeg[e.from] > 0)
                .map(|e| format!("{}->{}", self.blocks[e.from].label, self.blocks[e.to].label))
                .collect();
            return Err(Error::Analysis(format!(
                "`{}`: irreducible loop involving edges {}",
                self.function,
                offending.join(", ")
            )));
        }

        let mut loops = Vec::new();
        for (header, back_edges) in back {
            let mut members = BTreeSet::from([header]);
            let mut work: Vec<BlockId> = back_edges.iter().map(|(src, _)| *src).collect();
            while let Some(b) = work.pop() {
                if members.insert(b) {
                    work.extend(self.blocks[b].preds.iter().copied());
                }
            }
            let entry_edges = self.blocks[header]
                .preds
                .iter()
                .filter(|p| !members.contains(p))
                .map(|&p| (p, header))
                .collect();
            loops.push(Loop {
                id: loops.len(),
                header,
                members,
                parent: None,
                back_edges,
                entry_edges,
            });
        }
        for i in 0..loops.len() {
            let parent = (0..loops.len())
                .filter(|&j| j != i && loops[j].members.contains(&loops[i].header) && loops[j].members.len() > loops[i].members.len())
                .min_by_key(|&j| loops[j].members.len());
            loops[i].parent = parent;
        }
        for b in &mut self.blocks {
            b.loop_header = loops.iter().any(|l| l.header == b.id);
            b.loop_id = loops
                .iter()
                .filter(|l| l.members.contains(&b.id))
                .min_by_key(|l| l.members.len())
                .map(|l| l.id);
        }
        self.loops = loops;
        Ok(())
    }

    pub fn total_static_fnops(&self) -> u64 {
        self.blocks.iter().map(|b| b.static_fnop_count as u64).sum()
    }

    /// Deterministic text rendering for golden tests and `--dump-cfg`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "cfg {} entry={} threads={}",
            self.function,
            self.blocks[self.entry].label,
            self.characterized_threads.map_or("-".to_string(), |n| n.to_string())
        );
        for b in &self.blocks {
            let succs: Vec<&str> = b.succs.iter().map(|&x| self.blocks[x].label.as_str()).collect();
            let _ = writeln!(
                s,
                "  block {} {} [{}..{}) fnops={} slots={} energy_nj={} exact_j={} succs=[{}]{}{}{}",
                b.id,
                b.label,
                b.range.start,
                b.range.end,
                b.static_fnop_count,
                b.slot_cost,
                b.energy_cost.nj_string(),
                exact_string(b.energy_cost.joules()),
                succs.join(","),
                if b.loop_header { " header" } else { "" },
                b.loop_id.map_or(String::new(), |l| format!(" loop={l}")),
                if b.can_exit { " exit" } else { "" },
            );
        }
        for e in &self.edges {
            let _ = writeln!(s, "  edge {}->{} {}", self.blocks[e.from].label, self.blocks[e.to].label, e.kind.name());
        }
        for l in &self.loops {
            let members: Vec<&str> = l.members.iter().map(|&m| self.blocks[m].label.as_str()).collect();
            let _ = writeln!(
                s,
                "  loop {} header={} members=[{}] parent={}",
                l.id,
                self.blocks[l.header].label,
                members.join(","),
                l.parent.map_or("-".to_string(), |p| p.to_string())
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
        s
    }
}

/// Builds the CFG of one function of a machine program.
pub fn build_cfg(prog: &IsaProgram, function: &str) -> Result<Cfg> {
    let f = prog
        .function(function)
        .ok_or_else(|| Error::Analysis(format!("no function named `{function}`")))?;
    let n = f.instrs.len();
    let mut leaders = BTreeSet::from([0usize]);
    for (i, ins) in f.instrs.iter().enumerate() {
        if ins.opcode.ends_block() && i + 1 < n {
            leaders.insert(i + 1);
        }
        if ins.opcode != Opcode::Call {
            if let Some(t) = ins.target() {
                let idx = f.label_index(t).ok_or_else(|| Error::Analysis(format!("undefined label `{t}`")))?;
                leaders.insert(idx);
            }
        }
    }
    leaders.retain(|&l| l < n || l == 0);
    let starts: Vec<usize> = leaders.into_iter().collect();
    let block_of = |idx: usize| starts.partition_point(|&s| s <= idx) - 1;

    let mut specs = Vec::new();
    let mut edges = Vec::new();
    for (b, &start) in starts.iter().enumerate() {
        let end = starts.get(b + 1).copied().unwrap_or(n);
        let label = f.label_at(start).map(str::to_string).unwrap_or_else(|| format!("@{start}"));
        let opcodes: Vec<Opcode> = f.instrs[start..end].iter().map(|i| i.opcode).collect();
        let last = f.instrs[start..end].last();
        let next = if end < n { Some(block_of(end)) } else { None };
        let mut can_exit = false;
        let mut call = None;
        let target_block = |t: &str| block_of(f.label_index(t).expect("checked above"));
        match last {
            Some(ins) if ins.opcode.is_conditional_branch() => {
                edges.push(Edge {
                    from: b,
                    to: target_block(ins.target().unwrap()),
                    kind: EdgeKind::CondTaken,
                });
                match next {
                    Some(nb) => edges.push(Edge {
                        from: b,
                        to: nb,
                        kind: EdgeKind::CondFallthrough,
                    }),
                    None => can_exit = true,
                }
            }
            Some(ins) if ins.opcode == Opcode::Bu => edges.push(Edge {
                from: b,
                to: target_block(ins.target().unwrap()),
                kind: EdgeKind::Taken,
            }),
            Some(ins) if ins.opcode == Opcode::Ret => can_exit = true,
            Some(ins) if ins.opcode == Opcode::Call => {
                call = ins.target().map(str::to_string);
                match next {
                    Some(nb) => edges.push(Edge {
                        from: b,
                        to: nb,
                        kind: EdgeKind::CallReturn,
                    }),
                    None => can_exit = true,
                }
            }
            _ => match next {
                Some(nb) => edges.push(Edge {
                    from: b,
                    to: nb,
                    kind: EdgeKind::Fallthrough,
                }),
                None => can_exit = true,
            },
        }
        specs.push(BlockSpec {
            label,
            range: start..end,
            opcodes,
            call,
            can_exit,
        });
    }
    let mut cfg = Cfg::from_parts(function, specs, edges, 0)?;
    let entries = prog.thread_entries();
    let called = prog.call_graph().values().any(|callees| callees.contains(function));
    cfg.entry_buffer_full = entries.iter().any(|e| e == function) && !called;
    Ok(cfg)
}

/// Builds the CFG of every function, keyed by name.
pub fn build_all(prog: &IsaProgram) -> Result<BTreeMap<String, Cfg>> {
    prog.functions.iter().map(|f| Ok((f.name.clone(), build_cfg(prog, &f.name)?))).collect()
}

/// Capacity of the per-thread instruction buffer.
pub const BUFFER_CAPACITY: u8 = 4;

/// The instruction-buffer model shared by static FNOP placement and the simulator.
///
/// One instruction is fetched in every issue slot whose instruction does not use
/// the memory/port path. Issuing from an empty buffer costs an FNOP slot, which
/// refills the whole buffer. Taken branches flush it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FetchBuffer {
    pub level: u8,
}

impl FetchBuffer {
    pub fn full() -> Self {
        FetchBuffer { level: BUFFER_CAPACITY }
    }

    pub fn empty() -> Self {
        FetchBuffer { level: 0 }
    }

    /// Issues one instruction; returns true if an FNOP had to be issued first.
    pub fn issue(&mut self, opcode: Opcode) -> bool {
        let fnop = self.level == 0;
        if fnop {
            self.level = BUFFER_CAPACITY;
        }
        self.level -= 1;
        if !opcode.blocks_fetch() {
            self.level = (self.level + 1).min(BUFFER_CAPACITY);
        }
        fnop
    }

    pub fn flush(&mut self) {
        self.level = 0;
    }
}

fn run_block(opcodes: &[Opcode], entry_level: u8) -> (Vec<usize>, u8) {
    let mut buf = FetchBuffer { level: entry_level };
    let positions = opcodes
        .iter()
        .enumerate()
        .filter_map(|(k, &op)| buf.issue(op).then_some(k))
        .collect();
    (positions, buf.level)
}

/// Places FNOPs statically. Each block is analysed for every buffer level its
/// entry may have (the worst entry over all incoming edges, up to full), keeping
/// the largest FNOP count and the smallest exit level.
pub fn place_fnops(mut cfg: Cfg) -> Cfg {
    let n = cfg.blocks.len();
    let mut entry = vec![BUFFER_CAPACITY; n];
    let mut exit = vec![BUFFER_CAPACITY; n];
    let mut result: Vec<Vec<usize>> = vec![Vec::new(); n];
    loop {
        let mut changed = false;
        for b in 0..n {
            let mut level = BUFFER_CAPACITY;
            if b == cfg.entry && !cfg.entry_buffer_full {
                level = 0;
            }
            for e in cfg.edges.iter().filter(|e| e.to == b) {
                level = level.min(if e.kind.flushes() { 0 } else { exit[e.from] });
            }
            let mut worst: Option<Vec<usize>> = None;
            let mut min_exit = BUFFER_CAPACITY;
            for start in level..=BUFFER_CAPACITY {
                let (pos, out) = run_block(&cfg.blocks[b].opcodes, start);
                if worst.as_ref().is_none_or(|w| pos.len() > w.len()) {
                    worst = Some(pos);
                }
                min_exit = min_exit.min(out);
            }
            let worst = worst.unwrap_or_default();
            if entry[b] != level || exit[b] != min_exit || result[b] != worst {
                changed = true;
            }
            entry[b] = level;
            exit[b] = min_exit;
            result[b] = worst;
        }
        if !changed {
            break;
        }
    }
    for (b, pos) in result.into_iter().enumerate() {
        cfg.blocks[b].static_fnop_count = pos.len() as u32;
        cfg.blocks[b].fnop_positions = pos;
    }
    for (b, count) in optimistic_fnops(&cfg).into_iter().enumerate() {
        cfg.blocks[b].min_fnop_count = count;
    }
    cfg
}

/// FNOP counts under the highest buffer level each block can be entered with.
/// Only edges that flush on every traversal reset the level; the FNOP count
/// never grows with the entry level, so this is a per-execution minimum.
fn optimistic_fnops(cfg: &Cfg) -> Vec<u32> {
    let n = cfg.blocks.len();
    let mut exit = vec![BUFFER_CAPACITY; n];
    let mut entry = vec![BUFFER_CAPACITY; n];
    loop {
        let mut changed = false;
        for b in 0..n {
            let mut level = 0;
            if b == cfg.entry {
                level = if cfg.entry_buffer_full { BUFFER_CAPACITY } else { 0 };
            }
            for e in cfg.edges.iter().filter(|e| e.to == b) {
                level = level.max(if e.kind.always_flushes() { 0 } else { exit[e.from] });
            }
            let (_, out) = run_block(&cfg.blocks[b].opcodes, level);
            if entry[b] != level || exit[b] != out {
                changed = true;
            }
            entry[b] = level;
            exit[b] = out;
        }
        if !changed {
            break;
        }
    }
    (0..n).map(|b| run_block(&cfg.blocks[b].opcodes, entry[b]).0.len() as u32).collect()
}

/// Fills per-block energy and slot costs at a fixed number of active threads.
pub fn characterize_cfg(mut cfg: Cfg, model: &EnergyModel, n_active_threads: u32) -> Result<Cfg> {
    let prices = model.prices(n_active_threads)?;
    let fnop = prices.get(Opcode::Fnop)?.clone();
    for b in &mut cfg.blocks {
        let mut energy = Energy::zero();
        let mut slots = 0;
        for &op in &b.opcodes {
            energy += prices.get(op)?;
            slots += model.issue_slots(op);
        }
        b.energy_cost_min = energy.clone() + &fnop * b.min_fnop_count as u64;
        b.slot_cost_min = slots + b.min_fnop_count as u64;
        energy += &fnop * b.static_fnop_count as u64;
        slots += b.static_fnop_count as u64;
        b.energy_cost = energy;
        b.slot_cost = slots;
    }
    cfg.characterized_threads = Some(n_active_threads);
    Ok(cfg)
}

/// Builds, places FNOPs in and characterizes every function of a program.
pub fn characterized_program(prog: &IsaProgram, model: &EnergyModel, n_active_threads: u32) -> Result<BTreeMap<String, Cfg>> {
    build_all(prog)?
        .into_iter()
        .map(|(name, cfg)| Ok((name, characterize_cfg(place_fnops(cfg), model, n_active_threads)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::parse_isa;
    use crate::num::q_frac;
    use proptest::prelude::*;

    fn cfg_of(text: &str, f: &str) -> Cfg {
        place_fnops(build_cfg(&parse_isa(text, "t").unwrap(), f).unwrap())
    }

    #[test]
    fn straight_line_is_one_block() {
        let c = cfg_of("func main:\n  ldc r0, 1\n  add r1, r0, r0\n  ret\n", "main");
        assert_eq!(c.blocks.len(), 1);
        assert!(c.loops.is_empty());
        assert!(c.is_single_path());
    }

    #[test]
    fn diamond_has_four_blocks_and_no_loops() {
        let c = cfg_of(
            "func main:\n  bt r0, then\n  ldc r1, 2\n  bu join\nthen:\n  ldc r1, 3\njoin:\n  ret\n",
            "main",
        );
        assert_eq!(c.blocks.len(), 4);
        assert!(c.loops.is_empty());
        assert!(!c.is_single_path());
    }

    #[test]
    fn counted_loop_header_dominates_body() {
        let c = cfg_of(
            "func main:\n  ldc r0, 10\nloop:\n  bf r0, done\n  sub r0, r0, 1\n  bu loop\ndone:\n  ret\n",
            "main",
        );
        assert!(c.blocks.len() >= 3);
        assert_eq!(c.loops.len(), 1);
        let header = c.block_by_label("loop").unwrap();
        assert_eq!(c.loops[0].header, header);
        // Independent dominance check: removing the header disconnects every member.
        for &m in &c.loops[0].members {
            if m == header {
                continue;
            }
            assert!(!reachable_without(&c, header, m));
        }
    }

    fn reachable_without(c: &Cfg, removed: BlockId, target: BlockId) -> bool {
        if removed == c.entry {
            return false;
        }
        let mut seen = vec![false; c.blocks.len()];
        let mut stack = vec![c.entry];
        seen[c.entry] = true;
        while let Some(b) = stack.pop() {
            if b == target {
                return true;
            }
            for &s in &c.blocks[b].succs {
                if s != removed && !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        false
    }

    #[test]
    fn unreachable_blocks_are_excluded_with_warning() {
        let c = cfg_of("func main:\n  ret\ndead:\n  add r0, r0, r0\n  ret\n", "main");
        assert_eq!(c.blocks.len(), 1);
        assert_eq!(c.warnings.len(), 1);
        assert!(c.warnings[0].contains("unreachable"));
    }

    #[test]
    fn irreducible_graph_is_rejected() {
        // 0 -> 1, 0 -> 2, 1 <-> 2
        let e = Cfg::from_graph("f", 3, &[(0, 1), (0, 2), (1, 2), (2, 1)]).unwrap_err();
        assert!(matches!(e, Error::Analysis(ref m) if m.contains("irreducible")), "{e:?}");
    }

    #[test]
    fn aligned_non_memory_block_has_no_fnops() {
        let c = cfg_of("func main:\n  add r0, r0, r0\n  sub r0, r0, r0\n  mov r1, r0\n  ldc r2, 1\n", "main");
        assert!(c.entry_buffer_full);
        assert_eq!(c.blocks[0].static_fnop_count, 0);
    }

    #[test]
    fn four_memory_operations_cost_one_fnop() {
        // `f` is called, so it starts with a flushed buffer: one refill, then the
        // four memory operations drain the refilled buffer exactly.
        let c = cfg_of(
            "func main:\n  call f\n  ret\nfunc f:\n  ldw r0, 0\n  ldw r1, 1\n  stw r0, 2\n  stw r1, 3\n",
            "f",
        );
        assert_eq!(c.blocks.len(), 1);
        assert_eq!(c.blocks[0].static_fnop_count, 1);
        // Starting full, the same block drains the buffer without an FNOP inside it.
        let c = cfg_of("func main:\n  ldw r0, 0\n  ldw r1, 1\n  stw r0, 2\n  stw r1, 3\n", "main");
        assert_eq!(c.blocks[0].static_fnop_count, 0);
        // A fifth access needs a refill.
        let c = cfg_of("func main:\n  ldw r0, 0\n  ldw r1, 1\n  stw r0, 2\n  stw r1, 3\n  ldw r2, 4\n", "main");
        assert_eq!(c.blocks[0].static_fnop_count, 1);
        assert_eq!(c.blocks[0].fnop_positions, vec![4]);
    }

    #[test]
    fn branch_target_refill_is_charged_each_iteration() {
        let c = cfg_of("func main:\nspin:\n  bu spin\n", "main");
        let h = c.block_by_label("spin").unwrap();
        assert!(c.blocks[h].loop_header);
        assert_eq!(c.blocks[h].static_fnop_count, 1);
    }

    #[test]
    fn conditional_fallthrough_is_charged_pessimistically() {
        let c = cfg_of("func main:\n  bt r0, out\n  add r0, r0, r0\nout:\n  ret\n", "main");
        let ft = c.block_by_label("@1").unwrap();
        assert_eq!(c.blocks[ft].static_fnop_count, 1);
        assert_eq!(c.blocks[ft].min_fnop_count, 0);
    }

    #[test]
    fn optimistic_count_never_exceeds_static() {
        let c = cfg_of(
            "func main:
  ldc r0, 3
loop:
  ldw r1, 0
  bf r0, done
  sub r0, r0, 1
  bu loop
done:
  stw r1, 1
  ret
",
            "main",
        );
        for b in &c.blocks {
            assert!(b.min_fnop_count <= b.static_fnop_count, "{}", b.label);
        }
        let h = c.block_by_label("loop").unwrap();
        assert_eq!(c.blocks[h].static_fnop_count, 1);
        assert_eq!(c.blocks[h].min_fnop_count, 0);
    }

    #[test]
    fn characterize_single_add() {
        let m = EnergyModel::fixture();
        let c = characterize_cfg(cfg_of("func main:\n  add r0, r0, r0\n", "main"), &m, 1).unwrap();
        assert_eq!(c.blocks[0].energy_cost.nanojoules(), q_frac(316, 1000));
        assert_eq!(c.blocks[0].slot_cost, 1);
    }

    #[test]
    fn characterize_empty_block_is_zero() {
        let m = EnergyModel::fixture();
        let c = characterize_cfg(cfg_of("func main:\n", "main"), &m, 1).unwrap();
        assert_eq!(c.blocks.len(), 1);
        assert!(c.blocks[0].energy_cost.is_zero());
    }

    #[test]
    fn characterize_add_then_divide() {
        let m = EnergyModel::fixture();
        let c = characterize_cfg(cfg_of("func main:\n  add r0, r0, r0\n  div r1, r0, r0\n", "main"), &m, 1).unwrap();
        // add: 0.316 nJ; div: (0.020 + 0.018 * 1.3) * 4 * 2e-9 * 32 J = 11.1104 nJ
        assert_eq!(c.blocks[0].energy_cost.nanojoules(), q_frac(316, 1000) + q_frac(111_104, 10_000));
        assert_eq!(c.blocks[0].slot_cost, 33);
    }

    fn brute_dominates(n: usize, edges: &[(usize, usize)], a: usize, b: usize) -> bool {
        if a == b {
            return true;
        }
        if a == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &(u, v) in edges {
                if u == x && v != a && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        !seen[b]
    }

    fn brute_reachable(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &(u, v) in edges {
                if u == x && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    proptest! {
        #[test]
        fn loop_detection_agrees_with_exhaustive_dominance(
            n in 1usize..=8,
            raw in proptest::collection::vec((0usize..8, 0usize..8), 0..16),
        ) {
            let mut edges: Vec<(usize, usize)> = raw.into_iter().filter(|(a, b)| *a < n && *b < n).collect();
            edges.sort();
            edges.dedup();
            let reach = brute_reachable(n, &edges);
            let live: Vec<(usize, usize)> = edges.iter().copied().filter(|(a, _)| reach[*a]).collect();
            let back: BTreeSet<(usize, usize)> = live
                .iter()
                .copied()
                .filter(|&(u, v)| brute_dominates(n, &live, v, u))
                .collect();
            // Acyclicity of the forward graph decides reducibility.
            let forward: Vec<(usize, usize)> = live.iter().copied().filter(|e| !back.contains(e)).collect();
            let mut indeg = vec![0; n];
            for &(_, v) in &forward { indeg[v] += 1; }
            let mut q: Vec<usize> = (0..n).filter(|&v| reach[v] && indeg[v] == 0).collect();
            let mut removed = 0;
            while let Some(x) = q.pop() {
                removed += 1;
                for &(u, v) in &forward { if u == x { indeg[v] -= 1; if indeg[v] == 0 { q.push(v); } } }
            }
            let reducible = removed == reach.iter().filter(|r| **r).count();
            match Cfg::from_graph("g", n, &edges) {
                Ok(cfg) => {
                    prop_assert!(reducible);
                    let headers: BTreeSet<String> = back.iter().map(|&(_, v)| format!("b{v}")).collect();
                    let found: BTreeSet<String> = cfg.loops.iter().map(|l| cfg.blocks[l.header].label.clone()).collect();
                    prop_assert_eq!(headers, found);
                    let found_back: BTreeSet<(String, String)> = cfg.loops.iter()
                        .flat_map(|l| l.back_edges.iter().map(|&(a, b)| (cfg.blocks[a].label.clone(), cfg.blocks[b].label.clone())))
                        .collect();
                    let expect_back: BTreeSet<(String, String)> = back.iter().map(|&(a, b)| (format!("b{a}"), format!("b{b}"))).collect();
                    prop_assert_eq!(found_back, expect_back);
                }
                Err(_) => prop_assert!(!reducible),
            }
        }
    }
}
