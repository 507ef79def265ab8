// SPDX-License-Identifier: Apache-2.0

//! The IR-to-ISA instruction mapping built from `!loc` tags, its tuning, and
//! IR-level energy analysis driven by it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::analysis::{analyze_cfgs, solve_program, Analysis, BaseCost, CallsOf};
use crate::annotations::Annotations;
use crate::cfg::{characterized_program, BasicBlock, BlockId, Cfg, EdgeKind};
use crate::energy_model::EnergyModel;
use crate::error::{Error, Result};
use crate::ipet::{BoundJson, BoundResult, CostVector, Sense};
use crate::ir::{ir_cfg, lower, prepare, BinOp, IrId, IrOp, IrProgram, LowerOptions, Lowered};
use crate::isa::{IsaProgram, Opcode};
use crate::num::{q, q_frac, Energy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningReason {
    PhiHoist,
    FnopAttribution,
    BranchSplit,
    FusedPair,
}

impl fmt::Display for TuningReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TuningReason::PhiHoist => "phi_hoist",
            TuningReason::FnopAttribution => "fnop_attribution",
            TuningReason::BranchSplit => "branch_split",
            TuningReason::FusedPair => "fused_pair",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Tuning {
    pub reason: TuningReason,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MapEntry {
    /// Program-wide indices of the ISA instructions in M(i).
    pub isa: Vec<usize>,
    /// Program-wide indices of the instructions that attributed FNOPs precede.
    pub fnops: Vec<usize>,
    pub energy: Energy,
    pub tuning: Vec<Tuning>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MappingOptions {
    /// Share a fused `macc` equally between the `mul` and the `add`.
    pub split_fused_cost: bool,
}

/// Where an ISA block belongs at IR level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Home {
    Block(String),
    /// Branch trampoline executed exactly on the IR edge.
    Edge(String, String),
}

/// Cost of an IR block or edge, pessimistic and optimistic in FNOPs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IrCost {
    pub energy: Energy,
    pub slots: u64,
    pub energy_min: Energy,
    pub slots_min: u64,
}

impl IrCost {
    fn add_block(&mut self, b: &BasicBlock) {
        self.energy += &b.energy_cost;
        self.slots += b.slot_cost;
        self.energy_min += &b.energy_cost_min;
        self.slots_min += b.slot_cost_min;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappingTable {
    pub n_threads: u32,
    pub entries: BTreeMap<IrId, MapEntry>,
    /// (function, ISA block label) to IR home.
    pub homes: BTreeMap<(String, String), Home>,
    /// Per-function IR block and edge costs.
    pub block_costs: BTreeMap<String, BTreeMap<String, IrCost>>,
    pub edge_costs: BTreeMap<String, BTreeMap<(String, String), IrCost>>,
    /// IR blocks whose ISA blocks do not form a straight chain.
    pub divergent: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub isa_instruction_count: usize,
    pub fnop_count: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MapJsonEntry {
    pub isa_indices: Vec<usize>,
    pub fnops: usize,
    pub energy_nj: f64,
    pub energy_exact_j: String,
    pub tuning: Vec<Tuning>,
}

impl MappingTable {
    pub fn total_energy(&self) -> Energy {
        self.entries.values().map(|e| &e.energy).sum()
    }

    /// Every ISA instruction and FNOP belongs to exactly one IR instruction.
    pub fn check_partition(&self) -> Result<()> {
        let mut seen = vec![false; self.isa_instruction_count];
        for (id, e) in &self.entries {
            for &k in &e.isa {
                if k >= seen.len() || std::mem::replace(&mut seen[k], true) {
                    return Err(Error::Mapping(format!("ISA instruction {k} mapped twice (again by IR {id})")));
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Mapping(format!("ISA instruction {k} is not mapped")));
        }
        let fnops: u64 = self.entries.values().map(|e| e.fnops.len() as u64).sum();
        if fnops != self.fnop_count {
            return Err(Error::Mapping(format!("{fnops} FNOPs attributed, {} placed", self.fnop_count)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> BTreeMap<IrId, MapJsonEntry> {
        self.entries
            .iter()
            .map(|(id, e)| {
                (
                    *id,
                    MapJsonEntry {
                        isa_indices: e.isa.clone(),
                        fnops: e.fnops.len(),
                        energy_nj: e.energy.nj_f64(),
                        energy_exact_j: crate::num::exact_string(e.energy.joules()),
                        tuning: e.tuning.clone(),
                    },
                )
            })
            .collect()
    }
}

/// Static energy of every instruction of the program body plus every placed FNOP.
pub fn isa_body_energy(isa: &IsaProgram, cfgs: &BTreeMap<String, Cfg>, model: &EnergyModel, n_threads: u32) -> Result<Energy> {
    let prices = model.prices(n_threads)?;
    let mut total = Energy::zero();
    for f in &isa.functions {
        for i in &f.instrs {
            total += prices.get(i.opcode)?;
        }
        if let Some(c) = cfgs.get(&f.name) {
            total += &(&model.instr_energy(Opcode::Fnop, n_threads)? * c.total_static_fnops());
        }
    }
    Ok(total)
}

fn add_tuning(e: &mut MapEntry, reason: TuningReason, detail: String) {
    e.tuning.push(Tuning { reason, detail });
}

/// Builds M from `!loc` tags and applies the tuning phase. `cfgs` must be the
/// characterized ISA graphs at `n_threads`.
pub fn build_mapping(
    ir: &IrProgram,
    isa: &IsaProgram,
    cfgs: &BTreeMap<String, Cfg>,
    model: &EnergyModel,
    n_threads: u32,
    opts: MappingOptions,
) -> Result<MappingTable> {
    let table = ir.id_table();
    let mut entries: BTreeMap<IrId, MapEntry> = table.keys().map(|&id| (id, MapEntry::default())).collect();
    let prices = model.prices(n_threads)?;
    let fnop_energy = prices.get(Opcode::Fnop)?.clone();
    let mut offsets = BTreeMap::new();
    let mut offset = 0;
    for f in &isa.functions {
        offsets.insert(f.name.as_str(), offset);
        for (k, ins) in f.instrs.iter().enumerate() {
            let id = ins
                .loc
                .ok_or_else(|| Error::Mapping(format!("untagged ISA instruction `{}` #{k}: {ins}", f.name)))?;
            let (func, _, _) = table
                .get(&id)
                .ok_or_else(|| Error::Mapping(format!("`{}` #{k} is tagged {id}, which is no IR instruction", f.name)))?;
            if *func != f.name {
                return Err(Error::Mapping(format!("`{}` #{k} is tagged {id} from function `{func}`", f.name)));
            }
            let e = entries.get_mut(&id).unwrap();
            e.isa.push(offset + k);
            e.energy += prices.get(ins.opcode)?;
        }
        offset += f.instrs.len();
    }
    let isa_instruction_count = offset;

    // FNOPs go to the nearest preceding instruction in their block, else the following one.
    let mut fnop_count = 0;
    for f in &isa.functions {
        let Some(cfg) = cfgs.get(&f.name) else { continue };
        let mut per_id: BTreeMap<IrId, usize> = BTreeMap::new();
        for b in &cfg.blocks {
            for &p in &b.fnop_positions {
                let owner = b.range.start + p.saturating_sub(1);
                let id = f.instrs[owner].loc.expect("checked above");
                let e = entries.get_mut(&id).unwrap();
                e.fnops.push(offsets[f.name.as_str()] + b.range.start + p);
                e.energy += &fnop_energy;
                *per_id.entry(id).or_default() += 1;
                fnop_count += 1;
            }
        }
        for (id, n) in per_id {
            add_tuning(entries.get_mut(&id).unwrap(), TuningReason::FnopAttribution, format!("{n} FNOP(s)"));
        }
    }

    // Fused mul/add pairs: the mul has no instructions of its own.
    let isa_ops: Vec<Opcode> = isa.functions.iter().flat_map(|f| f.instrs.iter().map(|i| i.opcode)).collect();
    let macc_energy = prices.get(Opcode::Macc)?.clone();
    for f in &ir.functions {
        let uses = f.use_counts();
        for i in f.instrs() {
            let (IrOp::Bin(BinOp::Mul, ..), Some(r)) = (&i.op, &i.result) else { continue };
            if !entries[&i.id].isa.is_empty() || uses.get(r.as_str()) != Some(&1) {
                continue;
            }
            let Some(user) = f.instrs().find(|u| u.op.operands().iter().any(|v| v.var() == Some(r.as_str()))) else {
                continue;
            };
            if !entries[&user.id].isa.iter().any(|&k| isa_ops[k] == Opcode::Macc) {
                continue;
            }
            let (mul, add) = (i.id, user.id);
            if opts.split_fused_cost {
                let half = macc_energy.scale(&q_frac(1, 2));
                entries.get_mut(&add).unwrap().energy = entries[&add].energy.clone() - half.clone();
                entries.get_mut(&mul).unwrap().energy += &half;
            }
            let how = if opts.split_fused_cost { "macc energy shared equally" } else { "macc charged to the add" };
            add_tuning(entries.get_mut(&mul).unwrap(), TuningReason::FusedPair, format!("fused into macc of IR {add}; {how}"));
            add_tuning(entries.get_mut(&add).unwrap(), TuningReason::FusedPair, format!("absorbs mul IR {mul}; {how}"));
        }
    }

    // Homes of ISA blocks.
    let mut homes = BTreeMap::new();
    let mut block_costs: BTreeMap<String, BTreeMap<String, IrCost>> = BTreeMap::new();
    let mut edge_costs: BTreeMap<String, BTreeMap<(String, String), IrCost>> = BTreeMap::new();
    let mut divergent = Vec::new();
    let mut warnings = Vec::new();
    for f in &isa.functions {
        let Some(cfg) = cfgs.get(&f.name) else { continue };
        let ir_f = ir
            .function(&f.name)
            .ok_or_else(|| Error::Mapping(format!("ISA function `{}` has no IR counterpart", f.name)))?;
        let mut members: BTreeMap<String, Vec<BlockId>> = BTreeMap::new();
        for b in &cfg.blocks {
            let tags: Vec<IrId> = f.instrs[b.range.clone()].iter().map(|i| i.loc.unwrap()).collect();
            let non_phi: BTreeSet<&str> = tags
                .iter()
                .filter(|id| !matches!(table[id].2.op, IrOp::Phi(_)))
                .map(|id| table[id].1)
                .collect();
            let any: BTreeSet<&str> = tags.iter().map(|id| table[id].1).collect();
            let set = if non_phi.is_empty() { any } else { non_phi };
            if set.len() != 1 {
                return Err(Error::Mapping(format!(
                    "ISA block `{}` of `{}` mixes IR blocks {:?}",
                    b.label, f.name, set
                )));
            }
            let ir_block = set.into_iter().next().unwrap().to_string();
            let last = &f.instrs[b.range.end - 1];
            let is_trampoline = b.range.len() == 1
                && last.opcode == Opcode::Bu
                && matches!(table[&last.loc.unwrap()].2.op, IrOp::Br(..))
                && b.preds.len() == 1
                && cfg.edge(b.preds[0], b.id).is_some_and(|e| e.kind == EdgeKind::CondFallthrough)
                && f.instrs[cfg.blocks[b.preds[0]].range.end - 1].loc == last.loc;
            let home = if is_trampoline {
                let to = last.target().unwrap().to_string();
                if !ir_f.block(&ir_block).is_some_and(|x| x.successors().contains(&to.as_str())) {
                    return Err(Error::Mapping(format!("trampoline `{}` in `{}` follows no IR edge", b.label, f.name)));
                }
                edge_costs
                    .entry(f.name.clone())
                    .or_default()
                    .entry((ir_block.clone(), to.clone()))
                    .or_default()
                    .add_block(b);
                Home::Edge(ir_block, to)
            } else {
                block_costs
                    .entry(f.name.clone())
                    .or_default()
                    .entry(ir_block.clone())
                    .or_default()
                    .add_block(b);
                members.entry(ir_block.clone()).or_default().push(b.id);
                Home::Block(ir_block)
            };
            homes.insert((f.name.clone(), b.label.clone()), home);
        }
        for (ir_block, mut bs) in members {
            bs.sort_by_key(|&b| cfg.blocks[b].range.start);
            let inside: BTreeSet<BlockId> = bs.iter().copied().collect();
            let chain = bs.windows(2).all(|w| cfg.blocks[w[0]].succs == [w[1]])
                && bs[1..].iter().all(|&b| cfg.blocks[b].preds.iter().all(|p| inside.contains(p)));
            if !chain {
                warnings.push(format!(
                    "IR block `{ir_block}` of `{}` maps to {} ISA blocks that do not form a straight chain \
                     (branch_split); its IR-level cost sums all of them",
                    f.name,
                    bs.len()
                ));
                divergent.push((f.name.clone(), ir_block.clone()));
                if let Some(br) = ir_f.block(&ir_block).and_then(|x| x.terminator()) {
                    let n_cond = entries[&br.id]
                        .isa
                        .iter()
                        .filter(|&&k| isa_ops[k].is_conditional_branch())
                        .count();
                    add_tuning(
                        entries.get_mut(&br.id).unwrap(),
                        TuningReason::BranchSplit,
                        format!("{n_cond} single-target ISA branches; block costs summed"),
                    );
                }
            }
        }
    }

    // Phi copies live in the predecessors.
    for f in &ir.functions {
        for b in &f.blocks {
            for phi in b.phis() {
                let e = entries.get_mut(&phi.id).unwrap();
                if e.isa.is_empty() {
                    continue;
                }
                let IrOp::Phi(inc) = &phi.op else { unreachable!() };
                let preds: Vec<&str> = inc.iter().map(|(_, l)| l.as_str()).collect();
                add_tuning(e, TuningReason::PhiHoist, format!("copies charged to predecessors {}", preds.join(", ")));
            }
        }
    }

    Ok(MappingTable {
        n_threads,
        entries,
        homes,
        block_costs,
        edge_costs,
        divergent,
        warnings,
        isa_instruction_count,
        fnop_count,
    })
}

/// IR-level graphs with per-block and per-edge costs taken from the mapping.
pub fn characterized_ir_cfgs(ir: &IrProgram, map: &MappingTable) -> Result<BTreeMap<String, Cfg>> {
    let mut out = BTreeMap::new();
    let none = BTreeMap::new();
    for f in &ir.functions {
        let mut cfg = ir_cfg(f)?;
        let costs = map.block_costs.get(&f.name).unwrap_or(&none);
        for b in &mut cfg.blocks {
            let c = costs.get(&b.label).cloned().unwrap_or_default();
            b.energy_cost = c.energy;
            b.slot_cost = c.slots;
            b.energy_cost_min = c.energy_min;
            b.slot_cost_min = c.slots_min;
        }
        if let Some(edges) = map.edge_costs.get(&f.name) {
            for ((from, to), c) in edges {
                let (a, b) = (cfg.block_by_label(from), cfg.block_by_label(to));
                if let (Some(a), Some(b)) = (a, b) {
                    cfg.edge_costs.insert((a, b), c.energy.clone());
                    cfg.edge_costs_min.insert((a, b), c.energy_min.clone());
                }
            }
        }
        cfg.characterized_threads = Some(map.n_threads);
        out.insert(f.name.clone(), cfg);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrAnalysis {
    pub upper: BoundResult,
    pub lower: BoundResult,
    /// The same program analysed at ISA level, for comparison.
    pub isa: Analysis,
    pub mapping: MappingTable,
    pub lowered: Lowered,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IrAnalysisJson {
    pub level: &'static str,
    pub n_threads: u32,
    pub upper: BoundJson,
    pub lower: BoundJson,
    pub isa_upper_nj: f64,
    pub isa_lower_nj: f64,
    pub upper_gap_pct: f64,
    pub divergent_blocks: Vec<String>,
    pub warnings: Vec<String>,
}

impl IrAnalysis {
    /// |IR upper − ISA upper| / ISA upper, in percent.
    pub fn upper_gap_pct(&self) -> f64 {
        let isa = self.isa.upper.bound.joules();
        if isa == &q(0) {
            return 0.0;
        }
        let d = (self.upper.bound.joules() - isa) / isa * q(100);
        crate::num::to_f64(&d).abs()
    }

    pub fn to_json(&self) -> IrAnalysisJson {
        IrAnalysisJson {
            level: "ir",
            n_threads: self.mapping.n_threads,
            upper: self.upper.to_json(),
            lower: self.lower.to_json(),
            isa_upper_nj: self.isa.upper.bound.nj_f64(),
            isa_lower_nj: self.isa.lower.bound.nj_f64(),
            upper_gap_pct: crate::num::to_f64_sig(&crate::num::from_f64(self.upper_gap_pct()).unwrap_or_default(), 4),
            divergent_blocks: self.mapping.divergent.iter().map(|(f, b)| format!("{f}:{b}")).collect(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IrAnalysisOptions {
    pub lower: LowerOptions,
    pub mapping: MappingOptions,
}

/// Prepares, lowers and maps `ir`, then bounds `main` on the IR control flow
/// graph. Idle time is not representable at IR level and is taken as zero.
pub fn ir_level_ecsa(
    ir: &IrProgram,
    ann: &Annotations,
    model: &EnergyModel,
    n_threads: u32,
    opts: IrAnalysisOptions,
) -> Result<IrAnalysis> {
    let ir = prepare(ir)?;
    let lowered = lower(&ir, opts.lower)?;
    let isa_cfgs = characterized_program(&lowered.isa, model, n_threads)?;
    let mapping = build_mapping(&ir, &lowered.isa, &isa_cfgs, model, n_threads, opts.mapping)?;
    let ir_cfgs = characterized_ir_cfgs(&ir, &mapping)?;
    let calls_by_fn: BTreeMap<&str, Vec<Vec<String>>> = ir
        .functions
        .iter()
        .map(|f| {
            let per_block = f
                .blocks
                .iter()
                .map(|b| {
                    b.instrs
                        .iter()
                        .filter_map(|i| match &i.op {
                            IrOp::Call(g, _) => Some(g.clone()),
                            _ => None,
                        })
                        .collect()
                })
                .collect();
            (f.name.as_str(), per_block)
        })
        .collect();
    let calls: &CallsOf = &|cfg: &Cfg, b: BlockId| {
        let f = ir.function(&cfg.function).expect("IR function");
        let idx = f.block_index(&cfg.blocks[b].label).expect("IR block");
        calls_by_fn[cfg.function.as_str()][idx].clone()
    };
    let energy: &BaseCost = &|c: &Cfg| CostVector::energy(c);
    let energy_min: &BaseCost = &|c: &Cfg| CostVector::energy_min(c);
    let roots = vec!["main".to_string()];
    let upper = solve_program(&ir_cfgs, calls, ann, Sense::Maximize, energy, &roots)?;
    let lower_b = solve_program(&ir_cfgs, calls, ann, Sense::Minimize, energy_min, &roots)?;
    let isa = analyze_cfgs(&isa_cfgs, ann, "main", n_threads)?;
    let mut warnings = lowered.warnings.clone();
    warnings.extend(mapping.warnings.iter().cloned());
    Ok(IrAnalysis {
        upper: upper["main"].to_bound_result(Sense::Maximize),
        lower: lower_b["main"].to_bound_result(Sense::Minimize),
        isa,
        mapping,
        lowered,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::parse_annotations;
    use crate::ir::parse_ir;

    fn mapped(text: &str, opts: MappingOptions) -> (IrProgram, Lowered, BTreeMap<String, Cfg>, MappingTable) {
        let ir = prepare(&parse_ir(text, "t.mir").unwrap()).unwrap();
        let l = lower(&ir, LowerOptions::default()).unwrap();
        let m = EnergyModel::fixture();
        let cfgs = characterized_program(&l.isa, &m, 1).unwrap();
        let map = build_mapping(&ir, &l.isa, &cfgs, &m, 1, opts).unwrap();
        (ir, l, cfgs, map)
    }

    const MACC: &str =
        "mem 4\nfunc main():\na:\n  %x = load 0\n  %y = load 1\n  %z = load 2\n  %m = mul %x, %y\n  %s = add %m, %z\n  store 3, %s\n  ret\n";

    #[test]
    fn straight_line_conserves_energy() {
        let (_, l, cfgs, map) = mapped(MACC, MappingOptions::default());
        map.check_partition().unwrap();
        let m = EnergyModel::fixture();
        assert_eq!(map.total_energy(), isa_body_energy(&l.isa, &cfgs, &m, 1).unwrap());
    }

    #[test]
    fn fused_mul_maps_to_nothing_unless_split() {
        let (_, _, _, map) = mapped(MACC, MappingOptions::default());
        assert!(map.entries[&4].isa.is_empty());
        assert!(map.entries[&4].energy.is_zero());
        assert_eq!(map.entries[&4].tuning[0].reason, TuningReason::FusedPair);
        let (_, _, _, split) = mapped(MACC, MappingOptions { split_fused_cost: true });
        let half = EnergyModel::fixture().instr_energy(Opcode::Macc, 1).unwrap().scale(&q_frac(1, 2));
        assert_eq!(split.entries[&4].energy, half);
        assert_eq!(split.total_energy(), map.total_energy());
    }

    #[test]
    fn loop_fnops_land_in_the_body_block() {
        let text = "mem 2\nfunc main():\ne:\n  jump h\nh:\n  %i = phi [0, e], [%j, b]\n  %c = icmp lt %i, 3\n  br %c, b, x\n\
                    b:\n  %j = add %i, 1\n  jump h\nx:\n  store 0, %i\n  ret\n";
        let (_, _, cfgs, map) = mapped(text, MappingOptions::default());
        map.check_partition().unwrap();
        let isa_total: u64 = cfgs["main"].total_static_fnops();
        assert_eq!(map.fnop_count, isa_total);
        // Every ISA block has a single home here, so costs agree block by block.
        for b in &cfgs["main"].blocks {
            if let Some(Home::Block(h)) = map.homes.get(&("main".to_string(), b.label.clone())) {
                if h == &b.label {
                    assert_eq!(map.block_costs["main"][h].energy, b.energy_cost);
                }
            }
        }
        let ann = parse_annotations("loopbound func=main header=h max=3 min=3\n", "a").unwrap();
        let r = ir_level_ecsa(&parse_ir(text, "t").unwrap(), &ann, &EnergyModel::fixture(), 1, Default::default()).unwrap();
        assert_eq!(r.upper.bound, r.isa.upper.bound);
        assert_eq!(r.lower.bound, r.isa.lower.bound);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn eq_branch_chain_is_flagged_divergent() {
        let text = "mem 2\nfunc main():\na:\n  %x = load 0\n  %c = icmp eq %x, 3\n  br %c, y, n\ny:\n  store 1, 1\n  ret\nn:\n  ret\n";
        let r = ir_level_ecsa(&parse_ir(text, "t").unwrap(), &Annotations::new(), &EnergyModel::fixture(), 1, Default::default())
            .unwrap();
        assert_eq!(r.mapping.divergent, vec![("main".to_string(), "a".to_string())]);
        assert!(r.warnings.iter().any(|w| w.contains("branch_split")));
        assert!(r.upper.bound >= r.isa.upper.bound);
    }

    #[test]
    fn untagged_instruction_is_an_integrity_error() {
        let (ir, mut l, _, _) = mapped(MACC, MappingOptions::default());
        l.isa.functions[0].instrs[0].loc = None;
        let m = EnergyModel::fixture();
        let cfgs = characterized_program(&l.isa, &m, 1).unwrap();
        assert!(matches!(build_mapping(&ir, &l.isa, &cfgs, &m, 1, Default::default()), Err(Error::Mapping(_))));
    }
}
