// SPDX-License-Identifier: Apache-2.0

//! Implicit path enumeration: block and edge execution counts as an ILP.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::annotations::Annotations;
use crate::cfg::{BlockId, Cfg};
use crate::error::{Error, Result};
use crate::ilp::{Cmp, IlpSolution, IlpSystem};
pub use crate::ilp::Sense;
use crate::num::{exact_string, q, Energy, Q};

impl Sense {
    pub fn bound_name(self) -> &'static str {
        match self {
            Sense::Maximize => "upper",
            Sense::Minimize => "lower",
        }
    }
}

/// Cost charged per execution of each block and per traversal of each edge.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVector {
    pub block: Vec<Q>,
    pub edge: BTreeMap<(BlockId, BlockId), Q>,
}

impl CostVector {
    /// Joules per block, from a characterized graph.
    pub fn energy(cfg: &Cfg) -> CostVector {
        CostVector {
            block: cfg.blocks.iter().map(|b| b.energy_cost.joules().clone()).collect(),
            edge: cfg.edge_costs.iter().map(|(k, e)| (*k, e.joules().clone())).collect(),
        }
    }

    /// Issue slots per block.
    pub fn slots(cfg: &Cfg) -> CostVector {
        CostVector {
            block: cfg.blocks.iter().map(|b| q(b.slot_cost as i64)).collect(),
            edge: BTreeMap::new(),
        }
    }

    /// Joules per block with the fewest FNOPs any execution can issue.
    pub fn energy_min(cfg: &Cfg) -> CostVector {
        CostVector {
            block: cfg.blocks.iter().map(|b| b.energy_cost_min.joules().clone()).collect(),
            edge: cfg.edge_costs_min.iter().map(|(k, e)| (*k, e.joules().clone())).collect(),
        }
    }

    pub fn slots_min(cfg: &Cfg) -> CostVector {
        CostVector {
            block: cfg.blocks.iter().map(|b| q(b.slot_cost_min as i64)).collect(),
            edge: BTreeMap::new(),
        }
    }

    pub fn uniform(cfg: &Cfg, per_block: Q) -> CostVector {
        CostVector {
            block: vec![per_block; cfg.blocks.len()],
            edge: BTreeMap::new(),
        }
    }
}

/// An IPET system together with the meaning of its variables.
#[derive(Clone, Debug)]
pub struct IpetSystem {
    pub ilp: IlpSystem,
    pub block_vars: Vec<usize>,
    /// Indexed like `cfg.edges`.
    pub edge_vars: Vec<usize>,
}

/// Builds the IPET system of one function.
///
/// Flow into every block equals its execution count (plus one for the entry);
/// flow out equals the count except in blocks that may leave the function.
/// Loop bounds are relative to the number of loop entries.
pub fn build_ilp(cfg: &Cfg, ann: &Annotations, sense: Sense, costs: &CostVector) -> Result<IpetSystem> {
    let f = cfg.function.as_str();
    let mut ilp = IlpSystem::new(sense);
    let block_vars: Vec<usize> = cfg.blocks.iter().map(|b| ilp.add_var(format!("x[{}]", b.label))).collect();
    let edge_vars: Vec<usize> = cfg
        .edges
        .iter()
        .map(|e| ilp.add_var(format!("y[{}->{}]", cfg.blocks[e.from].label, cfg.blocks[e.to].label)))
        .collect();
    for (b, cost) in costs.block.iter().enumerate() {
        ilp.set_objective(block_vars[b], cost.clone());
    }
    for (i, e) in cfg.edges.iter().enumerate() {
        if let Some(c) = costs.edge.get(&(e.from, e.to)) {
            ilp.set_objective(edge_vars[i], c.clone());
        }
    }
    let one = q(1);
    for b in &cfg.blocks {
        let mut terms = vec![(block_vars[b.id], one.clone())];
        for (i, _) in cfg.edges.iter().enumerate().filter(|(_, e)| e.to == b.id) {
            terms.push((edge_vars[i], -one.clone()));
        }
        let rhs = if b.id == cfg.entry { one.clone() } else { Q::zero() };
        ilp.add_constraint(format!("flow-in {}", b.label), terms, Cmp::Eq, rhs);

        let outs: Vec<usize> = cfg
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.from == b.id)
            .map(|(i, _)| edge_vars[i])
            .collect();
        if b.can_exit && outs.is_empty() {
            continue;
        }
        let mut terms = vec![(block_vars[b.id], one.clone())];
        terms.extend(outs.into_iter().map(|v| (v, -one.clone())));
        let cmp = if b.can_exit { Cmp::Ge } else { Cmp::Eq };
        ilp.add_constraint(format!("flow-out {}", b.label), terms, cmp, Q::zero());
    }

    let edge_index = |from: BlockId, to: BlockId| cfg.edges.iter().position(|e| e.from == from && e.to == to);
    for l in &cfg.loops {
        let header = &cfg.blocks[l.header].label;
        let (max, min) = ann.loop_bound(f, header).ok_or_else(|| {
            Error::Annotation(format!("missing loop bound for loop header `{header}` in function `{f}`"))
        })?;
        let enters_at_entry = l.header == cfg.entry;
        let bound_terms = |k: u64| {
            let mut terms: Vec<(usize, Q)> = l
                .back_edges
                .iter()
                .map(|&(a, b)| (edge_vars[edge_index(a, b).unwrap()], one.clone()))
                .collect();
            terms.extend(
                l.entry_edges
                    .iter()
                    .map(|&(a, b)| (edge_vars[edge_index(a, b).unwrap()], -q(k as i64))),
            );
            let rhs = if enters_at_entry { q(k as i64) } else { Q::zero() };
            (terms, rhs)
        };
        let (terms, rhs) = bound_terms(max);
        ilp.add_constraint(format!("loopbound {header} max={max}"), terms, Cmp::Le, rhs);
        if let Some(min) = min {
            let (terms, rhs) = bound_terms(min);
            ilp.add_constraint(format!("loopbound {header} min={min}"), terms, Cmp::Ge, rhs);
        }
    }
    for a in ann.for_function(f) {
        if let crate::annotations::Annotation::LoopBound { header, .. } = a {
            let known = cfg.block_by_label(header).is_some_and(|h| cfg.blocks[h].loop_header);
            if !known {
                return Err(Error::Annotation(format!("`{f}` has no loop with header `{header}`")));
            }
        }
    }
    for (from, to) in ann.infeasible_edges(f) {
        let idx = match (cfg.block_by_label(from), cfg.block_by_label(to)) {
            (Some(a), Some(b)) => edge_index(a, b),
            _ => None,
        }
        .ok_or_else(|| Error::Annotation(format!("`{f}` has no edge {from}->{to}")))?;
        ilp.add_constraint(format!("infeasible {from}->{to}"), vec![(edge_vars[idx], one.clone())], Cmp::Eq, Q::zero());
    }
    let callees: BTreeSet<&str> = cfg.blocks.iter().filter_map(|b| b.call.as_deref()).collect();
    for callee in callees {
        if callee == f {
            continue;
        }
        if let Some(max) = ann.call_bound(f, callee) {
            let terms = cfg
                .blocks
                .iter()
                .filter(|b| b.call.as_deref() == Some(callee))
                .map(|b| (block_vars[b.id], one.clone()))
                .collect();
            ilp.add_constraint(format!("callbound {callee} max={max}"), terms, Cmp::Le, q(max as i64));
        }
    }
    Ok(IpetSystem {
        ilp,
        block_vars,
        edge_vars,
    })
}

impl IpetSystem {
    /// Forbids execution of the given blocks.
    pub fn force_zero(&mut self, cfg: &Cfg, blocks: &[BlockId]) {
        for &b in blocks {
            self.ilp
                .add_constraint(format!("cut {}", cfg.blocks[b].label), vec![(self.block_vars[b], q(1))], Cmp::Eq, Q::zero());
        }
    }
}

/// Optimal block and edge counts.
#[derive(Clone, Debug, PartialEq)]
pub struct IpetSolution {
    pub value: Q,
    pub block_counts: Vec<u64>,
    pub edge_counts: Vec<u64>,
}

pub fn solve(sys: &IpetSystem) -> Result<IpetSolution> {
    let sol: IlpSolution = sys.ilp.solve()?;
    let get = |v: usize| sol.values[v].to_u64().expect("counts are small non-negative integers");
    Ok(IpetSolution {
        value: sol.objective.clone(),
        block_counts: sys.block_vars.iter().map(|&v| get(v)).collect(),
        edge_counts: sys.edge_vars.iter().map(|&v| get(v)).collect(),
    })
}

/// Builds and solves in one step.
pub fn solve_costs(cfg: &Cfg, ann: &Annotations, sense: Sense, costs: &CostVector) -> Result<IpetSolution> {
    solve(&build_ilp(cfg, ann, sense, costs)?)
}

/// An energy bound with the execution counts that attain it.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundResult {
    pub function: String,
    pub sense: Sense,
    pub bound: Energy,
    pub counts: BTreeMap<String, u64>,
    pub status: String,
}

impl BoundResult {
    pub fn from_solution(cfg: &Cfg, sense: Sense, sol: &IpetSolution) -> BoundResult {
        BoundResult {
            function: cfg.function.clone(),
            sense,
            bound: Energy(sol.value.clone()),
            counts: cfg
                .blocks
                .iter()
                .map(|b| (b.label.clone(), sol.block_counts[b.id]))
                .collect(),
            status: "optimal".to_string(),
        }
    }

    pub fn to_json(&self) -> BoundJson {
        BoundJson {
            function: self.function.clone(),
            sense: self.sense.bound_name().to_string(),
            bound_nj: self.bound.nj_f64(),
            bound_exact_j: exact_string(self.bound.joules()),
            counts: self.counts.clone(),
            status: self.status.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BoundJson {
    pub function: String,
    pub sense: String,
    pub bound_nj: f64,
    pub bound_exact_j: String,
    pub counts: BTreeMap<String, u64>,
    pub status: String,
}

/// Energy bound of a single function without calls (or whose call blocks
/// already include callee costs).
pub fn bound(cfg: &Cfg, ann: &Annotations, sense: Sense) -> Result<BoundResult> {
    let costs = match sense {
        Sense::Maximize => CostVector::energy(cfg),
        Sense::Minimize => CostVector::energy_min(cfg),
    };
    let sol = solve_costs(cfg, ann, sense, &costs)?;
    Ok(BoundResult::from_solution(cfg, sense, &sol))
}

pub fn lower_bound(cfg: &Cfg, ann: &Annotations) -> Result<BoundResult> {
    bound(cfg, ann, Sense::Minimize)
}

/// Result of exhaustive path enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub max: Q,
    pub min: Q,
    pub paths: Vec<Vec<BlockId>>,
}

struct Walker<'a> {
    cfg: &'a Cfg,
    costs: &'a CostVector,
    bounds: Vec<(u64, u64)>,
    infeasible: BTreeSet<(BlockId, BlockId)>,
    call_limits: Vec<(BTreeSet<BlockId>, u64)>,
    max_paths: usize,
    paths: Vec<Vec<BlockId>>,
    values: Vec<Q>,
}

impl Walker<'_> {
    /// Loops left when moving along `from -> to` (innermost first).
    fn exited(&self, from: BlockId, to: BlockId) -> Vec<usize> {
        self.cfg
            .loops
            .iter()
            .filter(|l| l.members.contains(&from) && !l.members.contains(&to))
            .map(|l| l.id)
            .collect()
    }

    fn walk(&mut self, b: BlockId, path: &mut Vec<BlockId>, iters: &mut Vec<u64>, calls: &mut Vec<u64>, value: Q) -> bool {
        let value = value + &self.costs.block[b];
        path.push(b);
        for (k, (sites, _)) in self.call_limits.iter().enumerate() {
            if sites.contains(&b) {
                calls[k] += 1;
            }
        }
        let calls_ok = self.call_limits.iter().zip(calls.iter()).all(|((_, max), c)| c <= max);
        let mut ok = true;
        if calls_ok {
            let block = &self.cfg.blocks[b];
            if block.can_exit && iters.iter().zip(&self.bounds).enumerate().all(|(l, (i, (_, min)))| !self.active(l, b) || i >= min) {
                if self.paths.len() >= self.max_paths {
                    ok = false;
                } else {
                    self.paths.push(path.clone());
                    self.values.push(value.clone());
                }
            }
            let succs: Vec<BlockId> = block.succs.clone();
            for s in succs {
                if !ok {
                    break;
                }
                if self.infeasible.contains(&(b, s)) {
                    continue;
                }
                let mut it = iters.clone();
                let mut allowed = true;
                for l in self.exited(b, s) {
                    if it[l] < self.bounds[l].1 {
                        allowed = false;
                    }
                    it[l] = 0;
                }
                for l in &self.cfg.loops {
                    if l.back_edges.contains(&(b, s)) {
                        it[l.id] += 1;
                        if it[l.id] > self.bounds[l.id].0 {
                            allowed = false;
                        }
                    } else if l.entry_edges.contains(&(b, s)) {
                        it[l.id] = 0;
                    }
                }
                if !allowed {
                    continue;
                }
                let edge_cost = self.costs.edge.get(&(b, s)).cloned().unwrap_or_else(Q::zero);
                ok = self.walk(s, path, &mut it, &mut calls.clone(), value.clone() + edge_cost);
            }
        }
        path.pop();
        ok
    }

    fn active(&self, l: usize, b: BlockId) -> bool {
        self.cfg.loops[l].members.contains(&b)
    }
}

/// Enumerates every feasible entry-to-exit path, unrolling each loop entry to
/// at most its bound. Returns `None` when more than `max_paths` paths exist.
pub fn enumerate_paths_oracle(cfg: &Cfg, ann: &Annotations, costs: &CostVector, max_paths: usize) -> Result<Option<OracleResult>> {
    let f = cfg.function.as_str();
    let bounds = cfg
        .loops
        .iter()
        .map(|l| {
            let header = &cfg.blocks[l.header].label;
            ann.loop_bound(f, header)
                .map(|(max, min)| (max, min.unwrap_or(0)))
                .ok_or_else(|| Error::Annotation(format!("missing loop bound for loop header `{header}` in function `{f}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut infeasible = BTreeSet::new();
    for (from, to) in ann.infeasible_edges(f) {
        match (cfg.block_by_label(from), cfg.block_by_label(to)) {
            (Some(a), Some(b)) if cfg.edge(a, b).is_some() => {
                infeasible.insert((a, b));
            }
            _ => return Err(Error::Annotation(format!("`{f}` has no edge {from}->{to}"))),
        }
    }
    let callees: BTreeSet<&str> = cfg.blocks.iter().filter_map(|b| b.call.as_deref()).filter(|c| *c != f).collect();
    let call_limits = callees
        .into_iter()
        .filter_map(|c| {
            ann.call_bound(f, c).map(|max| {
                let sites = cfg.blocks.iter().filter(|b| b.call.as_deref() == Some(c)).map(|b| b.id).collect();
                (sites, max)
            })
        })
        .collect::<Vec<_>>();
    let mut w = Walker {
        cfg,
        costs,
        bounds,
        infeasible,
        call_limits,
        max_paths,
        paths: Vec::new(),
        values: Vec::new(),
    };
    let n_loops = cfg.loops.len();
    let mut iters = vec![0u64; n_loops];
    let mut calls = vec![0u64; w.call_limits.len()];
    let mut path = Vec::new();
    if !w.walk(cfg.entry, &mut path, &mut iters, &mut calls, Q::zero()) {
        return Ok(None);
    }
    if w.values.is_empty() {
        return Err(Error::Infeasible(vec![format!("`{f}`: no feasible path")]));
    }
    let max = w.values.iter().max().unwrap().clone();
    let min = w.values.iter().min().unwrap().clone();
    Ok(Some(OracleResult { max, min, paths: w.paths }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::parse_annotations;
    use crate::cfg::{BlockSpec, Edge, EdgeKind};
    use proptest::prelude::*;

    fn nj(n: i64) -> Q {
        Energy::from_nanojoules(q(n)).0
    }

    fn ann(text: &str) -> Annotations {
        parse_annotations(text, "t.ann").unwrap()
    }

    fn costs(cfg: &Cfg, nj_per_block: &[i64]) -> CostVector {
        let mut c = CostVector::uniform(cfg, Q::zero());
        for (i, v) in nj_per_block.iter().enumerate() {
            c.block[i] = nj(*v);
        }
        c
    }

    /// entry -> header; header -> body | exit; body -> header
    fn canonical_loop() -> Cfg {
        Cfg::from_graph("f", 4, &[(0, 1), (1, 2), (1, 3), (2, 1)]).unwrap()
    }

    fn diamond() -> Cfg {
        Cfg::from_graph("f", 4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn one_block_function_has_a_single_constraint() {
        let cfg = Cfg::from_graph("f", 1, &[]).unwrap();
        let sys = build_ilp(&cfg, &Annotations::new(), Sense::Maximize, &costs(&cfg, &[7])).unwrap();
        assert_eq!(sys.ilp.constraints.len(), 1);
        assert_eq!(sys.ilp.describe(&sys.ilp.constraints[0]), "flow-in b0: x[b0] = 1");
        assert_eq!(sys.ilp.objective, vec![nj(7)]);
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.value, nj(7));
    }

    #[test]
    fn diamond_selects_expensive_branch() {
        let cfg = diamond();
        let c = costs(&cfg, &[1, 5, 3, 1]);
        let up = solve_costs(&cfg, &Annotations::new(), Sense::Maximize, &c).unwrap();
        assert_eq!(up.block_counts, vec![1, 1, 0, 1]);
        assert_eq!(up.value, nj(7));
        let lo = solve_costs(&cfg, &Annotations::new(), Sense::Minimize, &c).unwrap();
        assert_eq!(lo.block_counts, vec![1, 0, 1, 1]);
        assert_eq!(lo.value, nj(5));
    }

    #[test]
    fn canonical_loop_bound() {
        let cfg = canonical_loop();
        let (h, c, e) = (3, 5, 2);
        let costv = costs(&cfg, &[0, h, c, e]);
        let a = ann("loopbound func=f header=b1 max=10");
        let sol = solve_costs(&cfg, &a, Sense::Maximize, &costv).unwrap();
        assert_eq!(sol.block_counts, vec![1, 11, 10, 1]);
        assert_eq!(sol.value, nj(10 * c + 11 * h + e));
        let oracle = enumerate_paths_oracle(&cfg, &a, &costv, 10_000).unwrap().unwrap();
        assert_eq!(oracle.max, sol.value);
        assert_eq!(oracle.paths.len(), 11);
    }

    #[test]
    fn zero_bound_skips_loop_body() {
        let cfg = canonical_loop();
        let costv = costs(&cfg, &[1, 3, 5, 2]);
        let sol = solve_costs(&cfg, &ann("loopbound func=f header=b1 max=0"), Sense::Maximize, &costv).unwrap();
        assert_eq!(sol.block_counts, vec![1, 1, 0, 1]);
        assert_eq!(sol.value, nj(6));
    }

    #[test]
    fn bound_two_gives_three_paths() {
        let cfg = canonical_loop();
        let costv = costs(&cfg, &[1, 3, 5, 2]);
        let o = enumerate_paths_oracle(&cfg, &ann("loopbound func=f header=b1 max=2"), &costv, 100).unwrap().unwrap();
        assert_eq!(o.paths.len(), 3);
        assert_eq!(o.min, nj(6));
        assert_eq!(o.max, nj(6 + 16));
    }

    #[test]
    fn exact_loop_bound_makes_lower_equal_upper() {
        let cfg = canonical_loop();
        let costv = costs(&cfg, &[1, 3, 5, 2]);
        let a = ann("loopbound func=f header=b1 max=10 min=10");
        let up = solve_costs(&cfg, &a, Sense::Maximize, &costv).unwrap();
        let lo = solve_costs(&cfg, &a, Sense::Minimize, &costv).unwrap();
        assert_eq!(up.value, lo.value);
        let o = enumerate_paths_oracle(&cfg, &a, &costv, 100).unwrap().unwrap();
        assert_eq!((o.min.clone(), o.max.clone()), (lo.value, up.value));
    }

    #[test]
    fn infeasible_edge_removes_branch() {
        let cfg = diamond();
        let costv = costs(&cfg, &[1, 5, 3, 1]);
        let a = ann("infeasible func=f edge=b0->b1");
        let up = solve_costs(&cfg, &a, Sense::Maximize, &costv).unwrap();
        assert_eq!(up.value, nj(5));
        let o = enumerate_paths_oracle(&cfg, &a, &costv, 100).unwrap().unwrap();
        assert_eq!(o.max, nj(5));
    }

    #[test]
    fn missing_loop_bound_names_header() {
        let cfg = canonical_loop();
        let e = build_ilp(&cfg, &Annotations::new(), Sense::Maximize, &costs(&cfg, &[1, 1, 1, 1])).unwrap_err();
        assert!(e.is_annotation_error());
        assert!(e.to_string().contains("`b1`"), "{e}");
    }

    #[test]
    fn unknown_annotation_targets_are_rejected() {
        let cfg = diamond();
        let c = costs(&cfg, &[1, 1, 1, 1]);
        assert!(build_ilp(&cfg, &ann("infeasible func=f edge=b0->b3"), Sense::Maximize, &c).is_err());
        assert!(build_ilp(&cfg, &ann("loopbound func=f header=b1 max=3"), Sense::Maximize, &c).is_err());
    }

    #[test]
    fn contradictory_annotations_report_conflict() {
        let cfg = diamond();
        let c = costs(&cfg, &[1, 1, 1, 1]);
        let a = ann("infeasible func=f edge=b0->b1\ninfeasible func=f edge=b0->b2");
        match solve_costs(&cfg, &a, Sense::Maximize, &c) {
            Err(Error::Infeasible(iis)) => {
                assert!(iis.iter().any(|s| s.starts_with("infeasible b0->b1")));
                assert!(iis.iter().any(|s| s.starts_with("infeasible b0->b2")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn path_budget_signals_unavailable() {
        let cfg = canonical_loop();
        let c = costs(&cfg, &[1, 1, 1, 1]);
        assert!(enumerate_paths_oracle(&cfg, &ann("loopbound func=f header=b1 max=50"), &c, 10).unwrap().is_none());
    }

    #[test]
    fn self_loop_header_at_entry() {
        // b0 loops on itself and falls through to b1.
        let cfg = Cfg::from_graph("f", 2, &[(0, 0), (0, 1)]).unwrap();
        let c = costs(&cfg, &[2, 1]);
        let a = ann("loopbound func=f header=b0 max=4");
        let sol = solve_costs(&cfg, &a, Sense::Maximize, &c).unwrap();
        assert_eq!(sol.block_counts, vec![5, 1]);
        let o = enumerate_paths_oracle(&cfg, &a, &c, 100).unwrap().unwrap();
        assert_eq!(o.max, sol.value);
    }

    #[test]
    fn counts_satisfy_flow_conservation() {
        let specs = (0..6)
            .map(|i| BlockSpec {
                label: format!("b{i}"),
                can_exit: i == 5,
                ..Default::default()
            })
            .collect();
        let e = |from, to| Edge {
            from,
            to,
            kind: EdgeKind::Taken,
        };
        // Nested loops: outer header b1, inner header b2.
        let edges = vec![e(0, 1), e(1, 2), e(2, 3), e(3, 2), e(2, 4), e(4, 1), e(1, 5)];
        let cfg = Cfg::from_parts("f", specs, edges, 0).unwrap();
        let a = ann("loopbound func=f header=b1 max=3\nloopbound func=f header=b2 max=4");
        let c = costs(&cfg, &[1, 1, 1, 1, 1, 1]);
        let sol = solve_costs(&cfg, &a, Sense::Maximize, &c).unwrap();
        assert_eq!(sol.block_counts, vec![1, 4, 15, 12, 3, 1]);
        for b in &cfg.blocks {
            let inflow: u64 = cfg.edges.iter().zip(&sol.edge_counts).filter(|(e, _)| e.to == b.id).map(|(_, c)| c).sum();
            assert_eq!(sol.block_counts[b.id], inflow + u64::from(b.id == 0));
        }
        let o = enumerate_paths_oracle(&cfg, &a, &c, 10_000).unwrap().unwrap();
        assert_eq!(o.max, sol.value);
    }

    /// Random structured graphs: sequences of diamonds and counted loops.
    fn structured(shape: &[(u8, i64, i64)]) -> (Cfg, Annotations, CostVector) {
        let mut edges = Vec::new();
        let mut cost = vec![1i64];
        let mut text = String::new();
        let mut cur = 0;
        for (kind, a, b) in shape {
            let base = cost.len();
            match kind % 3 {
                0 => {
                    edges.extend([(cur, base), (cur, base + 1), (base, base + 2), (base + 1, base + 2)]);
                    cost.extend([*a, *b, 1]);
                    cur = base + 2;
                }
                1 => {
                    edges.extend([(cur, base), (base, base + 1), (base + 1, base), (base, base + 2)]);
                    cost.extend([1, *a, 1]);
                    text.push_str(&format!("loopbound func=f header=b{base} max={}\n", b.rem_euclid(4)));
                    cur = base + 2;
                }
                _ => {
                    // Loop whose body is a diamond.
                    edges.extend([
                        (cur, base),
                        (base, base + 1),
                        (base, base + 2),
                        (base + 1, base + 3),
                        (base + 2, base + 3),
                        (base + 3, base),
                        (base, base + 4),
                    ]);
                    cost.extend([1, *a, *b, 1, 1]);
                    text.push_str(&format!("loopbound func=f header=b{base} max=2 min=1\n"));
                    cur = base + 4;
                }
            }
        }
        let cfg = Cfg::from_graph("f", cost.len(), &edges).unwrap();
        let c = costs(&cfg, &cost);
        (cfg, ann(&text), c)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn ipet_matches_enumeration(shape in proptest::collection::vec((0u8..3, 0i64..9, 0i64..9), 1..4)) {
            let (cfg, a, c) = structured(&shape);
            let up = solve_costs(&cfg, &a, Sense::Maximize, &c).unwrap();
            let lo = solve_costs(&cfg, &a, Sense::Minimize, &c).unwrap();
            prop_assert!(lo.value <= up.value);
            if let Some(o) = enumerate_paths_oracle(&cfg, &a, &c, 10_000).unwrap() {
                prop_assert_eq!(up.value, o.max);
                prop_assert_eq!(lo.value, o.min);
            }
        }
    }
}
