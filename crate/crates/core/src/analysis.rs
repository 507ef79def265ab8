// SPDX-License-Identifier: Apache-2.0

//! Whole-program bounds: per-function IPET composed bottom-up over the call graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::annotations::Annotations;
use crate::cfg::{characterized_program, BlockId, Cfg};
use crate::energy_model::EnergyModel;
use crate::error::{Error, Result};
use crate::exec::{collect_results, par_map};
use crate::ipet::{build_ilp, solve, BoundJson, BoundResult, CostVector, Sense};
use crate::isa::IsaProgram;
use crate::num::{Energy, Q};

/// Bound of one function including everything it calls.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionBound {
    pub function: String,
    pub value: Q,
    pub counts: BTreeMap<String, u64>,
}

impl FunctionBound {
    pub fn to_bound_result(&self, sense: Sense) -> BoundResult {
        BoundResult {
            function: self.function.clone(),
            sense,
            bound: Energy(self.value.clone()),
            counts: self.counts.clone(),
            status: "optimal".to_string(),
        }
    }
}

/// Call graph levels reachable from `roots`: every function appears after all
/// of its callees, and functions in one level are independent. Self-calls are
/// allowed; longer cycles are not.
pub fn call_levels(graph: &BTreeMap<String, BTreeSet<String>>, roots: &[String]) -> Result<Vec<Vec<String>>> {
    let mut reach = BTreeSet::new();
    let mut work: Vec<&str> = roots.iter().map(String::as_str).collect();
    while let Some(f) = work.pop() {
        if !graph.contains_key(f) {
            return Err(Error::Analysis(format!("function `{f}` is not defined")));
        }
        if reach.insert(f.to_string()) {
            work.extend(graph[f].iter().map(String::as_str));
        }
    }
    let mut level: BTreeMap<String, usize> = BTreeMap::new();
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn visit<'a>(
        g: &'a BTreeMap<String, BTreeSet<String>>,
        f: &'a str,
        state: &mut BTreeMap<&'a str, u8>,
        level: &mut BTreeMap<String, usize>,
        path: &mut Vec<&'a str>,
    ) -> Result<usize> {
        match state.get(f) {
            Some(2) => return Ok(level[f]),
            Some(1) => {
                let start = path.iter().position(|p| *p == f).unwrap_or(0);
                let cycle: Vec<&str> = path[start..].iter().copied().chain([f]).collect();
                return Err(Error::Analysis(format!("mutual recursion is not supported: {}", cycle.join(" -> "))));
            }
            _ => {}
        }
        state.insert(f, 1);
        path.push(f);
        let mut l = 0;
        for g2 in &g[f] {
            if g2 != f {
                l = l.max(visit(g, g2, state, level, path)? + 1);
            }
        }
        path.pop();
        state.insert(f, 2);
        level.insert(f.to_string(), l);
        Ok(l)
    }
    for f in &reach {
        visit(graph, f, &mut state, &mut level, &mut Vec::new())?;
    }
    let depth = level.values().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); depth];
    for (f, l) in level {
        out[l].push(f);
    }
    Ok(out)
}

/// Callees of each block of a graph.
pub type CallsOf<'a> = dyn Fn(&Cfg, BlockId) -> Vec<String> + Sync + 'a;
/// Base (callee-free) cost vector of a graph.
pub type BaseCost<'a> = dyn Fn(&Cfg) -> CostVector + Sync + 'a;

fn solve_one(
    cfg: &Cfg,
    calls: &CallsOf,
    ann: &Annotations,
    sense: Sense,
    base: &BaseCost,
    done: &BTreeMap<String, FunctionBound>,
) -> Result<FunctionBound> {
    let f = cfg.function.as_str();
    let mut costs = base(cfg);
    let mut self_calls: Vec<(BlockId, usize)> = Vec::new();
    for b in 0..cfg.blocks.len() {
        let mut n_self = 0;
        for g in calls(cfg, b) {
            if g == f {
                n_self += 1;
            } else {
                costs.block[b] += &done[&g].value;
            }
        }
        if n_self > 0 {
            self_calls.push((b, n_self));
        }
    }
    let finish = |sol: crate::ipet::IpetSolution| FunctionBound {
        function: f.to_string(),
        value: sol.value,
        counts: cfg.blocks.iter().map(|b| (b.label.clone(), sol.block_counts[b.id])).collect(),
    };
    if self_calls.is_empty() {
        return Ok(finish(solve(&build_ilp(cfg, ann, sense, &costs)?)?));
    }
    let depth = ann.call_bound(f, f).ok_or_else(|| {
        Error::Annotation(format!("recursive function `{f}` needs `callbound func={f} callee={f} max=<depth>`"))
    })?;
    // Innermost activation cannot recurse; each outer level charges its
    // self-calls with the level below.
    let mut sys = build_ilp(cfg, ann, sense, &costs)?;
    let blocks: Vec<BlockId> = self_calls.iter().map(|(b, _)| *b).collect();
    sys.force_zero(cfg, &blocks);
    let mut sol = solve(&sys)?;
    for _ in 0..depth {
        let mut c = costs.clone();
        for &(b, n) in &self_calls {
            c.block[b] += &sol.value * Q::from_integer((n as i64).into());
        }
        sol = solve(&build_ilp(cfg, ann, sense, &c)?)?;
    }
    Ok(finish(sol))
}

/// Bounds every function reachable from `roots`, callees first. Functions
/// on the same call-graph level are solved in parallel.
pub fn solve_program(
    cfgs: &BTreeMap<String, Cfg>,
    calls: &CallsOf,
    ann: &Annotations,
    sense: Sense,
    base: &BaseCost,
    roots: &[String],
) -> Result<BTreeMap<String, FunctionBound>> {
    let graph: BTreeMap<String, BTreeSet<String>> = cfgs
        .iter()
        .map(|(name, cfg)| (name.clone(), (0..cfg.blocks.len()).flat_map(|b| calls(cfg, b)).collect()))
        .collect();
    let mut done = BTreeMap::new();
    for level in call_levels(&graph, roots)? {
        let results = par_map(&level, |f| solve_one(&cfgs[f], calls, ann, sense, base, &done));
        for r in collect_results(results)? {
            done.insert(r.function.clone(), r);
        }
    }
    Ok(done)
}

fn isa_calls(cfg: &Cfg, b: BlockId) -> Vec<String> {
    cfg.blocks[b].call.iter().cloned().collect()
}

/// Upper and lower bounds of one entry function of an ISA program.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub entry: String,
    pub n_threads: u32,
    pub upper: BoundResult,
    pub lower: BoundResult,
    pub upper_slots: u64,
    pub lower_slots: u64,
    pub functions: BTreeMap<String, (BoundResult, BoundResult)>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisJson {
    pub entry: String,
    pub n_threads: u32,
    pub upper: BoundJson,
    pub lower: BoundJson,
    pub upper_slots: u64,
    pub lower_slots: u64,
    pub functions: BTreeMap<String, FunctionJson>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionJson {
    pub upper_nj: f64,
    pub lower_nj: f64,
}

impl Analysis {
    pub fn to_json(&self) -> AnalysisJson {
        AnalysisJson {
            entry: self.entry.clone(),
            n_threads: self.n_threads,
            upper: self.upper.to_json(),
            lower: self.lower.to_json(),
            upper_slots: self.upper_slots,
            lower_slots: self.lower_slots,
            functions: self
                .functions
                .iter()
                .map(|(f, (u, l))| {
                    (
                        f.clone(),
                        FunctionJson {
                            upper_nj: u.bound.nj_f64(),
                            lower_nj: l.bound.nj_f64(),
                        },
                    )
                })
                .collect(),
            warnings: self.warnings.clone(),
        }
    }
}

fn as_u64(v: &Q) -> u64 {
    use num_traits::ToPrimitive;
    v.to_integer().to_u64().expect("slot counts are non-negative integers")
}

/// Bounds of `entry` analysed from already characterized graphs.
pub fn analyze_cfgs(cfgs: &BTreeMap<String, Cfg>, ann: &Annotations, entry: &str, n_threads: u32) -> Result<Analysis> {
    let roots = vec![entry.to_string()];
    let energy = |c: &Cfg| CostVector::energy(c);
    let energy_min = |c: &Cfg| CostVector::energy_min(c);
    let slots = |c: &Cfg| CostVector::slots(c);
    let slots_min = |c: &Cfg| CostVector::slots_min(c);
    let jobs = [(Sense::Maximize, false), (Sense::Minimize, false), (Sense::Maximize, true), (Sense::Minimize, true)];
    let mut runs = collect_results(par_map(&jobs, |&(sense, is_slots)| {
        let base: &BaseCost = match (sense, is_slots) {
            (Sense::Maximize, false) => &energy,
            (Sense::Minimize, false) => &energy_min,
            (Sense::Maximize, true) => &slots,
            (Sense::Minimize, true) => &slots_min,
        };
        solve_program(cfgs, &isa_calls, ann, sense, base, &roots)
    }))?;
    let lower_slots = runs.pop().unwrap();
    let upper_slots = runs.pop().unwrap();
    let lower = runs.pop().unwrap();
    let upper = runs.pop().unwrap();
    let mut warnings = Vec::new();
    for c in cfgs.values().filter(|c| upper.contains_key(&c.function)) {
        warnings.extend(c.warnings.iter().cloned());
    }
    Ok(Analysis {
        entry: entry.to_string(),
        n_threads,
        upper: upper[entry].to_bound_result(Sense::Maximize),
        lower: lower[entry].to_bound_result(Sense::Minimize),
        upper_slots: as_u64(&upper_slots[entry].value),
        lower_slots: as_u64(&lower_slots[entry].value),
        functions: upper
            .iter()
            .map(|(f, u)| (f.clone(), (u.to_bound_result(Sense::Maximize), lower[f].to_bound_result(Sense::Minimize))))
            .collect(),
        warnings,
    })
}

/// ISA-level energy bounds of `entry` at `n_threads` active threads.
pub fn analyze_isa(prog: &IsaProgram, ann: &Annotations, model: &EnergyModel, entry: &str, n_threads: u32) -> Result<Analysis> {
    prog.validate()?;
    if prog.function(entry).is_none() {
        return Err(Error::Argument(format!("no function `{entry}`")));
    }
    let cfgs = characterized_program(prog, model, n_threads)?;
    analyze_cfgs(&cfgs, ann, entry, n_threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::parse_annotations;
    use crate::isa::{parse_isa, Opcode};
    use crate::num::q;

    fn e(op: Opcode) -> Energy {
        EnergyModel::fixture().instr_energy(op, 1).unwrap()
    }

    #[test]
    fn call_chain_adds_callee_bounds() {
        let text = "func main:\n    call f\n    call f\n    ret\nfunc f:\n    add r0, r0, r0\n    ret\n";
        let p = parse_isa(text, "t").unwrap();
        let a = analyze_isa(&p, &Annotations::new(), &EnergyModel::fixture(), "main", 1).unwrap();
        let cfgs = characterized_program(&p, &EnergyModel::fixture(), 1).unwrap();
        let main_own: Energy = cfgs["main"].blocks.iter().map(|b| b.energy_cost.clone()).sum();
        let f_own: Energy = cfgs["f"].blocks.iter().map(|b| b.energy_cost.clone()).sum();
        assert_eq!(a.upper.bound, main_own + f_own.clone() + f_own);
        assert_eq!(a.upper, {
            let mut l = a.lower.clone();
            l.sense = Sense::Maximize;
            l
        });
        assert!(e(Opcode::Add).nanojoules() > q(0));
    }

    #[test]
    fn mutual_recursion_is_rejected() {
        let text = "func main:\n    call a\n    ret\nfunc a:\n    call b\n    ret\nfunc b:\n    call a\n    ret\n";
        let p = parse_isa(text, "t").unwrap();
        let err = analyze_isa(&p, &Annotations::new(), &EnergyModel::fixture(), "main", 1).unwrap_err();
        assert!(err.to_string().contains("a -> b -> a"), "{err}");
    }

    #[test]
    fn self_recursion_uses_depth_bound() {
        let text = "func main:\n    call r\n    ret\nfunc r:\n    bt r0, base\n    sub r0, r0, 1\n    call r\nbase:\n    ret\n";
        let p = parse_isa(text, "t").unwrap();
        assert!(analyze_isa(&p, &Annotations::new(), &EnergyModel::fixture(), "main", 1)
            .unwrap_err()
            .is_annotation_error());
        let model = EnergyModel::fixture();
        let bound = |d: u64| {
            let ann = parse_annotations(&format!("callbound func=r callee=r max={d}\n"), "a").unwrap();
            analyze_isa(&p, &ann, &model, "main", 1).unwrap()
        };
        let (b0, b1, b2) = (bound(0), bound(1), bound(2));
        let step1 = b1.upper.bound.clone() - b0.upper.bound.clone();
        let step2 = b2.upper.bound.clone() - b1.upper.bound.clone();
        assert!(step1.0 > q(0));
        assert_eq!(step1, step2);
        assert_eq!(b0.lower.bound, b2.lower.bound);
    }

    #[test]
    fn unreachable_functions_are_ignored() {
        let text = "func main:\n    ret\nfunc orphan:\nl:\n    bu l\n";
        let p = parse_isa(text, "t").unwrap();
        let a = analyze_isa(&p, &Annotations::new(), &EnergyModel::fixture(), "main", 1).unwrap();
        assert!(!a.functions.contains_key("orphan"));
    }

    #[test]
    fn levels_put_callees_first() {
        let g = BTreeMap::from([
            ("main".to_string(), BTreeSet::from(["a".to_string(), "b".to_string()])),
            ("a".to_string(), BTreeSet::from(["b".to_string()])),
            ("b".to_string(), BTreeSet::new()),
        ]);
        let l = call_levels(&g, &["main".to_string()]).unwrap();
        assert_eq!(l, vec![vec!["b".to_string()], vec!["a".to_string()], vec!["main".to_string()]]);
    }
}
