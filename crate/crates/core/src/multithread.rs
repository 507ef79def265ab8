// SPDX-License-Identifier: Apache-2.0

//! Energy bounds for balanced task farms and balanced streaming pipelines.

use std::fmt;

use serde::Serialize;

use crate::analysis::{analyze_isa, Analysis};
use crate::annotations::Annotations;
use crate::energy_model::EnergyModel;
use crate::error::{Error, Result};
use crate::exec::{collect_results, par_map};
use crate::isa::{issue_latency, IsaProgram};
use crate::num::{q, to_f64_sig, Energy, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ThreadPattern {
    Farm,
    Pipeline,
}

impl ThreadPattern {
    pub fn name(self) -> &'static str {
        match self {
            ThreadPattern::Farm => "farm",
            ThreadPattern::Pipeline => "pipeline",
        }
    }
}

/// Concurrency declaration carried by a program (`threads { ... }` line).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadSpec {
    pub pattern: ThreadPattern,
    pub n_threads: u32,
    /// Farm: the single replicated entry. Pipeline: stage functions in order.
    pub entries: Vec<String>,
    /// Pipeline only: label of the per-item loop header in every stage.
    pub items_loop: Option<String>,
    /// Pipeline only: accepted relative imbalance of per-item issue slots, in percent.
    pub tolerance_pct: u32,
}

pub const DEFAULT_IMBALANCE_TOLERANCE_PCT: u32 = 5;
pub const MAX_THREADS: u32 = 8;

impl ThreadSpec {
    pub fn farm(n_threads: u32, entry: impl Into<String>) -> ThreadSpec {
        ThreadSpec {
            pattern: ThreadPattern::Farm,
            n_threads,
            entries: vec![entry.into()],
            items_loop: None,
            tolerance_pct: DEFAULT_IMBALANCE_TOLERANCE_PCT,
        }
    }

    pub fn pipeline(stages: Vec<String>, items_loop: impl Into<String>) -> ThreadSpec {
        ThreadSpec {
            pattern: ThreadPattern::Pipeline,
            n_threads: stages.len() as u32,
            entries: stages,
            items_loop: Some(items_loop.into()),
            tolerance_pct: DEFAULT_IMBALANCE_TOLERANCE_PCT,
        }
    }

    pub fn entry_functions(&self) -> Vec<String> {
        self.entries.clone()
    }

    /// Entry function run by hardware thread `t`.
    pub fn entry_of(&self, t: usize) -> &str {
        match self.pattern {
            ThreadPattern::Farm => &self.entries[0],
            ThreadPattern::Pipeline => &self.entries[t],
        }
    }

    /// Parses `threads { pattern=farm n=4 entry=main }` or
    /// `threads { pattern=pipeline stages=[s0,s1] items_loop=loop }`.
    pub fn parse(line: &str) -> std::result::Result<ThreadSpec, String> {
        let body = line
            .trim()
            .strip_prefix("threads")
            .map(str::trim)
            .and_then(|s| s.strip_prefix('{'))
            .and_then(|s| s.trim_end().strip_suffix('}'))
            .ok_or_else(|| "expected `threads { ... }`".to_string())?;
        let mut pattern = None;
        let mut n = None;
        let mut entry = None;
        let mut stages = None;
        let mut items_loop = None;
        let mut tolerance = DEFAULT_IMBALANCE_TOLERANCE_PCT;
        for tok in body.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected key=value, got `{tok}`"))?;
            match k {
                "pattern" => {
                    pattern = Some(match v {
                        "farm" => ThreadPattern::Farm,
                        "pipeline" => ThreadPattern::Pipeline,
                        other => return Err(format!("unknown pattern `{other}`")),
                    })
                }
                "n" => n = Some(v.parse::<u32>().map_err(|_| format!("bad thread count `{v}`"))?),
                "entry" => entry = Some(v.to_string()),
                "stages" => {
                    let inner = v
                        .strip_prefix('[')
                        .and_then(|s| s.strip_suffix(']'))
                        .ok_or_else(|| format!("expected [s0,s1,...], got `{v}`"))?;
                    stages = Some(
                        inner
                            .split(',')
                            .map(|s| s.trim().to_string())
                            .filter(|s| !s.is_empty())
                            .collect::<Vec<_>>(),
                    );
                }
                "items_loop" => items_loop = Some(v.to_string()),
                "tolerance" => tolerance = v.parse().map_err(|_| format!("bad tolerance `{v}`"))?,
                other => return Err(format!("unknown thread spec key `{other}`")),
            }
        }
        let spec = match pattern.ok_or("missing pattern=")? {
            ThreadPattern::Farm => {
                let mut s = ThreadSpec::farm(n.ok_or("farm needs n=")?, entry.unwrap_or_else(|| "main".into()));
                s.tolerance_pct = tolerance;
                s
            }
            ThreadPattern::Pipeline => {
                let stages = stages.ok_or("pipeline needs stages=[...]")?;
                let mut s = ThreadSpec::pipeline(stages, items_loop.ok_or("pipeline needs items_loop=")?);
                if let Some(n) = n {
                    if n != s.n_threads {
                        return Err(format!("n={n} disagrees with {} stages", s.n_threads));
                    }
                }
                s.tolerance_pct = tolerance;
                s
            }
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if self.n_threads == 0 || self.n_threads > MAX_THREADS {
            return Err(format!("thread count must be in 1..={MAX_THREADS}, got {}", self.n_threads));
        }
        if self.pattern == ThreadPattern::Pipeline && self.entries.len() != self.n_threads as usize {
            return Err("pipeline stage count must equal the thread count".into());
        }
        Ok(())
    }
}

impl fmt::Display for ThreadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pattern {
            ThreadPattern::Farm => write!(f, "threads {{ pattern=farm n={} entry={}", self.n_threads, self.entries[0])?,
            ThreadPattern::Pipeline => write!(
                f,
                "threads {{ pattern=pipeline stages=[{}] items_loop={}",
                self.entries.join(","),
                self.items_loop.as_deref().unwrap_or("")
            )?,
        }
        if self.tolerance_pct != DEFAULT_IMBALANCE_TOLERANCE_PCT {
            write!(f, " tolerance={}", self.tolerance_pct)?;
        }
        f.write_str(" }")
    }
}

/// Energy and time bounds of a balanced multi-threaded program.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateBound {
    pub pattern: ThreadPattern,
    pub n_threads: u32,
    /// One analysis per distinct thread body at N_t = n_threads.
    pub per_thread: Vec<Analysis>,
    pub total_upper: Energy,
    pub total_lower: Energy,
    /// Issue slots of the slowest thread.
    pub slots_upper: u64,
    /// Seconds; idle time is zero for balanced patterns.
    pub time_upper: Q,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThreadJson {
    pub entry: String,
    pub upper_nj: f64,
    pub lower_nj: f64,
    pub upper_slots: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AggregateJson {
    pub pattern: String,
    pub n_threads: u32,
    pub total_upper_nj: f64,
    pub total_lower_nj: f64,
    pub slots_upper: u64,
    pub time_upper_ns: f64,
    pub per_thread: Vec<ThreadJson>,
}

impl AggregateBound {
    pub fn to_json(&self) -> AggregateJson {
        AggregateJson {
            pattern: self.pattern.name().to_string(),
            n_threads: self.n_threads,
            total_upper_nj: self.total_upper.nj_f64(),
            total_lower_nj: self.total_lower.nj_f64(),
            slots_upper: self.slots_upper,
            time_upper_ns: to_f64_sig(&(&self.time_upper * q(1_000_000_000)), 6),
            per_thread: self
                .per_thread
                .iter()
                .map(|a| ThreadJson {
                    entry: a.entry.clone(),
                    upper_nj: a.upper.bound.nj_f64(),
                    lower_nj: a.lower.bound.nj_f64(),
                    upper_slots: a.upper_slots,
                })
                .collect(),
        }
    }
}

fn time_of(slots: u64, n_threads: u32, model: &EnergyModel) -> Q {
    q(slots as i64) * q(issue_latency(n_threads) as i64) * &model.t_clk
}

fn spec_of(prog: &IsaProgram, want: ThreadPattern) -> Result<&ThreadSpec> {
    let spec = prog
        .threads
        .as_ref()
        .ok_or_else(|| Error::Argument("program declares no `threads { ... }` spec".into()))?;
    if spec.pattern != want {
        return Err(Error::Argument(format!("expected a {} program, found a {}", want.name(), spec.pattern.name())));
    }
    spec.check().map_err(Error::Validation)?;
    Ok(spec)
}

/// Replicated threads without communication: every thread is bounded at
/// N_t = n and the total is n times one thread.
pub fn analyze_farm(prog: &IsaProgram, ann: &Annotations, model: &EnergyModel) -> Result<AggregateBound> {
    let spec = spec_of(prog, ThreadPattern::Farm)?;
    let n = spec.n_threads;
    let a = analyze_isa(prog, ann, model, &spec.entries[0], n)?;
    let k = q(n as i64);
    Ok(AggregateBound {
        pattern: ThreadPattern::Farm,
        n_threads: n,
        total_upper: a.upper.bound.scale(&k),
        total_lower: a.lower.bound.scale(&k),
        slots_upper: a.upper_slots,
        time_upper: time_of(a.upper_slots, n, model),
        per_thread: vec![a],
    })
}

/// Stages of a streaming pipeline, each bounded at N_t = number of stages.
/// Per-item issue slots must agree within the declared tolerance.
pub fn analyze_pipeline(prog: &IsaProgram, ann: &Annotations, model: &EnergyModel) -> Result<AggregateBound> {
    let spec = spec_of(prog, ThreadPattern::Pipeline)?;
    let n = spec.n_threads;
    let items_loop = spec.items_loop.as_deref().unwrap_or_default();
    let stages = collect_results(par_map(&spec.entries, |s| analyze_isa(prog, ann, model, s, n)))?;
    let mut per_item = Vec::new();
    for a in &stages {
        let (items, _) = ann.loop_bound(&a.entry, items_loop).ok_or_else(|| {
            Error::Annotation(format!("stage `{}` has no loop bound for its items loop `{items_loop}`", a.entry))
        })?;
        per_item.push(Q::new((a.upper_slots as i64).into(), (items.max(1) as i64).into()));
    }
    let max = per_item.iter().max().cloned().unwrap_or_default();
    let min = per_item.iter().min().cloned().unwrap_or_default();
    if max > q(0) && (&max - &min) * q(100) > &max * q(spec.tolerance_pct as i64) {
        let detail: Vec<String> = stages
            .iter()
            .zip(&per_item)
            .map(|(a, p)| format!("{}={}", a.entry, crate::num::format_sig(p, 4)))
            .collect();
        return Err(Error::Analysis(format!(
            "pipeline stages are unbalanced beyond {}%: per-item issue slots {}",
            spec.tolerance_pct,
            detail.join(", ")
        )));
    }
    let slots_upper = stages.iter().map(|a| a.upper_slots).max().unwrap_or(0);
    Ok(AggregateBound {
        pattern: ThreadPattern::Pipeline,
        n_threads: n,
        total_upper: stages.iter().map(|a| &a.upper.bound).sum(),
        total_lower: stages.iter().map(|a| &a.lower.bound).sum(),
        slots_upper,
        time_upper: time_of(slots_upper, n, model),
        per_thread: stages,
    })
}

/// Farm or pipeline, whichever the program declares.
pub fn analyze_threads(prog: &IsaProgram, ann: &Annotations, model: &EnergyModel) -> Result<AggregateBound> {
    match prog.threads.as_ref().map(|t| t.pattern) {
        Some(ThreadPattern::Pipeline) => analyze_pipeline(prog, ann, model),
        _ => analyze_farm(prog, ann, model),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub n_threads: u32,
    /// Runs of the entry function per thread.
    pub tasks_per_thread: u32,
    pub energy_nj: f64,
    pub time_ns: f64,
    #[serde(skip)]
    pub energy: Energy,
    #[serde(skip)]
    pub time: Q,
}

/// One row per thread count for a farm whose entry function is one task.
///
/// With `tasks = None` every thread runs the entry once (replicated work).
/// With `tasks = Some(t)` a fixed pool of `t` tasks is shared evenly, so each
/// of the `n` threads runs `t / n` of them; `n` must divide `t`.
pub fn energy_time_table(
    prog: &IsaProgram,
    ann: &Annotations,
    model: &EnergyModel,
    entry: &str,
    ns: &[u32],
    tasks: Option<u32>,
) -> Result<Vec<TableRow>> {
    let rows = par_map(ns, |&n| -> Result<TableRow> {
        if n == 0 || n > MAX_THREADS {
            return Err(Error::Argument(format!("thread count must be in 1..={MAX_THREADS}, got {n}")));
        }
        let per_thread = match tasks {
            None => 1,
            Some(t) if t % n == 0 && t > 0 => t / n,
            Some(t) => return Err(Error::Argument(format!("{t} tasks cannot be shared evenly by {n} threads"))),
        };
        let a = analyze_isa(prog, ann, model, entry, n)?;
        let energy = a.upper.bound.scale(&q((n * per_thread) as i64));
        let time = time_of(a.upper_slots * per_thread as u64, n, model);
        Ok(TableRow {
            n_threads: n,
            tasks_per_thread: per_thread,
            energy_nj: energy.nj_f64(),
            time_ns: to_f64_sig(&(&time * q(1_000_000_000)), 6),
            energy,
            time,
        })
    });
    collect_results(rows)
}
