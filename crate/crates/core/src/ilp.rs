// SPDX-License-Identifier: Apache-2.0

//! Exact integer linear programming.
//!
//! A dense two-phase simplex over arbitrary-precision rationals, wrapped in a
//! depth-first branch-and-bound. All variables are non-negative integers.
//! Among optimal solutions the lexicographically smallest one is returned,
//! which is found by continuing the simplex on the optimal face with the
//! objectives `-x_0`, `-x_1`, ... in turn.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::num::{exact_string, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, Q)>,
    pub cmp: Cmp,
    pub rhs: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IlpSystem {
    pub sense: Sense,
    pub var_names: Vec<String>,
    pub objective: Vec<Q>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IlpSolution {
    pub values: Vec<BigInt>,
    pub objective: Q,
    /// Branch-and-bound nodes explored.
    pub nodes: usize,
}

impl IlpSolution {
    pub fn value(&self, var: usize) -> &BigInt {
        &self.values[var]
    }
}

const NODE_LIMIT: usize = 20_000;
const IIS_NODE_LIMIT: usize = 200;

impl IlpSystem {
    pub fn new(sense: Sense) -> Self {
        IlpSystem {
            sense,
            var_names: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.objective.push(Q::zero());
        self.var_names.len() - 1
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|n| n == name)
    }

    pub fn set_objective(&mut self, var: usize, coeff: Q) {
        self.objective[var] = coeff;
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(usize, Q)>, cmp: Cmp, rhs: Q) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            cmp,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    /// Human-readable rendering of one constraint.
    pub fn describe(&self, c: &Constraint) -> String {
        let lhs: Vec<String> = c
            .terms
            .iter()
            .map(|(v, k)| {
                if k.is_one() {
                    self.var_names[*v].clone()
                } else {
                    format!("{}*{}", exact_string(k), self.var_names[*v])
                }
            })
            .collect();
        let lhs = if lhs.is_empty() { "0".to_string() } else { lhs.join(" + ") };
        format!("{}: {} {} {}", c.name, lhs, c.cmp.symbol(), exact_string(&c.rhs))
    }

    pub fn objective_value(&self, values: &[BigInt]) -> Q {
        self.objective
            .iter()
            .zip(values)
            .map(|(c, v)| c * Q::from_integer(v.clone()))
            .fold(Q::zero(), |a, b| a + b)
    }

    /// Checks an integer point against every constraint.
    pub fn is_feasible_point(&self, values: &[BigInt]) -> bool {
        values.len() == self.num_vars()
            && values.iter().all(|v| !v.is_negative())
            && self.constraints.iter().all(|c| {
                let lhs = c
                    .terms
                    .iter()
                    .map(|(v, k)| k * Q::from_integer(values[*v].clone()))
                    .fold(Q::zero(), |a, b| a + b);
                match c.cmp {
                    Cmp::Le => lhs <= c.rhs,
                    Cmp::Ge => lhs >= c.rhs,
                    Cmp::Eq => lhs == c.rhs,
                }
            })
    }

    /// Solves to integral optimality. Infeasible systems report an irreducible
    /// subset of constraint names; unbounded systems report the variables along
    /// an improving ray.
    pub fn solve(&self) -> Result<IlpSolution> {
        let max_obj: Vec<Q> = match self.sense {
            Sense::Maximize => self.objective.clone(),
            Sense::Minimize => self.objective.iter().map(|c| -c).collect(),
        };
        let rows: Vec<Row> = self.constraints.iter().map(Row::from).collect();
        match branch_and_bound(self.num_vars(), &rows, &max_obj, NODE_LIMIT)? {
            BbOutcome::Optimal(values, nodes) => {
                let objective = self.objective_value(&values);
                Ok(IlpSolution { values, objective, nodes })
            }
            BbOutcome::Infeasible => Err(Error::Infeasible(self.irreducible_infeasible_subset())),
            BbOutcome::Unbounded(vars) => {
                Err(Error::Unbounded(vars.into_iter().map(|v| self.var_names[v].clone()).collect()))
            }
        }
    }

    fn subsystem(&self, keep: &[bool]) -> Vec<Row> {
        self.constraints
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(c, _)| Row::from(c))
            .collect()
    }

    fn lp_feasible(&self, keep: &[bool]) -> bool {
        !matches!(solve_lp(self.num_vars(), &self.subsystem(keep), &[]), LpOutcome::Infeasible)
    }

    fn integer_feasible(&self, keep: &[bool]) -> bool {
        let zero = vec![Q::zero(); self.num_vars()];
        let rows = self.subsystem(keep);
        // An undecided subsystem counts as feasible so the constraint is kept.
        !matches!(branch_and_bound(self.num_vars(), &rows, &zero, IIS_NODE_LIMIT), Ok(BbOutcome::Infeasible))
    }

    /// Deletion filter: drop each constraint whose removal keeps the system infeasible.
    fn irreducible_infeasible_subset(&self) -> Vec<String> {
        let mut keep = vec![true; self.constraints.len()];
        // When the relaxation is already infeasible the cheaper LP test suffices.
        let lp_only = !self.lp_feasible(&keep);
        for i in 0..self.constraints.len() {
            keep[i] = false;
            let feasible = if lp_only { self.lp_feasible(&keep) } else { self.integer_feasible(&keep) };
            if feasible {
                keep[i] = true;
            }
        }
        self.constraints
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(c, _)| self.describe(c))
            .collect()
    }
}

#[derive(Clone, Debug)]
struct Row {
    terms: Vec<(usize, Q)>,
    cmp: Cmp,
    rhs: Q,
}

impl From<&Constraint> for Row {
    fn from(c: &Constraint) -> Row {
        Row {
            terms: c.terms.clone(),
            cmp: c.cmp,
            rhs: c.rhs.clone(),
        }
    }
}

enum LpOutcome {
    Optimal(Vec<Q>),
    Infeasible,
    Unbounded(Vec<usize>),
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    ncols: usize,
    allowed: Vec<bool>,
}

enum Step {
    Optimal,
    Unbounded(Vec<usize>),
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Q {
        &self.rows[i][self.ncols]
    }

    fn reduced_costs(&self, c: &[Q]) -> Vec<Q> {
        let mut d: Vec<Q> = (0..=self.ncols).map(|j| c.get(j).cloned().unwrap_or_else(Q::zero)).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = match c.get(b) {
                Some(v) if !v.is_zero() => v.clone(),
                _ => continue,
            };
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    d[j] -= &cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, col: usize, d: &mut [Q]) {
        let p = self.rows[r][col].clone();
        if !p.is_one() {
            for a in self.rows[r].iter_mut() {
                if !a.is_zero() {
                    *a /= &p;
                }
            }
        }
        let nz: Vec<usize> = (0..=self.ncols).filter(|&j| !self.rows[r][j].is_zero()).collect();
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for row in self.rows.iter_mut() {
            if row.is_empty() || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for &j in &nz {
                row[j] -= &f * &pivot_row[j];
            }
        }
        if !d[col].is_zero() {
            let f = d[col].clone();
            for &j in &nz {
                d[j] -= &f * &pivot_row[j];
            }
        }
        self.rows[r] = pivot_row;
        self.basis[r] = col;
    }

    /// Primal simplex maximizing the objective whose reduced costs are `d`.
    fn optimize(&mut self, d: &mut [Q]) -> Step {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            let mut entering: Option<usize> = None;
            for j in 0..self.ncols {
                if !self.allowed[j] || !d[j].is_positive() {
                    continue;
                }
                match entering {
                    None => entering = Some(j),
                    Some(e) if !bland && d[j] > d[e] => entering = Some(j),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some(col) = entering else {
                return Step::Optimal;
            };
            let mut leave: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => match ratio.cmp(lr) {
                        Ordering::Less => true,
                        Ordering::Equal => self.basis[i] < self.basis[*li],
                        Ordering::Greater => false,
                    },
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, ratio)) = leave else {
                let mut ray = vec![col];
                for i in 0..self.rows.len() {
                    if self.rows[i][col].is_negative() {
                        ray.push(self.basis[i]);
                    }
                }
                ray.sort_unstable();
                return Step::Unbounded(ray);
            };
            if ratio.is_zero() {
                degenerate += 1;
                if degenerate > 50 {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, col, d);
        }
    }
}

/// Maximizes `objectives[0]`, then `objectives[1]` on the optimal face, and so on.
fn solve_lp(n: usize, rows: &[Row], objectives: &[Vec<Q>]) -> LpOutcome {
    // Normalize to non-negative right-hand sides.
    let rows: Vec<Row> = rows
        .iter()
        .map(|r| {
            if r.rhs.is_negative() {
                Row {
                    terms: r.terms.iter().map(|(v, k)| (*v, -k)).collect(),
                    cmp: match r.cmp {
                        Cmp::Le => Cmp::Ge,
                        Cmp::Ge => Cmp::Le,
                        Cmp::Eq => Cmp::Eq,
                    },
                    rhs: -&r.rhs,
                }
            } else {
                r.clone()
            }
        })
        .collect();
    let n_slack = rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
    let n_art = rows.iter().filter(|r| r.cmp != Cmp::Le).count();
    let ncols = n + n_slack + n_art;
    let art_start = n + n_slack;
    let mut t = Tableau {
        rows: Vec::with_capacity(rows.len()),
        basis: Vec::with_capacity(rows.len()),
        ncols,
        allowed: vec![true; ncols],
    };
    let (mut s, mut a) = (n, art_start);
    for r in &rows {
        let mut row = vec![Q::zero(); ncols + 1];
        for (v, k) in &r.terms {
            row[*v] += k;
        }
        row[ncols] = r.rhs.clone();
        match r.cmp {
            Cmp::Le => {
                row[s] = Q::one();
                t.basis.push(s);
                s += 1;
            }
            Cmp::Ge => {
                row[s] = -Q::one();
                s += 1;
                row[a] = Q::one();
                t.basis.push(a);
                a += 1;
            }
            Cmp::Eq => {
                row[a] = Q::one();
                t.basis.push(a);
                a += 1;
            }
        }
        t.rows.push(row);
    }

    if n_art > 0 {
        let mut phase1 = vec![Q::zero(); ncols];
        for c in phase1.iter_mut().skip(art_start) {
            *c = -Q::one();
        }
        let mut d = t.reduced_costs(&phase1);
        if let Step::Unbounded(_) = t.optimize(&mut d) {
            unreachable!("phase one is bounded");
        }
        // d[ncols] holds minus the objective value, i.e. the artificial sum.
        if !d[ncols].is_zero() {
            return LpOutcome::Infeasible;
        }
        // Drive remaining artificials out of the basis, dropping redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= art_start {
                match (0..art_start).find(|&j| !t.rows[i][j].is_zero()) {
                    Some(j) => {
                        t.pivot(i, j, &mut d);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for j in art_start..ncols {
            t.allowed[j] = false;
        }
    }

    for (k, c) in objectives.iter().enumerate() {
        let mut d = t.reduced_costs(c);
        if let Step::Unbounded(ray) = t.optimize(&mut d) {
            if k == 0 {
                return LpOutcome::Unbounded(ray.into_iter().filter(|&v| v < n).collect());
            }
            unreachable!("secondary objectives are bounded below by zero");
        }
        // Restrict to the optimal face.
        for j in 0..ncols {
            if d[j].is_negative() {
                t.allowed[j] = false;
            }
        }
    }

    let mut x = vec![Q::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(i).clone();
        }
    }
    LpOutcome::Optimal(x)
}

enum BbOutcome {
    Optimal(Vec<BigInt>, usize),
    Infeasible,
    Unbounded(Vec<usize>),
}

fn lex_objectives(n: usize, c: &[Q]) -> Vec<Vec<Q>> {
    let mut objs = vec![c.to_vec()];
    for i in 0..n {
        let mut e = vec![Q::zero(); n];
        e[i] = -Q::one();
        objs.push(e);
    }
    objs
}

/// Key compared lexicographically, larger is better.
fn lex_key(c: &[Q], x: &[Q]) -> (Q, Vec<Q>) {
    let obj = c.iter().zip(x).map(|(a, b)| a * b).fold(Q::zero(), |a, b| a + b);
    (obj, x.iter().map(|v| -v).collect())
}

/// Per-variable branching bounds of one search node.
#[derive(Clone)]
struct Bounds {
    lo: Vec<Q>,
    hi: Vec<Option<Q>>,
}

impl Bounds {
    fn rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        for (j, lo) in self.lo.iter().enumerate() {
            if lo.is_positive() {
                rows.push(Row {
                    terms: vec![(j, Q::one())],
                    cmp: Cmp::Ge,
                    rhs: lo.clone(),
                });
            }
            if let Some(hi) = &self.hi[j] {
                rows.push(Row {
                    terms: vec![(j, Q::one())],
                    cmp: Cmp::Le,
                    rhs: hi.clone(),
                });
            }
        }
        rows
    }
}

fn branch_and_bound(n: usize, rows: &[Row], c: &[Q], node_limit: usize) -> Result<BbOutcome> {
    let objectives = lex_objectives(n, c);
    let mut best: Option<((Q, Vec<Q>), Vec<BigInt>)> = None;
    let mut stack = vec![Bounds {
        lo: vec![Q::zero(); n],
        hi: vec![None; n],
    }];
    let mut nodes = 0;
    while let Some(bounds) = stack.pop() {
        nodes += 1;
        if nodes > node_limit {
            return Err(Error::Analysis(format!("branch-and-bound exceeded {node_limit} nodes")));
        }
        let all: Vec<Row> = rows.iter().cloned().chain(bounds.rows()).collect();
        let x = match solve_lp(n, &all, &objectives) {
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded(ray) => {
                if nodes == 1 {
                    return Ok(BbOutcome::Unbounded(ray));
                }
                continue;
            }
            LpOutcome::Optimal(x) => x,
        };
        let key = lex_key(c, &x);
        if let Some((best_key, _)) = &best {
            if key <= *best_key {
                continue;
            }
        }
        match x.iter().position(|v| !v.is_integer()) {
            None => {
                let ints = x.iter().map(|v| v.to_integer()).collect();
                best = Some((key, ints));
            }
            Some(j) => {
                let mut up = bounds.clone();
                up.lo[j] = x[j].ceil();
                let mut down = bounds;
                down.hi[j] = Some(x[j].floor());
                stack.push(up);
                stack.push(down);
            }
        }
    }
    Ok(match best {
        Some((_, values)) => BbOutcome::Optimal(values, nodes),
        None => BbOutcome::Infeasible,
    })
}
