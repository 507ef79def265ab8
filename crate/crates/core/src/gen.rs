// SPDX-License-Identifier: Apache-2.0

//! Seeded generator of random structured IR programs with exact loop bounds.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotations::{parse_annotations, Annotations};
use crate::ir::{parse_ir, IrProgram};

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub mem_words: u32,
    pub helpers: usize,
    pub max_depth: u32,
    pub max_stmts: usize,
    pub max_trip: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            mem_words: 16,
            helpers: 2,
            max_depth: 2,
            max_stmts: 5,
            max_trip: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub text: String,
    pub program: IrProgram,
    pub ann_text: String,
    pub annotations: Annotations,
    /// Data-memory presets.
    pub inputs: BTreeMap<u32, i64>,
}

struct Gen<'c> {
    rng: ChaCha8Rng,
    cfg: &'c GenConfig,
    out: String,
    ann: String,
    func: String,
    next_val: usize,
    next_block: usize,
    current: String,
    helpers: Vec<(String, usize)>,
}

impl Gen<'_> {
    fn val(&mut self) -> String {
        self.next_val += 1;
        format!("v{}", self.next_val)
    }

    fn block(&mut self) -> String {
        self.next_block += 1;
        format!("b{}", self.next_block)
    }

    fn line(&mut self, s: &str) {
        writeln!(self.out, "  {s}").unwrap();
    }

    fn start(&mut self, label: &str) {
        writeln!(self.out, "{label}:").unwrap();
        self.current = label.to_string();
    }

    fn pick(&mut self, scope: &[String]) -> String {
        if scope.is_empty() || self.rng.gen_bool(0.15) {
            self.rng.gen_range(-5i64..20).to_string()
        } else {
            format!("%{}", scope[self.rng.gen_range(0..scope.len())])
        }
    }

    fn pick_var(&mut self, scope: &mut Vec<String>) -> String {
        if scope.is_empty() {
            let v = self.val();
            let a = self.rng.gen_range(0..self.cfg.mem_words);
            self.line(&format!("%{v} = load {a}"));
            scope.push(v);
        }
        format!("%{}", scope[self.rng.gen_range(0..scope.len())])
    }

    fn simple(&mut self, scope: &mut Vec<String>) {
        let v = self.val();
        let k = self.rng.gen_range(0..10);
        match k {
            0 | 1 => {
                let a = self.rng.gen_range(0..self.cfg.mem_words);
                self.line(&format!("%{v} = load {a}"));
            }
            2 => {
                let c = self.rng.gen_range(-9i64..50);
                self.line(&format!("%{v} = const {c}"));
            }
            3 | 4 => {
                let op = ["add", "sub", "mul"][self.rng.gen_range(0..3)];
                let (a, b) = (self.pick_var(scope), self.pick(scope));
                self.line(&format!("%{v} = {op} {a}, {b}"));
            }
            5 => {
                let a = self.pick_var(scope);
                let d = [1i64, 2, 3, 7, -4][self.rng.gen_range(0..5)];
                self.line(&format!("%{v} = div {a}, {d}"));
            }
            6 => {
                let p = ["lt", "gt", "le", "ge", "eq", "ne"][self.rng.gen_range(0..6)];
                let (a, b) = (self.pick_var(scope), self.pick(scope));
                self.line(&format!("%{v} = icmp {p} {a}, {b}"));
            }
            7 => {
                let m = self.val();
                let (a, b, c) = (self.pick_var(scope), self.pick_var(scope), self.pick(scope));
                self.line(&format!("%{m} = mul {a}, {b}"));
                self.line(&format!("%{v} = add %{m}, {c}"));
            }
            8 => {
                let a = self.rng.gen_range(0..self.cfg.mem_words);
                let x = self.pick(scope);
                self.line(&format!("store {a}, {x}"));
                return;
            }
            _ => {
                if self.helpers.is_empty() {
                    let x = self.pick_var(scope);
                    self.line(&format!("%{v} = add {x}, 1"));
                } else {
                    let (h, n) = self.helpers[self.rng.gen_range(0..self.helpers.len())].clone();
                    let args: Vec<String> = (0..n).map(|_| self.pick(scope)).collect();
                    self.line(&format!("%{v} = call {h}({})", args.join(", ")));
                }
            }
        }
        scope.push(v);
    }

    fn stmts(&mut self, scope: &mut Vec<String>, depth: u32) {
        let n = self.rng.gen_range(1..=self.cfg.max_stmts);
        for _ in 0..n {
            let r = self.rng.gen_range(0..10);
            if depth < self.cfg.max_depth && r < 2 {
                self.diamond(scope, depth + 1);
            } else if depth < self.cfg.max_depth && r < 4 {
                self.counted_loop(scope, depth + 1);
            } else {
                self.simple(scope);
            }
        }
    }

    fn diamond(&mut self, scope: &mut Vec<String>, depth: u32) {
        let (a, b) = (self.pick_var(scope), self.pick(scope));
        let c = self.val();
        let p = ["lt", "gt", "le", "ge", "eq", "ne"][self.rng.gen_range(0..6)];
        self.line(&format!("%{c} = icmp {p} {a}, {b}"));
        let (t, e, j) = (self.block(), self.block(), self.block());
        self.line(&format!("br %{c}, {t}, {e}"));
        self.start(&t);
        let mut st = scope.clone();
        self.stmts(&mut st, depth);
        let vt = self.pick(&st);
        let t_end = self.current.clone();
        self.line(&format!("jump {j}"));
        self.start(&e);
        let mut se = scope.clone();
        if self.rng.gen_bool(0.6) {
            self.stmts(&mut se, depth);
        }
        let ve = self.pick(&se);
        let e_end = self.current.clone();
        self.line(&format!("jump {j}"));
        self.start(&j);
        let phi = self.val();
        self.line(&format!("%{phi} = phi [{vt}, {t_end}], [{ve}, {e_end}]"));
        scope.push(phi);
    }

    fn counted_loop(&mut self, scope: &mut Vec<String>, depth: u32) {
        let trip = self.rng.gen_range(0..=self.cfg.max_trip);
        let init = self.pick(scope);
        let pre = self.current.clone();
        let (h, body, exit) = (self.block(), self.block(), self.block());
        let (i, i2, acc, acc2, c) = (self.val(), self.val(), self.val(), self.val(), self.val());
        self.line(&format!("jump {h}"));
        // The latch label is only known after the body; patch it in afterwards.
        self.start(&h);
        let marker = format!("@latch{}@", self.next_block);
        self.line(&format!("%{i} = phi [0, {pre}], [%{i2}, {marker}]"));
        self.line(&format!("%{acc} = phi [{init}, {pre}], [%{acc2}, {marker}]"));
        self.line(&format!("%{c} = icmp lt %{i}, {trip}"));
        self.line(&format!("br %{c}, {body}, {exit}"));
        self.start(&body);
        let mut sb = scope.clone();
        sb.push(i.clone());
        sb.push(acc.clone());
        self.stmts(&mut sb, depth);
        let x = self.pick(&sb);
        self.line(&format!("%{acc2} = add %{acc}, {x}"));
        self.line(&format!("%{i2} = add %{i}, 1"));
        let latch = self.current.clone();
        self.line(&format!("jump {h}"));
        self.out = self.out.replace(&marker, &latch);
        self.start(&exit);
        let min = if self.rng.gen_bool(0.5) { format!(" min={trip}") } else { String::new() };
        writeln!(self.ann, "loopbound func={} header={h} max={trip}{min}", self.func).unwrap();
        scope.push(i);
        scope.push(acc);
    }

    fn function(&mut self, name: &str, params: usize) {
        self.func = name.to_string();
        let ps: Vec<String> = (0..params).map(|k| format!("p{k}")).collect();
        writeln!(
            self.out,
            "func {name}({}):",
            ps.iter().map(|p| format!("%{p}")).collect::<Vec<_>>().join(", ")
        )
        .unwrap();
        let entry = self.block();
        self.start(&entry);
        let mut scope = ps;
        self.stmts(&mut scope, 0);
        let r = self.pick(&scope);
        if name == "main" && self.rng.gen_bool(0.3) {
            self.line("ret");
        } else {
            self.line(&format!("ret {r}"));
        }
    }
}

/// Generates a terminating program (`main` plus helpers) with exact loop
/// bound annotations and random memory presets.
pub fn random_program(seed: u64, cfg: &GenConfig) -> Generated {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg,
        out: format!("mem {}\n", cfg.mem_words),
        ann: String::new(),
        func: String::new(),
        next_val: 0,
        next_block: 0,
        current: String::new(),
        helpers: Vec::new(),
    };
    for k in 0..cfg.helpers {
        let name = format!("h{k}");
        let params = g.rng.gen_range(0..3);
        g.function(&name, params);
        g.helpers.push((name, params));
    }
    g.function("main", 0);
    let mut inputs = BTreeMap::new();
    for a in 0..cfg.mem_words {
        if g.rng.gen_bool(0.7) {
            inputs.insert(a, g.rng.gen_range(-20i64..100));
        }
    }
    let program = parse_ir(&g.out, "generated.mir").unwrap_or_else(|e| panic!("generator bug: {e}\n{}", g.out));
    let annotations = parse_annotations(&g.ann, "generated.ann").expect("generated annotations parse");
    Generated {
        text: g.out,
        program,
        ann_text: g.ann,
        annotations,
        inputs,
    }
}
