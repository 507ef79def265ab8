// SPDX-License-Identifier: Apache-2.0

//! Instruction-level energy model for a hardware-multithreaded core.
//!
//! The energy of one issued instruction `i` is
//!
//! ```text
//! (P_s + P_i * M[N_p] * O) / N_p * 4 * T_clk,   N_p = min(N_t, 4)
//! ```
//!
//! and idle time is charged at `P_s + P_di`. A divide occupies `div_cycles`
//! issue slots and is charged that many times the single-slot figure.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::isa::Opcode;
use crate::num::{format_sig, parse_decimal, q, Energy, Q};

/// Precomputed per-opcode energies.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceTable(BTreeMap<Opcode, Energy>);

impl PriceTable {
    pub fn get(&self, op: Opcode) -> Result<&Energy> {
        self.0.get(&op).ok_or_else(|| Error::ModelCoverage(vec![op.name().to_string()]))
    }
}

/// The shipped fixture model; its values are invented for testing.
pub const DEFAULT_MODEL_TEXT: &str = include_str!("../fixtures/default.em");

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyModel {
    /// Static power, watts.
    pub p_static: Q,
    /// Dynamic idle power, watts.
    pub p_dyn_idle: Q,
    /// Per-opcode dynamic power, watts.
    pub p_instr: BTreeMap<Opcode, Q>,
    /// Inter-instruction overhead factor.
    pub overhead: Q,
    /// Pipeline occupancy scaling for N_p = 1..=4.
    pub occupancy_scale: [Q; 4],
    /// Seconds per clock cycle.
    pub t_clk: Q,
    pub cycles_per_issue: u32,
    pub div_cycles: u32,
}

impl EnergyModel {
    /// The fixture model shipped as `fixtures/default.em`.
    pub fn fixture() -> EnergyModel {
        load_model(DEFAULT_MODEL_TEXT).expect("shipped fixture model is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("energy model: {m}")));
        if self.p_static.is_negative() || self.p_dyn_idle.is_negative() {
            return bad("powers must be non-negative");
        }
        if let Some((op, _)) = self.p_instr.iter().find(|(_, p)| p.is_negative()) {
            return bad(&format!("power for `{op}` is negative"));
        }
        if self.overhead < Q::one() {
            return bad("overhead must be >= 1");
        }
        if self.occupancy_scale.windows(2).any(|w| w[1] < w[0]) {
            return bad("occupancy scale must be non-decreasing in N_p");
        }
        if self.occupancy_scale.iter().any(|m| m.is_negative()) {
            return bad("occupancy scale must be non-negative");
        }
        if !self.t_clk.is_positive() {
            return bad("t_clk must be positive");
        }
        if self.div_cycles == 0 {
            return bad("div_cycles must be positive");
        }
        let missing: Vec<String> = Opcode::ALL
            .iter()
            .filter(|op| !self.p_instr.contains_key(op))
            .map(|op| op.name().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::ModelCoverage(missing));
        }
        Ok(())
    }

    /// Issue slots an opcode occupies.
    pub fn issue_slots(&self, opcode: Opcode) -> u64 {
        if opcode == Opcode::Div {
            self.div_cycles as u64
        } else {
            1
        }
    }

    /// Energy of one issued instruction with `n_active_threads` runnable threads.
    pub fn instr_energy(&self, opcode: Opcode, n_active_threads: u32) -> Result<Energy> {
        if n_active_threads == 0 {
            return Err(Error::Argument("number of active threads must be >= 1".into()));
        }
        let p_i = self
            .p_instr
            .get(&opcode)
            .ok_or_else(|| Error::ModelCoverage(vec![opcode.name().to_string()]))?;
        let n_p = n_active_threads.min(4);
        let m = &self.occupancy_scale[(n_p - 1) as usize];
        let power = (&self.p_static + p_i * m * &self.overhead) / q(n_p as i64);
        let slot = power * q(self.cycles_per_issue as i64) * &self.t_clk;
        Ok(Energy(slot * q(self.issue_slots(opcode) as i64)))
    }

    /// Energies of every covered opcode at one thread count.
    pub fn prices(&self, n_active_threads: u32) -> Result<PriceTable> {
        let mut t = BTreeMap::new();
        for op in Opcode::ALL {
            if self.p_instr.contains_key(&op) {
                t.insert(op, self.instr_energy(op, n_active_threads)?);
            }
        }
        Ok(PriceTable(t))
    }

    /// Energy dissipated while no thread is runnable for `t_idle` seconds.
    pub fn idle_energy(&self, t_idle: &Q) -> Result<Energy> {
        if t_idle.is_negative() {
            return Err(Error::Argument(format!("idle time must be non-negative, got {t_idle}")));
        }
        Ok(Energy((&self.p_static + &self.p_dyn_idle) * t_idle))
    }

    /// Idle energy for a number of clock cycles.
    pub fn idle_energy_cycles(&self, cycles: u64) -> Energy {
        Energy((&self.p_static + &self.p_dyn_idle) * &self.t_clk * q(cycles as i64))
    }

    /// Serializes to the `.em` format; `load_model(m.to_em_string()) == m`.
    pub fn to_em_string(&self) -> String {
        let mw = |v: &Q| exact_decimal(&(v * q(1000)));
        let mut s = String::new();
        let _ = writeln!(s, "p_static_mw = {}", mw(&self.p_static));
        let _ = writeln!(s, "p_dyn_idle_mw = {}", mw(&self.p_dyn_idle));
        let _ = writeln!(s, "overhead = {}", exact_decimal(&self.overhead));
        let _ = writeln!(s, "t_clk_ns = {}", exact_decimal(&(&self.t_clk * q(1_000_000_000))));
        let _ = writeln!(s, "div_cycles = {}", self.div_cycles);
        for (i, m) in self.occupancy_scale.iter().enumerate() {
            let _ = writeln!(s, "m{} = {}", i + 1, exact_decimal(m));
        }
        for (op, p) in &self.p_instr {
            let _ = writeln!(s, "pi.{}_mw = {}", op.name(), mw(p));
        }
        s
    }
}

/// Renders a rational with a terminating decimal expansion exactly; falls back
/// to 12 significant digits otherwise.
fn exact_decimal(v: &Q) -> String {
    let mut d = v.denom().clone();
    let two = num_bigint::BigInt::from(2);
    let five = num_bigint::BigInt::from(5);
    let mut digits = 0u32;
    while (&d % &two).is_zero() || (&d % &five).is_zero() {
        if (&d % &two).is_zero() {
            d /= &two;
        }
        if (&d % &five).is_zero() {
            d /= &five;
        }
        digits += 1;
    }
    if !d.is_one() {
        return format_sig(v, 12);
    }
    let scale = num_traits::pow(num_bigint::BigInt::from(10), digits as usize);
    let scaled = (v * Q::from_integer(scale)).to_integer();
    let neg = scaled.is_negative();
    let mut s = scaled.abs().to_string();
    if digits > 0 {
        let digits = digits as usize;
        if s.len() <= digits {
            s = format!("{}{}", "0".repeat(digits - s.len() + 1), s);
        }
        s.insert(s.len() - digits, '.');
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if neg {
        s.insert(0, '-');
    }
    s
}

/// Parses the line-oriented `.em` model format.
pub fn load_model(text: &str) -> Result<EnergyModel> {
    let file = "<model>";
    let mut scalars: BTreeMap<String, (Q, usize)> = BTreeMap::new();
    let mut p_instr = BTreeMap::new();
    let mut seen_any = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        seen_any = true;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(file, line_no, 1, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let v = parse_decimal(value)
            .ok_or_else(|| Error::parse(file, line_no, raw.find('=').unwrap_or(0) + 2, format!("bad number `{value}`")))?;
        if let Some(op) = key.strip_prefix("pi.").and_then(|k| k.strip_suffix("_mw")) {
            let opcode = Opcode::from_name(op)
                .ok_or_else(|| Error::parse(file, line_no, 1, format!("unknown opcode `{op}`")))?;
            p_instr.insert(opcode, v / q(1000));
            continue;
        }
        match key {
            "p_static_mw" | "p_dyn_idle_mw" | "overhead" | "t_clk_ns" | "div_cycles" | "m1" | "m2" | "m3" | "m4" => {
                scalars.insert(key.to_string(), (v, line_no));
            }
            other => return Err(Error::parse(file, line_no, 1, format!("unknown key `{other}`"))),
        }
    }
    if !seen_any {
        return Err(Error::parse(file, 1, 1, "empty model file"));
    }
    let get = |k: &str| -> Result<Q> {
        scalars
            .get(k)
            .map(|(v, _)| v.clone())
            .ok_or_else(|| Error::parse(file, 0, 0, format!("missing key `{k}`")))
    };
    let div = get("div_cycles")?;
    if !div.is_integer() || div.is_negative() {
        let line = scalars["div_cycles"].1;
        return Err(Error::parse(file, line, 1, "div_cycles must be a non-negative integer"));
    }
    let div_cycles: u32 = div
        .to_integer()
        .try_into()
        .map_err(|_| Error::parse(file, scalars["div_cycles"].1, 1, "div_cycles out of range"))?;
    let model = EnergyModel {
        p_static: get("p_static_mw")? / q(1000),
        p_dyn_idle: get("p_dyn_idle_mw")? / q(1000),
        p_instr,
        overhead: get("overhead")?,
        occupancy_scale: [get("m1")?, get("m2")?, get("m3")?, get("m4")?],
        t_clk: get("t_clk_ns")? / q(1_000_000_000),
        cycles_per_issue: 4,
        div_cycles,
    };
    model.validate()?;
    Ok(model)
}
