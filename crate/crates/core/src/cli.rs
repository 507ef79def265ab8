// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::analyze_isa;
use crate::annotations::{parse_annotations, Annotations};
use crate::cfg::characterized_program;
use crate::energy_model::{load_model, EnergyModel};
use crate::error::{Error, Result};
use crate::exec::{collect_results, par_map};
use crate::ir::{lower, parse_ir, prepare, IrProgram, LowerOptions};
use crate::isa::{parse_isa, IsaProgram};
use crate::mapping::{build_mapping, ir_level_ecsa, isa_body_energy, IrAnalysisOptions, MappingOptions};
use crate::multithread::{analyze_threads, energy_time_table, ThreadPattern, ThreadSpec};
use crate::num::{parse_decimal, to_f64_sig, Energy, Q};
use crate::regression::{fit_polynomial, parametric_sweep, upper_points, ProgramKind};
use crate::sim::{run, run_traced, SimInputs, SimResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYSIS: i32 = 2;
pub const EXIT_ANNOTATION: i32 = 3;

pub const MODEL_ENV: &str = "WATTBOUND_MODEL";

#[derive(Parser, Debug)]
#[command(name = "wattbound", version, about = "Static energy bounds for a hardware-multithreaded ISA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Upper and lower energy bounds of a program.
    Analyze(AnalyzeArgs),
    /// Cycle-level simulation with per-slot energy accounting.
    Simulate(SimulateArgs),
    /// Lower an IR program and map ISA energy back to IR instructions.
    Map(MapArgs),
    /// Least-squares polynomial through (x, energy) points.
    Fit(FitArgs),
    /// Bounds of a templated program over a range of loop bounds.
    Sweep(SweepArgs),
    /// Bounds against simulated energy for a directory of inputs.
    Compare(CompareArgs),
    /// Energy and time of a task farm for several thread counts.
    EnergyTable(TableArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Energy model file (defaults to $WATTBOUND_MODEL, then the built-in fixture).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Annotation file.
    #[arg(long)]
    pub ann: Option<PathBuf>,
    /// Human-readable output instead of JSON.
    #[arg(long, conflicts_with = "json")]
    pub text: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Isa,
    Ir,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SenseArg {
    Upper,
    Lower,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PatternArg {
    Farm,
    Pipeline,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    pub program: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub level: Option<Level>,
    #[arg(long, value_enum, default_value = "both")]
    pub sense: SenseArg,
    #[arg(long)]
    pub threads: Option<u32>,
    #[arg(long, value_enum)]
    pub pattern: Option<PatternArg>,
    /// Charge a fused multiply-add to both IR instructions in proportion.
    #[arg(long)]
    pub split_fused_cost: bool,
    /// Print the characterized control flow graphs and exit.
    #[arg(long)]
    pub dump_cfg: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub program: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Register, memory and channel presets.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Replicate `main` on this many threads.
    #[arg(long)]
    pub threads: Option<u32>,
    /// Write the per-slot trace as TSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    pub program: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub threads: u32,
    #[arg(long)]
    pub split_fused_cost: bool,
    #[arg(long)]
    pub emit_isa: Option<PathBuf>,
    #[arg(long)]
    pub emit_map: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub degree: usize,
    /// CSV of `x,energy` rows; a header row is allowed.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub text: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Program template; `{x}` is replaced by the parameter.
    pub program: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub from: i64,
    #[arg(long)]
    pub to: i64,
    /// Also fit the upper bounds with a polynomial of this degree.
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub program: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Directory of `.in` files.
    #[arg(long)]
    pub inputs: PathBuf,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    pub program: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated thread counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub threads: Vec<u32>,
    /// Size of a task pool shared by the threads; without it every thread runs the entry once.
    #[arg(long)]
    pub tasks: Option<u32>,
    #[arg(long, default_value = "main")]
    pub entry: String,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_annotation_error() {
        EXIT_ANNOTATION
    } else {
        EXIT_ANALYSIS
    }
}

/// Runs a parsed command, writing its report to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let report = match cli.command {
        Command::Analyze(a) => cmd_analyze(&a)?,
        Command::Simulate(a) => cmd_simulate(&a)?,
        Command::Map(a) => cmd_map(&a)?,
        Command::Fit(a) => cmd_fit(&a)?,
        Command::Sweep(a) => cmd_sweep(&a)?,
        Command::Compare(a) => cmd_compare(&a)?,
        Command::EnergyTable(a) => cmd_table(&a)?,
    };
    out.write_all(report.as_bytes())?;
    Ok(())
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_ANALYSIS } else { EXIT_OK };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn load_model_arg(path: Option<&PathBuf>) -> Result<EnergyModel> {
    let from_env = std::env::var_os(MODEL_ENV).map(PathBuf::from);
    match path.cloned().or(from_env) {
        Some(p) => load_model(&read(&p)?).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", p.display())),
            other => other,
        }),
        None => Ok(EnergyModel::fixture()),
    }
}

fn load_ann(path: Option<&PathBuf>) -> Result<Annotations> {
    match path {
        Some(p) => parse_annotations(&read(p)?, &display(p)),
        None => Ok(Annotations::new()),
    }
}

enum Program {
    Isa(IsaProgram),
    Ir(IrProgram),
}

fn load_program(path: &Path) -> Result<Program> {
    let text = read(path)?;
    let name = display(path);
    match ProgramKind::from_path(&name) {
        Some(ProgramKind::Isa) => Ok(Program::Isa(parse_isa(&text, &name)?)),
        Some(ProgramKind::Ir) => Ok(Program::Ir(parse_ir(&text, &name)?)),
        None => Err(Error::Argument(format!("`{name}`: expected a .isa or .mir file"))),
    }
}

fn lower_default(ir: &IrProgram) -> Result<IsaProgram> {
    Ok(lower(&prepare(ir)?, LowerOptions::default())?.isa)
}

fn to_isa(p: Program) -> Result<IsaProgram> {
    match p {
        Program::Isa(p) => Ok(p),
        Program::Ir(ir) => lower_default(&ir),
    }
}

/// Stable pretty JSON with a trailing newline.
fn render<T: Serialize>(v: &T) -> Result<String> {
    let value = serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn select_sense(mut v: Value, sense: SenseArg) -> Value {
    if let Value::Object(m) = &mut v {
        match sense {
            SenseArg::Upper => {
                m.remove("lower");
                m.remove("total_lower_nj");
            }
            SenseArg::Lower => {
                m.remove("upper");
                m.remove("total_upper_nj");
            }
            SenseArg::Both => {}
        }
    }
    v
}

fn nj(e: &Energy) -> String {
    format!("{} nJ", e.nj_string())
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<String> {
    let model = load_model_arg(a.common.model.as_ref())?;
    let ann = load_ann(a.common.ann.as_ref())?;
    let prog = load_program(&a.program)?;
    let level = a.level.unwrap_or(match prog {
        Program::Isa(_) => Level::Isa,
        Program::Ir(_) => Level::Ir,
    });
    if let (Program::Isa(_), Level::Ir) = (&prog, level) {
        return Err(Error::Argument("IR-level analysis needs a .mir program".into()));
    }
    if level == Level::Ir {
        let Program::Ir(ir) = prog else { unreachable!() };
        if a.pattern.is_some() {
            return Err(Error::Argument("--pattern needs ISA-level analysis".into()));
        }
        let n = a.threads.unwrap_or(1);
        let opts = IrAnalysisOptions {
            lower: LowerOptions::default(),
            mapping: MappingOptions { split_fused_cost: a.split_fused_cost },
        };
        let r = ir_level_ecsa(&ir, &ann, &model, n, opts)?;
        if a.dump_cfg {
            return dump_cfgs(&r.lowered.isa, &model, n);
        }
        if a.common.text {
            let mut s = format!("IR-level bounds of main at {n} thread(s)\n");
            if a.sense != SenseArg::Lower {
                s += &format!("  upper  {}  (ISA {}, gap {:.3}%)\n", nj(&r.upper.bound), nj(&r.isa.upper.bound), r.upper_gap_pct());
            }
            if a.sense != SenseArg::Upper {
                s += &format!("  lower  {}  (ISA {})\n", nj(&r.lower.bound), nj(&r.isa.lower.bound));
            }
            for w in &r.warnings {
                s += &format!("  warning: {w}\n");
            }
            return Ok(s);
        }
        let v = serde_json::to_value(r.to_json()).map_err(|e| Error::Io(e.to_string()))?;
        return render(&select_sense(v, a.sense));
    }

    let mut isa = to_isa(prog)?;
    match (a.pattern, a.threads) {
        (Some(PatternArg::Farm), n) => {
            isa.threads = Some(ThreadSpec::farm(n.unwrap_or(1), "main"));
        }
        (Some(PatternArg::Pipeline), n) => {
            let spec = isa
                .threads
                .as_ref()
                .filter(|t| t.pattern == ThreadPattern::Pipeline)
                .ok_or_else(|| Error::Argument("--pattern pipeline needs a `threads { pattern=pipeline ... }` line".into()))?;
            if let Some(n) = n.filter(|&n| n != spec.n_threads) {
                return Err(Error::Argument(format!("pipeline declares {} stages, --threads says {n}", spec.n_threads)));
            }
        }
        (None, Some(n)) if isa.threads.is_none() => {
            isa.threads = Some(ThreadSpec::farm(n, "main"));
        }
        (None, Some(n)) => {
            if isa.threads.as_ref().is_some_and(|t| t.n_threads != n) {
                return Err(Error::Argument(format!("program declares its threads; --threads {n} disagrees")));
            }
        }
        (None, None) => {}
    }
    if a.dump_cfg {
        let n = isa.threads.as_ref().map_or(1, |t| t.n_threads);
        return dump_cfgs(&isa, &model, n);
    }
    if isa.threads.is_some() {
        let agg = analyze_threads(&isa, &ann, &model)?;
        if a.common.text {
            let mut s = format!("{} of {} thread(s)\n", agg.pattern.name(), agg.n_threads);
            if a.sense != SenseArg::Lower {
                s += &format!("  upper  {}\n", nj(&agg.total_upper));
            }
            if a.sense != SenseArg::Upper {
                s += &format!("  lower  {}\n", nj(&agg.total_lower));
            }
            s += &format!("  time   {} ns (upper)\n", to_f64_sig(&(&agg.time_upper * Q::from_integer(1_000_000_000.into())), 6));
            return Ok(s);
        }
        let v = serde_json::to_value(agg.to_json()).map_err(|e| Error::Io(e.to_string()))?;
        return render(&select_sense(v, a.sense));
    }
    let r = analyze_isa(&isa, &ann, &model, "main", 1)?;
    if a.common.text {
        let mut s = "ISA-level bounds of main\n".to_string();
        if a.sense != SenseArg::Lower {
            s += &format!("  upper  {}  ({} slots)\n", nj(&r.upper.bound), r.upper_slots);
        }
        if a.sense != SenseArg::Upper {
            s += &format!("  lower  {}  ({} slots)\n", nj(&r.lower.bound), r.lower_slots);
        }
        for w in &r.warnings {
            s += &format!("  warning: {w}\n");
        }
        return Ok(s);
    }
    let v = serde_json::to_value(r.to_json()).map_err(|e| Error::Io(e.to_string()))?;
    render(&select_sense(v, a.sense))
}

fn dump_cfgs(isa: &IsaProgram, model: &EnergyModel, n: u32) -> Result<String> {
    Ok(characterized_program(isa, model, n)?.values().map(|c| c.dump()).collect())
}

fn load_inputs(path: Option<&PathBuf>) -> Result<SimInputs> {
    match path {
        Some(p) => SimInputs::parse(&read(p)?, &display(p)),
        None => Ok(SimInputs::default()),
    }
}

fn sim_text(r: &SimResult) -> String {
    let t = &r.totals;
    let mut s = format!(
        "energy {}\ncycles {}\ninstructions {}\nfnops {}\n",
        nj(&t.energy),
        t.cycles,
        t.instructions,
        t.fnops
    );
    for (b, st) in &t.per_block {
        s += &format!("  {b}: {} executions, {} fnops, {}\n", st.executions, st.fnops, nj(&st.energy));
    }
    s
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<String> {
    let model = load_model_arg(a.common.model.as_ref())?;
    let mut isa = to_isa(load_program(&a.program)?)?;
    if let Some(n) = a.threads {
        isa.threads = Some(ThreadSpec::farm(n, "main"));
    }
    let inputs = load_inputs(a.inputs.as_ref())?;
    let r = match &a.trace {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            let mut w = std::io::BufWriter::new(f);
            let r = run_traced(&isa, &inputs, &model, &mut w)?;
            w.flush()?;
            r
        }
        None => run(&isa, &inputs, &model)?,
    };
    if a.common.text {
        Ok(sim_text(&r))
    } else {
        render(&r.totals.to_json())
    }
}

pub fn cmd_map(a: &MapArgs) -> Result<String> {
    let model = load_model_arg(a.common.model.as_ref())?;
    let Program::Ir(ir) = load_program(&a.program)? else {
        return Err(Error::Argument("map needs a .mir program".into()));
    };
    let ir = prepare(&ir)?;
    let lowered = lower(&ir, LowerOptions::default())?;
    let cfgs = characterized_program(&lowered.isa, &model, a.threads)?;
    let opts = MappingOptions { split_fused_cost: a.split_fused_cost };
    let map = build_mapping(&ir, &lowered.isa, &cfgs, &model, a.threads, opts)?;
    map.check_partition()?;
    let mapped = map.total_energy();
    let isa_total = isa_body_energy(&lowered.isa, &cfgs, &model, a.threads)?;
    if mapped != isa_total {
        return Err(Error::Mapping(format!(
            "conservation violated: IR sum {} nJ, ISA total {} nJ",
            mapped.nj_string(),
            isa_total.nj_string()
        )));
    }
    if let Some(p) = &a.emit_isa {
        fs::write(p, lowered.isa.to_string()).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = &a.emit_map {
        fs::write(p, render(&map.to_json())?).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    let mut warnings = lowered.warnings.clone();
    warnings.extend(map.warnings.iter().cloned());
    if a.common.text {
        let mut s = format!(
            "conservation OK: {} over {} IR instructions\npartition OK: {} ISA instructions, {} FNOPs\n",
            nj(&mapped),
            map.entries.len(),
            map.isa_instruction_count,
            map.fnop_count
        );
        for w in &warnings {
            s += &format!("warning: {w}\n");
        }
        return Ok(s);
    }
    render(&json!({
        "conservation": "OK",
        "partition": "OK",
        "total_nj": mapped.nj_f64(),
        "total_exact_j": crate::num::exact_string(mapped.joules()),
        "ir_instructions": map.entries.len(),
        "isa_instructions": map.isa_instruction_count,
        "fnops": map.fnop_count,
        "divergent_blocks": map.divergent.iter().map(|(f, b)| format!("{f}:{b}")).collect::<Vec<_>>(),
        "warnings": warnings,
    }))
}

/// Reads `x,energy` rows. Values are decimal and read exactly.
pub fn read_points_csv(text: &str, file: &str) -> Result<Vec<(Q, Q)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(file, i + 1, 1, e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::parse(file, i + 1, 1, "expected `x,energy`"));
        }
        match (parse_decimal(&rec[0]), parse_decimal(&rec[1])) {
            (Some(x), Some(y)) => out.push((x, y)),
            _ if i == 0 => continue,
            _ => return Err(Error::parse(file, i + 1, 1, format!("bad number in `{},{}`", &rec[0], &rec[1]))),
        }
    }
    Ok(out)
}

pub fn cmd_fit(a: &FitArgs) -> Result<String> {
    let points = read_points_csv(&read(&a.points)?, &display(&a.points))?;
    let f = fit_polynomial(&points, a.degree)?;
    if a.text {
        Ok(format!("{}\nR^2 = {}\n", f.equation(), crate::num::format_sig(&f.r2, 6)))
    } else {
        render(&f.to_json())
    }
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<String> {
    let model = load_model_arg(a.common.model.as_ref())?;
    let name = display(&a.program);
    let kind = ProgramKind::from_path(&name).ok_or_else(|| Error::Argument(format!("`{name}`: expected a .isa or .mir file")))?;
    let ann = match &a.common.ann {
        Some(p) => read(p)?,
        None => String::new(),
    };
    if a.from > a.to {
        return Err(Error::Argument(format!("empty range {}..{}", a.from, a.to)));
    }
    let xs: Vec<i64> = (a.from..=a.to).collect();
    let points = parametric_sweep(&read(&a.program)?, kind, &ann, &xs, &model)?;
    let fit = a.degree.map(|d| fit_polynomial(&upper_points(&points), d)).transpose()?;
    if a.common.text {
        let mut s = String::from("x\tupper_nj\tlower_nj\n");
        for p in &points {
            s += &format!("{}\t{}\t{}\n", p.x, p.upper.nj_string(), p.lower.nj_string());
        }
        if let Some(f) = &fit {
            s += &format!("{}  (R^2 = {})\n", f.equation(), crate::num::format_sig(&f.r2, 6));
        }
        return Ok(s);
    }
    render(&json!({
        "points": points.iter().map(|p| p.to_json()).collect::<Vec<_>>(),
        "fit": fit.map(|f| f.to_json()),
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub input: String,
    pub trace_nj: f64,
    pub lower_nj: f64,
    pub upper_nj: f64,
    /// How far the upper bound exceeds the trace, in percent of the trace.
    pub over_pct: f64,
    pub within: bool,
}

pub fn cmd_compare(a: &CompareArgs) -> Result<String> {
    let model = load_model_arg(a.common.model.as_ref())?;
    let ann = load_ann(a.common.ann.as_ref())?;
    let isa = to_isa(load_program(&a.program)?)?;
    let (upper, lower) = if isa.threads.is_some() {
        let agg = analyze_threads(&isa, &ann, &model)?;
        (agg.total_upper, agg.total_lower)
    } else {
        let r = analyze_isa(&isa, &ann, &model, "main", 1)?;
        (r.upper.bound, r.lower.bound)
    };
    let mut files: Vec<PathBuf> = fs::read_dir(&a.inputs)
        .map_err(|e| Error::Io(format!("{}: {e}", a.inputs.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "in"))
        .collect();
    files.sort();
    let sims = collect_results(par_map(&files, |p| -> Result<(String, Energy)> {
        let inputs = load_inputs(Some(p))?;
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Ok((name, run(&isa, &inputs, &model)?.totals.energy))
    }))?;
    let rows: Vec<CompareRow> = sims
        .into_iter()
        .map(|(input, e)| {
            let over = if e.is_zero() {
                Q::from_integer(0.into())
            } else {
                (upper.joules() - e.joules()) / e.joules() * Q::from_integer(100.into())
            };
            CompareRow {
                input,
                trace_nj: e.nj_f64(),
                lower_nj: lower.nj_f64(),
                upper_nj: upper.nj_f64(),
                over_pct: to_f64_sig(&over, 4),
                within: &lower <= &e && &e <= &upper,
            }
        })
        .collect();
    if a.common.text {
        let mut s = String::from("input\ttrace_nj\tlower_nj\tupper_nj\tover_pct\twithin\n");
        for r in &rows {
            s += &format!("{}\t{}\t{}\t{}\t{}\t{}\n", r.input, r.trace_nj, r.lower_nj, r.upper_nj, r.over_pct, r.within);
        }
        return Ok(s);
    }
    let all = rows.iter().all(|r| r.within);
    render(&json!({ "rows": rows, "all_within": all }))
}

pub fn cmd_table(a: &TableArgs) -> Result<String> {
    let model = load_model_arg(a.common.model.as_ref())?;
    let ann = load_ann(a.common.ann.as_ref())?;
    let mut isa = to_isa(load_program(&a.program)?)?;
    isa.threads = None;
    let rows = energy_time_table(&isa, &ann, &model, &a.entry, &a.threads, a.tasks)?;
    if a.common.text {
        let mut s = String::from("threads\ttasks/thread\tenergy_nj\ttime_ns\n");
        for r in &rows {
            s += &format!("{}\t{}\t{}\t{}\n", r.n_threads, r.tasks_per_thread, r.energy_nj, r.time_ns);
        }
        return Ok(s);
    }
    let by_n: BTreeMap<String, &crate::multithread::TableRow> = rows.iter().map(|r| (r.n_threads.to_string(), r)).collect();
    render(&json!({ "tasks": a.tasks, "rows": rows, "by_threads": by_n }))
}
