#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use wattbound::analysis::{analyze_isa, Analysis};
use wattbound::annotations::{parse_annotations, Annotations};
use wattbound::energy_model::{load_model, EnergyModel};
use wattbound::ir::{lower, parse_ir, prepare, IrProgram, LowerOptions};
use wattbound::isa::{parse_isa, IsaProgram};
use wattbound::multithread::analyze_threads;
use wattbound::num::Energy;
use wattbound::sim::SimInputs;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn model() -> EnergyModel {
    load_model(&fs::read_to_string(fixture_dir().join("default.em")).unwrap()).unwrap()
}

pub struct Fixture {
    pub name: String,
    pub path: PathBuf,
    pub text: String,
    /// Present for `.mir` fixtures.
    pub ir: Option<IrProgram>,
    /// The program itself, or the lowering of the IR program.
    pub isa: IsaProgram,
    pub ann: Annotations,
    pub inputs: Vec<(String, SimInputs)>,
}

impl Fixture {
    pub fn is_threaded(&self) -> bool {
        self.isa.threads.is_some()
    }

    /// Whole-program bounds: the aggregate for threaded programs, `main` otherwise.
    pub fn bounds(&self, m: &EnergyModel) -> (Energy, Energy) {
        if self.is_threaded() {
            let a = analyze_threads(&self.isa, &self.ann, m).unwrap();
            (a.total_lower, a.total_upper)
        } else {
            let a = self.analysis(m, 1);
            (a.lower.bound, a.upper.bound)
        }
    }

    pub fn analysis(&self, m: &EnergyModel, n: u32) -> Analysis {
        analyze_isa(&self.isa, &self.ann, m, "main", n).unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }
}

/// Fixtures that must analyse cleanly: every `.isa` and `.mir` file except
/// the deliberately unbalanced pipeline.
pub fn corpus() -> Vec<Fixture> {
    let mut names: Vec<PathBuf> = fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "isa" || x == "mir"))
        .filter(|p| !p.file_stem().unwrap().to_string_lossy().contains("unbalanced"))
        .collect();
    names.sort();
    names.iter().map(|p| load(p)).collect()
}

pub fn by_name(name: &str) -> Fixture {
    let dir = fixture_dir();
    for ext in ["mir", "isa"] {
        let p = dir.join(format!("{name}.{ext}"));
        if p.exists() {
            return load(&p);
        }
    }
    panic!("no fixture {name}");
}

pub fn load(path: &Path) -> Fixture {
    let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
    let text = fs::read_to_string(path).unwrap();
    let file = path.file_name().unwrap().to_string_lossy().into_owned();
    let (ir, isa) = if path.extension().unwrap() == "mir" {
        let ir = parse_ir(&text, &file).unwrap();
        let isa = lower(&prepare(&ir).unwrap(), LowerOptions::default()).unwrap().isa;
        (Some(ir), isa)
    } else {
        (None, parse_isa(&text, &file).unwrap())
    };
    let dir = path.parent().unwrap();
    let ann_path = dir.join(format!("{stem}.ann"));
    let ann = if ann_path.exists() {
        parse_annotations(&fs::read_to_string(&ann_path).unwrap(), &ann_path.to_string_lossy()).unwrap()
    } else {
        Annotations::new()
    };
    let mut inputs: Vec<(String, SimInputs)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|f| {
            f.ends_with(".in")
                && (f == &format!("{stem}.in")
                    || f.strip_prefix(&format!("{stem}.")).is_some_and(|r| r.trim_end_matches(".in").parse::<u32>().is_ok()))
        })
        .map(|f| {
            let inp = SimInputs::parse(&fs::read_to_string(dir.join(&f)).unwrap(), &f).unwrap();
            (f, inp)
        })
        .collect();
    inputs.sort_by(|a, b| a.0.cmp(&b.0));
    if inputs.is_empty() {
        inputs.push(("(no presets)".into(), SimInputs::default()));
    }
    Fixture {
        name: stem,
        path: path.to_path_buf(),
        text,
        ir,
        isa,
        ann,
        inputs,
    }
}
