use wattbound::energy_model::EnergyModel;
use wattbound::gen::{random_program, GenConfig};
use wattbound::ir::{interpret, lower, prepare, LowerOptions};
use wattbound::sim::{run, SimInputs};

fn check(seed: u64, opts: LowerOptions) {
    let g = random_program(seed, &GenConfig::default());
    let ir = prepare(&g.program).unwrap();
    let want = interpret(&ir, &g.inputs, 1_000_000).unwrap();
    let lowered = lower(&ir, opts).unwrap();
    let inputs = SimInputs {
        mem: g.inputs.clone(),
        ..SimInputs::default()
    };
    let got = run(&lowered.isa, &inputs, &EnergyModel::fixture()).unwrap();
    let n = ir.mem_words as usize;
    assert_eq!(&got.memories[0][..n], &want.memory[..], "seed {seed}\n{}", g.text);
    if let Some(r) = want.ret {
        assert_eq!(got.registers[0][0], r, "seed {seed}\n{}", g.text);
    }
}

#[test]
fn lowered_code_computes_what_the_ir_computes() {
    for seed in 0..300 {
        check(seed, LowerOptions::default());
    }
}

#[test]
fn unfused_lowering_agrees_too() {
    let opts = LowerOptions {
        fuse_macc: false,
        fuse_eq_branch: false,
    };
    for seed in 0..100 {
        check(seed, opts);
    }
}

#[test]
fn every_emitted_instruction_has_a_location() {
    for seed in 0..50 {
        let g = random_program(seed, &GenConfig::default());
        let ir = prepare(&g.program).unwrap();
        let l = lower(&ir, LowerOptions::default()).unwrap();
        let ids = ir.ids();
        for f in &l.isa.functions {
            for i in &f.instrs {
                assert!(ids.contains(&i.loc.unwrap()));
            }
        }
    }
}
