use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use wattbound::energy_model::EnergyModel;
use wattbound::exec::{par_map, seq_map};
use wattbound::gen::{random_program, GenConfig, Generated};
use wattbound::mapping::ir_level_ecsa;

fn analyze(g: &Generated, m: &EnergyModel) -> bool {
    ir_level_ecsa(&g.program, &g.annotations, m, 1, Default::default()).is_ok()
}

fn bench(c: &mut Criterion) {
    let m = EnergyModel::fixture();
    let programs: Vec<Generated> = (0..16).map(|s| random_program(s, &GenConfig::default())).collect();
    let mut group = c.benchmark_group("ir_analysis_16_programs");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| black_box(seq_map(&programs, |g| analyze(g, &m)))));
    group.bench_function("parallel", |b| b.iter(|| black_box(par_map(&programs, |g| analyze(g, &m)))));
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
