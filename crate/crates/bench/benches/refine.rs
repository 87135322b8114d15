use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kolmo_bench::fixture;
use kolmo_core::refine;

fn refine_levels(c: &mut Criterion) {
    let mut group = c.benchmark_group("refine");
    group.sample_size(10);
    for level in [2usize, 4, 6, 8] {
        let state = fixture(level);
        group.bench_with_input(BenchmarkId::from_parameter(level), &state, |b, s| b.iter(|| refine(s).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, refine_levels);
criterion_main!(benches);
