use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nudge_bench::encoded;
use nudge_core::{Forest, ForestParams};

fn fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("forest_fit");
    group.sample_size(20);
    for rows in [32u32, 320, 3000] {
        let matrix = encoded(10, rows / 10);
        group.bench_with_input(BenchmarkId::from_parameter(rows), &matrix, |b, m| {
            b.iter(|| Forest::fit(black_box(m), &ForestParams::default()).unwrap())
        });
    }
    group.finish();
}

fn predict(c: &mut Criterion) {
    let train = encoded(10, 30);
    let test = encoded(10, 40);
    let forest = Forest::fit(&train, &ForestParams::default()).unwrap();
    c.bench_function("forest_predict_400", |b| {
        b.iter(|| forest.predict_matrix(black_box(&test)).unwrap())
    });
}

criterion_group!(benches, fit, predict);
criterion_main!(benches);
