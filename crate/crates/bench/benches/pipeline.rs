use cdrum_bench::mixture;
use cdrum_core::{
    check_cdrum, mobius_inverse, recover_representation, test_cdrum_facet, test_cdrum_vertex, TestOptions,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn mobius(c: &mut Criterion) {
    let exact = mixture(3, 2, 1);
    let float = exact.convert::<f64>();
    c.bench_function("mobius_inverse n=3 T=2 rational", |b| b.iter(|| mobius_inverse(&exact).unwrap()));
    c.bench_function("mobius_inverse n=3 T=2 float", |b| b.iter(|| mobius_inverse(&float).unwrap()));
    let deep = mixture(3, 3, 1).convert::<f64>();
    c.bench_function("mobius_inverse n=3 T=3 float", |b| b.iter(|| mobius_inverse(&deep).unwrap()));
}

fn axioms_and_recovery(c: &mut Criterion) {
    let exact = mixture(3, 2, 2);
    c.bench_function("check_cdrum n=3 rational", |b| b.iter(|| check_cdrum(&exact, 0.0).unwrap()));
    c.bench_function("recover n=3 rational", |b| b.iter(|| recover_representation(&exact, 0.0).unwrap()));
}

fn tests(c: &mut Criterion) {
    let float = mixture(3, 2, 3).convert::<f64>();
    let options = TestOptions::default();
    let mut group = c.benchmark_group("lp tests n=3");
    group.sample_size(10);
    group.bench_function("vertex", |b| b.iter(|| test_cdrum_vertex(&float, &options).unwrap()));
    group.bench_function("facet", |b| b.iter(|| test_cdrum_facet(&float, &options).unwrap()));
    group.finish();
}

criterion_group!(benches, mobius, axioms_and_recovery, tests);
criterion_main!(benches);
