use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixmemb::eval::munkres;
use mixmemb::spectral::top_k_eigs_with;
use mixmemb::EigOptions;
use mixmemb_bench::{cost_matrix, instance};

fn bench_eigs(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_k_eigs");
    for n in [1000, 4000] {
        let (_, a) = instance(n, 3, 100.0, 2);
        for (label, opts) in [("default", EigOptions::default()), ("lanczos", EigOptions::iterative())] {
            group.bench_with_input(BenchmarkId::new(label, n), &a, |b, a| {
                b.iter(|| top_k_eigs_with(a.as_sparse(), 3, &opts))
            });
        }
    }
    group.finish();
}

fn bench_munkres(c: &mut Criterion) {
    let mut group = c.benchmark_group("munkres");
    for k in [3, 10, 50] {
        let cost = cost_matrix(k, 3);
        group.bench_with_input(BenchmarkId::from_parameter(k), &cost, |b, cost| b.iter(|| munkres(cost)));
    }
    group.finish();
}

criterion_group!(benches, bench_eigs, bench_munkres);
criterion_main!(benches);
