use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sphx_bench::{engine, unit_vectors};
use sphx_core::{Cutoff, TransformKind};

fn search(c: &mut Criterion) {
    let d = 64;
    let m = 1 << 14;
    let queries = unit_vectors(32, d, 99);
    let mut group = c.benchmark_group("search");
    for n in [1_000usize, 10_000] {
        let e = engine(n, d, m, 0.45, TransformKind::Structured);
        let codes: Vec<_> = queries.iter().map(|(_, q)| e.encode_query(q).unwrap()).collect();
        for (name, cutoff) in [
            ("top10", Cutoff::TopK { k: 10 }),
            ("lambda0.8", Cutoff::ThresholdLambda { lambda: 0.8 }),
        ] {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                let mut i = 0;
                b.iter(|| {
                    i = (i + 1) % codes.len();
                    e.search_code(&codes[i], cutoff).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
