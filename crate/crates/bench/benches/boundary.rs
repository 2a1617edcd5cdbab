use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use logdist_bench::intro_boundary;
use logdist_core::boundary::Validity;
use logdist_core::synth::{intro_spec, intro_traces};

fn refine(c: &mut Criterion) {
    let spec = intro_spec();
    let t = &intro_traces()[0];
    let v = Validity::new(&spec, t);
    let mut g = c.benchmark_group("refine");
    for depth in [2, 4, 6] {
        let b = intro_boundary(0, depth);
        g.bench_with_input(BenchmarkId::from_parameter(b.rects.len()), &b, |bench, b| {
            bench.iter(|| b.refine(&v))
        });
    }
    g.finish();
}

criterion_group!(benches, refine);
criterion_main!(benches);
