use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use logdist_bench::{intro_cloud, intro_pair};
use logdist_core::distance::{approx_dist, hausdorff_inf, hausdorff_inf_pruned, DistanceOptions};
use logdist_core::synth::intro_spec;

fn hausdorff(c: &mut Criterion) {
    let mut g = c.benchmark_group("hausdorff");
    g.sample_size(10);
    for depth in [5, 7] {
        let (a, b) = (intro_cloud(0, depth), intro_cloud(1, depth));
        g.bench_with_input(BenchmarkId::new("brute", a.len()), &(&a, &b), |bench, (a, b)| {
            bench.iter(|| hausdorff_inf(a, b))
        });
        g.bench_with_input(BenchmarkId::new("pruned", a.len()), &(&a, &b), |bench, (a, b)| {
            bench.iter(|| hausdorff_inf_pruned(a, b))
        });
    }
    g.finish();
}

fn distance(c: &mut Criterion) {
    let spec = intro_spec();
    let (x, y) = intro_pair();
    let mut g = c.benchmark_group("approx_dist");
    g.sample_size(10);
    for delta in [0.05, 0.02, 0.01] {
        let opts = DistanceOptions {
            delta,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(delta), &opts, |bench, opts| {
            bench.iter(|| approx_dist(&spec, &x, &y, opts))
        });
    }
    g.finish();
}

criterion_group!(benches, hausdorff, distance);
criterion_main!(benches);
