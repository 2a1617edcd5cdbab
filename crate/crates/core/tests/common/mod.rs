#![allow(dead_code)]

use logdist_core::trace::Trace;
use proptest::prelude::*;

/// Piecewise-constant trace on `[0, 1]` with levels in `[0.05, 0.95]`.
pub fn step_trace(id: &str, n: usize, cuts: &[usize], levels: &[f64]) -> Trace {
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let piece = cuts.iter().filter(|&&c| c <= k).count().min(levels.len() - 1);
            (k as f64 / (n - 1) as f64, levels[piece])
        })
        .collect();
    Trace::new(id, &samples).unwrap()
}

pub fn arb_step_trace() -> impl Strategy<Value = Trace> {
    (5usize..=30, prop::collection::vec(0.05f64..0.95, 1..=5)).prop_flat_map(|(n, levels)| {
        let pieces = levels.len();
        prop::collection::vec(1..n, pieces - 1).prop_map(move |mut cuts| {
            cuts.sort_unstable();
            step_trace("p", n, &cuts, &levels)
        })
    })
}

/// `G[tau, 1] (x < h)` at `(tau, h)`, straight from the samples: windows are
/// left-open, so only samples strictly after `tau` count.
pub fn slowdown_holds(trace: &Trace, tau: f64, h: f64) -> bool {
    trace
        .samples()
        .filter(|(t, _)| *t > tau && *t <= 1.0)
        .all(|(_, v)| v < h)
}

/// Points of a `size x size` grid that hold and have a violating neighbour
/// below or to the left.
pub fn grid_boundary(trace: &Trace, size: usize) -> Vec<[f64; 2]> {
    let step = 1.0 / (size - 1) as f64;
    let v: Vec<Vec<bool>> = (0..size)
        .map(|i| (0..size).map(|j| slowdown_holds(trace, i as f64 * step, j as f64 * step)).collect())
        .collect();
    let mut out = Vec::new();
    for i in 0..size {
        for j in 0..size {
            if v[i][j] && ((i > 0 && !v[i - 1][j]) || (j > 0 && !v[i][j - 1])) {
                out.push([i as f64 * step, j as f64 * step]);
            }
        }
    }
    out
}

pub fn hausdorff_2d(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let directed = |p: &[[f64; 2]], q: &[[f64; 2]]| {
        p.iter()
            .map(|x| {
                q.iter()
                    .map(|y| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Fixed case count and seed, so every run draws the same cases; failures
/// are reported, not persisted.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    }
}
