//! Shared fixtures for the benchmarks.

use logdist_core::boundary::{BoundaryApprox, Validity, DEFAULT_ETA};
use logdist_core::distance::{discretize, PointCloud};
use logdist_core::synth::{intro_spec, intro_traces};
use logdist_core::trace::Trace;

/// Intro trace `i` refined to `depth`.
pub fn intro_boundary(i: usize, depth: usize) -> BoundaryApprox {
    let spec = intro_spec();
    let t = &intro_traces()[i];
    BoundaryApprox::to_depth(&Validity::new(&spec, t), &spec.spec_id(), t.id(), depth, DEFAULT_ETA)
}

/// Corner cloud of intro trace `i` at `depth`.
pub fn intro_cloud(i: usize, depth: usize) -> PointCloud {
    discretize(&intro_boundary(i, depth).rects).expect("intro boundaries are nonempty")
}

pub fn intro_pair() -> (Trace, Trace) {
    let mut ts = intro_traces();
    let b = ts.swap_remove(1);
    (ts.swap_remove(0), b)
}
