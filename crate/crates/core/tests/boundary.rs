mod common;

use common::{arb_step_trace, grid_boundary, slowdown_holds};
use logdist_core::boundary::{BoundaryApprox, BoundaryCache, Rectangle, Validity, DEFAULT_ETA};
use logdist_core::synth::intro_spec;
use logdist_core::trace::Trace;
use proptest::prelude::*;

const GRID: usize = 64;

fn approx(trace: &Trace, depth: usize) -> BoundaryApprox {
    let spec = intro_spec();
    BoundaryApprox::to_depth(&Validity::new(&spec, trace), &spec.spec_id(), trace.id(), depth, DEFAULT_ETA)
}

fn union_distance(rects: &[Rectangle], p: &[f64]) -> f64 {
    rects.iter().map(|r| r.distance_to(p)).fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(common::config(32))]

    #[test]
    fn rectangles_are_mixed(trace in arb_step_trace(), depth in 1usize..=6) {
        let b = approx(&trace, depth);
        for r in &b.rects {
            prop_assert!(!slowdown_holds(&trace, r.bot()[0], r.bot()[1]), "{r:?} bottom holds");
            prop_assert!(slowdown_holds(&trace, r.top()[0], r.top()[1]), "{r:?} top fails");
        }
    }

    #[test]
    fn rectangles_cover_grid_boundary(trace in arb_step_trace(), depth in 2usize..=6) {
        let b = approx(&trace, depth);
        let slack = 1.0 / (GRID - 1) as f64 + DEFAULT_ETA + 1e-12;
        for p in grid_boundary(&trace, GRID) {
            let d = union_distance(&b.rects, &p);
            prop_assert!(d <= slack, "grid boundary point {p:?} is {d} from every rectangle");
        }
    }

    #[test]
    fn max_edge_halves(trace in arb_step_trace()) {
        let spec = intro_spec();
        let v = Validity::new(&spec, &trace);
        let mut b = BoundaryApprox::initial(&v, &spec.spec_id(), trace.id(), DEFAULT_ETA);
        for _ in 0..7 {
            let next = b.refine(&v);
            prop_assert!(next.max_edge() <= 0.5 * b.max_edge());
            prop_assert_eq!(next.depth, b.depth + 1);
            prop_assert!((next.eps - (2.0 * next.max_edge() + 2.0 * DEFAULT_ETA)).abs() < 1e-15);
            b = next;
        }
    }

    #[test]
    fn cache_matches_direct_refinement(trace in arb_step_trace(), depth in 0usize..=5) {
        let spec = intro_spec();
        let cache = BoundaryCache::new(&spec, DEFAULT_ETA);
        let shallow = cache.get(&spec, &trace, depth / 2);
        prop_assert_eq!(shallow.depth, depth / 2);
        prop_assert_eq!(&*cache.get(&spec, &trace, depth), &approx(&trace, depth));
    }
}

/// A constant trace at level `c` holds for `h > c`, and everywhere on `tau = 1`,
/// so its boundary is the segment `h = c` joined to `tau = 1, h <= c`.
#[test]
fn constant_trace_at_depth_eight() {
    let c = 0.37;
    let samples: Vec<(f64, f64)> = (0..=20).map(|k| (f64::from(k) / 20.0, c)).collect();
    let trace = Trace::new("c", &samples).unwrap();
    let b = approx(&trace, 8);
    assert!(b.degenerate.is_none());
    assert!(b.max_edge() <= 1.0 / 256.0 + 1e-12);

    let on_boundary = |p: &[f64]| {
        let horizontal = (p[1] - c).abs();
        let vertical = (p[0] - 1.0).abs().max((p[1] - c).max(0.0));
        horizontal.min(vertical)
    };
    for r in &b.rects {
        let centre = r.center();
        assert!(on_boundary(&centre) <= r.max_edge(), "{r:?} is off the boundary");
    }
    for k in 0..=1000 {
        let s = f64::from(k) / 1000.0;
        for p in [[s, c], [1.0, s * c]] {
            let d = union_distance(&b.rects, &p);
            assert!(d <= b.eps, "boundary point {p:?} is {d} from every rectangle");
        }
    }
}
