mod common;

use common::{arb_step_trace, slowdown_holds};
use logdist_core::boundary::Rectangle;
use logdist_core::learn::Labeling;
use logdist_core::project::{
    angle_sweep, box_separation, dimred, extract_label_spec, optimize_projection, project_all,
    project_boundary, LineProjection,
};
use logdist_core::synth::intro_spec;
use logdist_core::trace::Trace;
use proptest::prelude::*;

const TOL: f64 = 1e-4;

struct Direct<'a>(&'a Trace);

impl logdist_core::boundary::Membership for Direct<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn contains(&self, theta: &[f64]) -> bool {
        slowdown_holds(self.0, theta[0], theta[1])
    }
}

fn arb_line() -> impl Strategy<Value = LineProjection> {
    (0.0f64..=std::f64::consts::FRAC_PI_2).prop_map(|a| LineProjection::from_angle(a).unwrap())
}

fn arb_box() -> impl Strategy<Value = Rectangle> {
    (0.0f64..0.9, 0.0f64..0.9, 0.001f64..0.1, 0.001f64..0.1)
        .prop_map(|(x, y, w, h)| Rectangle::new(vec![x, y], vec![x + w, y + h]))
}

proptest! {
    #![proptest_config(common::config(128))]

    /// The crossing is bracketed: just below it fails, just above it holds.
    #[test]
    fn crossing_is_bracketed(trace in arb_step_trace(), line in arb_line()) {
        let spec = intro_spec();
        let v = logdist_core::boundary::Validity::new(&spec, &trace);
        let direct = Direct(&trace);
        match project_boundary(&v, &line, TOL) {
            Some(c) => {
                let below = line.at((c.t - TOL).max(0.0));
                let above = line.at((c.t + TOL).min(1.0));
                prop_assert!(!slowdown_holds(&trace, below[0], below[1]));
                prop_assert!(slowdown_holds(&trace, above[0], above[1]));
                prop_assert_eq!(Some(c), project_boundary(&direct, &line, TOL));
            }
            None => {
                let (a, b) = (line.at(0.0), line.at(1.0));
                prop_assert!(slowdown_holds(&trace, a[0], a[1]) || !slowdown_holds(&trace, b[0], b[1]));
            }
        }
    }

    /// A label specification holds exactly when the box is mixed for the trace.
    #[test]
    fn label_spec_holds_iff_boundary_crosses(trace in arb_step_trace(), rect in arb_box()) {
        let spec = intro_spec();
        let crosses = !slowdown_holds(&trace, rect.bot()[0], rect.bot()[1])
            && slowdown_holds(&trace, rect.top()[0], rect.top()[1]);
        prop_assert_eq!(extract_label_spec(&rect).evaluate(&spec, &trace), crosses);
    }

    /// Traces whose crossing on a line falls inside their label's box satisfy that label's spec.
    #[test]
    fn projected_labels_satisfy_their_specs(traces in prop::collection::vec(arb_step_trace(), 4..10)) {
        let spec = intro_spec();
        let traces: Vec<Trace> = traces.iter().enumerate().map(|(i, t)| t.with_id(format!("t{i}"))).collect();
        let raw: Vec<usize> = (0..traces.len()).map(|i| i % 2).collect();
        let labels = Labeling::new(traces.iter().map(|t| t.id().to_string()).collect(), &raw);
        let candidates = angle_sweep(2, 12);
        let Ok(choice) = optimize_projection(&spec, &traces, &labels, &candidates, TOL, None) else {
            return Ok(());
        };
        for (t, &l) in traces.iter().zip(labels.labels()) {
            let b = choice.boxes.iter().find(|b| b.label == l).unwrap();
            if let Some(c) = project_boundary(&logdist_core::boundary::Validity::new(&spec, t), &choice.line, TOL) {
                prop_assert!(b.rect.contains(&c.point));
                // widen by the bisection tolerance before asking the spec
                let widened = Rectangle::new(
                    b.rect.bot().iter().map(|x| (x - TOL).max(0.0)).collect(),
                    b.rect.top().iter().map(|x| (x + TOL).min(1.0)).collect(),
                );
                prop_assert!(extract_label_spec(&widened).evaluate(&spec, t));
            }
        }
    }

    /// The chosen line scores at least as well as every other candidate.
    #[test]
    fn sweep_picks_the_best_candidate(traces in prop::collection::vec(arb_step_trace(), 4..8)) {
        let spec = intro_spec();
        let traces: Vec<Trace> = traces.iter().enumerate().map(|(i, t)| t.with_id(format!("t{i}"))).collect();
        let raw: Vec<usize> = (0..traces.len()).map(|i| usize::from(i >= traces.len() / 2)).collect();
        let labels = Labeling::new(traces.iter().map(|t| t.id().to_string()).collect(), &raw);
        let candidates = angle_sweep(2, 10);
        let Ok(choice) = optimize_projection(&spec, &traces, &labels, &candidates, TOL, None) else {
            return Ok(());
        };
        let projected = project_all(&spec, &traces, &candidates, TOL);
        for (line, ts) in candidates.iter().zip(&projected) {
            let mut boxes: [Option<Rectangle>; 2] = [None, None];
            for (t, &l) in ts.iter().zip(labels.labels()) {
                if let Some(t) = t {
                    let p = line.at(*t);
                    boxes[l] = Some(match boxes[l].take() {
                        None => Rectangle::point(p),
                        Some(r) => Rectangle::new(
                            r.bot().iter().zip(&p).map(|(a, b)| a.min(*b)).collect(),
                            r.top().iter().zip(&p).map(|(a, b)| a.max(*b)).collect(),
                        ),
                    });
                }
            }
            if let [Some(a), Some(b)] = &boxes {
                prop_assert!(box_separation(a, b) <= choice.score + 1e-15);
            }
        }
    }

    #[test]
    fn histogram_counts_present_traces(traces in prop::collection::vec(arb_step_trace(), 1..20), bins in 1usize..30) {
        let d = dimred(&intro_spec(), &traces, &LineProjection::diagonal(2), TOL, bins);
        let counted: usize = d.histogram.iter().map(|h| h.2).sum();
        prop_assert_eq!(counted + d.absent, traces.len());
        prop_assert_eq!(d.histogram.len(), bins);
    }
}
