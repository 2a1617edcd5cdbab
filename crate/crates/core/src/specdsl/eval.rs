use super::{Bound, Formula, ParametricSpec};
use crate::trace::Trace;

impl ParametricSpec {
    /// Boolean semantics at a point of the normalized unit box.
    ///
    /// The formula is evaluated at the trace's first sample. `G[a,b] f` at time
    /// `t` requires `f` at every sample with time in `(t + a, t + b]`; `F[a,b] f`
    /// requires one. An empty window makes `G` true and `F` false. Atoms read
    /// the step-interpolated value at the current time.
    pub fn evaluate(&self, trace: &Trace, theta: &[f64]) -> bool {
        let raw = self.to_raw(theta);
        holds(&self.formula, trace, 0, &raw)
    }
}

impl Formula {
    /// Evaluates a formula whose parameters take the given raw values.
    pub fn holds(&self, trace: &Trace, raw: &[f64]) -> bool {
        holds(self, trace, 0, raw)
    }
}

fn resolve(b: &Bound, raw: &[f64]) -> f64 {
    match *b {
        Bound::Const(v) => v,
        Bound::Param(i) => raw[i],
    }
}

// `at` is a sample index; every time reached by the quantifiers is a sample time.
fn holds(f: &Formula, trace: &Trace, at: usize, raw: &[f64]) -> bool {
    match f {
        Formula::Globally { lo, hi, child } => {
            let t = trace.times()[at];
            trace
                .window(t + resolve(lo, raw), t + resolve(hi, raw))
                .all(|i| holds(child, trace, i, raw))
        }
        Formula::Eventually { lo, hi, child } => {
            let t = trace.times()[at];
            trace
                .window(t + resolve(lo, raw), t + resolve(hi, raw))
                .any(|i| holds(child, trace, i, raw))
        }
        Formula::And(cs) => cs.iter().all(|c| holds(c, trace, at, raw)),
        Formula::Or(cs) => cs.iter().any(|c| holds(c, trace, at, raw)),
        Formula::Not(c) => !holds(c, trace, at, raw),
        Formula::Less(b) => trace.values()[at] < resolve(b, raw),
        Formula::Greater(b) => trace.values()[at] > resolve(b, raw),
    }
}
