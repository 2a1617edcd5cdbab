//! Synthetic traces: the six traffic examples and a seeded highway generator.

use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::specdsl::ParametricSpec;
use crate::trace::Trace;

const INTRO_STEP: f64 = 0.02;

fn sampled(id: &str, n: usize, step: f64, f: impl Fn(usize, f64) -> f64) -> Trace {
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let t = k as f64 * step;
            (t, f(k, t))
        })
        .collect();
    Trace::new(id, &samples).expect("generated samples are valid")
}

fn stop_and_go(k: usize, phase: usize) -> f64 {
    if (k + phase) % 4 < 2 {
        0.2
    } else {
        0.05
    }
}

/// Six speed profiles on `[0, 1]`, ids `"0"`..`"5"`:
/// 0 and 1 drop from freeway speed into stop-and-go traffic around `t = 0.5`,
/// 2 leaves stop-and-go traffic, 3 slows to a stop and accelerates again,
/// 4 never meets traffic, and 5 crawls throughout.
pub fn intro_traces() -> Vec<Trace> {
    let n = (1.0 / INTRO_STEP).round() as usize + 1;
    vec![
        sampled("0", n, INTRO_STEP, |k, t| {
            if t <= 0.5 + 1e-9 {
                0.9
            } else {
                stop_and_go(k, 0)
            }
        }),
        sampled("1", n, INTRO_STEP, |k, t| {
            if t <= 0.52 + 1e-9 {
                0.85
            } else {
                0.9 * stop_and_go(k, 1)
            }
        }),
        sampled("2", n, INTRO_STEP, |k, t| {
            if t < 0.5 {
                stop_and_go(k, 0)
            } else {
                0.9
            }
        }),
        sampled("3", n, INTRO_STEP, |_, t| {
            if t <= 0.4 {
                0.7 * (1.0 - t / 0.4)
            } else if t <= 0.5 {
                0.0
            } else if t <= 0.8 {
                0.9 * (t - 0.5) / 0.3
            } else {
                0.9
            }
        }),
        sampled("4", n, INTRO_STEP, |k, _| if k % 3 == 0 { 0.88 } else { 0.9 }),
        sampled("5", n, INTRO_STEP, |k, _| if k % 2 == 0 { 0.15 } else { 0.12 }),
    ]
}

/// `G[tau, 1] (x < h)` over the unit square, matching [`intro_traces`].
pub fn intro_spec() -> ParametricSpec {
    ParametricSpec::slowdown(1.0, 0.0, 1.0)
}

/// Ground-truth classes of the highway generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseClass {
    SlowDown,
    SpeedUp,
    FreeFlow,
    Jam,
    /// Steady moderate-speed congestion.
    Creep,
    /// Above the 70 mph scale; misses the steep projection line.
    Speeder,
    /// Slows down too late to count as a slow-down.
    LateSlowDown,
}

impl CaseClass {
    pub const ALL: [CaseClass; 7] = [
        CaseClass::SlowDown,
        CaseClass::SpeedUp,
        CaseClass::FreeFlow,
        CaseClass::Jam,
        CaseClass::Creep,
        CaseClass::Speeder,
        CaseClass::LateSlowDown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseClass::SlowDown => "slowdown",
            CaseClass::SpeedUp => "speedup",
            CaseClass::FreeFlow => "freeflow",
            CaseClass::Jam => "jam",
            CaseClass::Creep => "creep",
            CaseClass::Speeder => "speeder",
            CaseClass::LateSlowDown => "late_slowdown",
        }
    }
}

impl fmt::Display for CaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw highway traces in seconds and mph.
#[derive(Debug, Clone)]
pub struct HighwayGenerator {
    pub duration: f64,
    pub sample_period: f64,
    pub per_class: usize,
}

impl Default for HighwayGenerator {
    fn default() -> Self {
        Self {
            duration: 40.0,
            sample_period: 0.5,
            per_class: 40,
        }
    }
}

struct Congestion {
    period: f64,
    phase: f64,
}

impl Congestion {
    fn sample(rng: &mut impl Rng) -> Self {
        Self {
            period: rng.random_range(4.0..7.0),
            phase: rng.random_range(0.0..TAU),
        }
    }

    /// Oscillates between 3 and 13 mph.
    fn speed(&self, t: f64) -> f64 {
        8.0 + 5.0 * (TAU * t / self.period + self.phase).sin()
    }
}

impl HighwayGenerator {
    /// Traces with ids `<class>-<k>`, classes in [`CaseClass::ALL`] order.
    pub fn generate(&self, seed: u64) -> Vec<(Trace, CaseClass)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = Normal::new(0.0, 0.7).expect("valid normal");
        let n = (self.duration / self.sample_period).round() as usize + 1;
        let mut out = Vec::new();
        for class in CaseClass::ALL {
            for k in 0..self.per_class {
                let cruise = match class {
                    CaseClass::Speeder => rng.random_range(76.0..86.0),
                    CaseClass::Creep => rng.random_range(30.0..40.0),
                    _ => rng.random_range(55.0..65.0),
                };
                let switch = match class {
                    CaseClass::LateSlowDown => rng.random_range(35.0..37.0),
                    _ => rng.random_range(18.0..22.0),
                };
                let jam = Congestion::sample(&mut rng);
                let noise: Vec<f64> = (0..n).map(|_| jitter.sample(&mut rng)).collect();
                let id = format!("{}-{k}", class.name());
                let trace = sampled(&id, n, self.sample_period, |i, t| {
                    let v = match class {
                        CaseClass::SlowDown | CaseClass::LateSlowDown => {
                            if t < switch {
                                cruise
                            } else {
                                jam.speed(t)
                            }
                        }
                        CaseClass::SpeedUp => {
                            if t < switch {
                                jam.speed(t)
                            } else {
                                cruise
                            }
                        }
                        CaseClass::FreeFlow | CaseClass::Speeder | CaseClass::Creep => cruise,
                        CaseClass::Jam => jam.speed(t),
                    };
                    (v + noise[i]).max(0.0)
                });
                out.push((trace, class));
            }
        }
        out
    }
}
