//! Sampled univariate time series.
//!
//! A [`Trace`] is an immutable, finite list of `(time, value)` samples with
//! strictly increasing times. Between samples a trace holds its last value
//! (left-continuous step interpolation), so every temporal quantifier can be
//! decided exactly by looking at sample points.

use std::fmt;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("trace has no samples")]
    Empty,
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("sample {index}: time {time} does not increase past the previous sample")]
    NonIncreasing { index: usize, time: f64 },
    #[error("sample {index}: non-finite {what}")]
    NonFinite { index: usize, what: &'static str },
    #[error("sample {index}: negative time {time}")]
    NegativeTime { index: usize, time: f64 },
    #[error("bad header: expected `time,value`, found `{0}`")]
    Header(String),
    #[error("time {time} outside trace domain [{start}, {end}]")]
    Domain { time: f64, start: f64, end: f64 },
    #[error("invalid rescaling: {0}")]
    Rescaling(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// A finite sampled time series `x: T -> D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    id: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Trace {
    /// Builds a trace from `(time, value)` samples, validating ordering and finiteness.
    pub fn new(id: impl Into<String>, samples: &[(f64, f64)]) -> Result<Self, TraceError> {
        let (times, values) = samples.iter().copied().unzip();
        Self::from_columns(id, times, values)
    }

    pub fn from_columns(
        id: impl Into<String>,
        times: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, TraceError> {
        assert_eq!(times.len(), values.len(), "column lengths differ");
        if times.is_empty() {
            return Err(TraceError::Empty);
        }
        for (index, (&t, &v)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() {
                return Err(TraceError::NonFinite { index, what: "time" });
            }
            if !v.is_finite() {
                return Err(TraceError::NonFinite { index, what: "value" });
            }
            if t < 0.0 {
                return Err(TraceError::NegativeTime { index, time: t });
            }
            if index > 0 && t <= times[index - 1] {
                return Err(TraceError::NonIncreasing { index, time: t });
            }
        }
        Ok(Self {
            id: id.into(),
            times,
            values,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Returns a copy of this trace under a new id.
    pub fn with_id(&self, id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Step interpolation: the value of the latest sample at or before `time`.
    pub fn value_at(&self, time: f64) -> Result<f64, TraceError> {
        if !(time >= self.start() && time <= self.end()) {
            return Err(TraceError::Domain {
                time,
                start: self.start(),
                end: self.end(),
            });
        }
        Ok(self.values[self.index_at(time)])
    }

    /// Index of the latest sample with `sample_time <= time`. Caller guarantees
    /// `time >= start()`.
    pub(crate) fn index_at(&self, time: f64) -> usize {
        self.times.partition_point(|&t| t <= time) - 1
    }

    /// Range of sample indices whose time lies in the half-open window `(lo, hi]`.
    pub(crate) fn window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let first = self.times.partition_point(|&t| t <= lo);
        let last = self.times.partition_point(|&t| t <= hi);
        first..last.max(first)
    }

    pub fn rescale(&self, r: Rescaling) -> Self {
        Self {
            id: self.id.clone(),
            times: self.times.iter().map(|t| t * r.time_scale).collect(),
            values: self.values.iter().map(|v| v * r.value_scale).collect(),
        }
    }

    /// Multiplies every sample by an independent `N(mean, stddev^2)` draw,
    /// producing `count` variants with ids `<id>~<k>`.
    pub fn augment_noise(&self, count: usize, seed: u64, mean: f64, stddev: f64) -> Vec<Trace> {
        let normal = Normal::new(mean, stddev).expect("stddev must be finite and non-negative");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|k| Trace {
                id: format!("{}~{}", self.id, k),
                times: self.times.clone(),
                values: self
                    .values
                    .iter()
                    .map(|v| v * normal.sample(&mut rng))
                    .collect(),
            })
            .collect()
    }

    /// Writes the trace in the `time,value` CSV format accepted by [`load_trace_csv`].
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,value")?;
        for (t, v) in self.samples() {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} samples on [{}, {}])",
            self.id,
            self.len(),
            self.start(),
            self.end()
        )
    }
}

/// Linear change of units applied independently to time and value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaling {
    /// Output ticks per input time unit.
    pub time_scale: f64,
    pub value_scale: f64,
}

impl Rescaling {
    pub fn new(time_scale: f64, value_scale: f64) -> Result<Self, TraceError> {
        for (name, s) in [("time_scale", time_scale), ("value_scale", value_scale)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(TraceError::Rescaling(format!("{name} must be positive, got {s}")));
            }
        }
        Ok(Self {
            time_scale,
            value_scale,
        })
    }

    pub fn identity() -> Self {
        Self {
            time_scale: 1.0,
            value_scale: 1.0,
        }
    }

    /// The rescaling equivalent to applying `self` and then `next`.
    pub fn then(self, next: Rescaling) -> Self {
        Self {
            time_scale: self.time_scale * next.time_scale,
            value_scale: self.value_scale * next.value_scale,
        }
    }
}

/// Reads a `time,value` CSV. Lines starting with `#` are skipped and CRLF is accepted.
pub fn load_trace_csv<R: Read>(id: impl Into<String>, source: R) -> Result<Trace, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| TraceError::Csv(e.to_string()))?
        .clone();
    if header.len() != 2 || &header[0] != "time" || &header[1] != "value" {
        return Err(TraceError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.position() {
            Some(p) => TraceError::Row {
                row: p.line(),
                message: e.to_string(),
            },
            None => TraceError::Csv(e.to_string()),
        })?;
        let row = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64, TraceError> {
            record[i].parse::<f64>().map_err(|_| TraceError::Row {
                row,
                message: format!("malformed {name} `{}`", &record[i]),
            })
        };
        let t = field(0, "time")?;
        let v = field(1, "value")?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(TraceError::Row {
                    row,
                    message: format!("time {t} does not increase past {prev}"),
                });
            }
        }
        if !t.is_finite() || !v.is_finite() || t < 0.0 {
            return Err(TraceError::Row {
                row,
                message: format!("invalid sample ({t}, {v})"),
            });
        }
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(TraceError::Empty);
    }
    Trace::from_columns(id, times, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> Trace {
        Trace::new("a", &[(0.0, 1.0), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn parses_simple_csv() {
        let t = load_trace_csv("a", "time,value\n0,1.0\n1,0.5".as_bytes()).unwrap();
        assert_eq!(t, two());
    }

    #[test]
    fn rejects_repeated_time() {
        let err = load_trace_csv("a", "time,value\n1,1\n1,2".as_bytes()).unwrap_err();
        assert!(matches!(err, TraceError::Row { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn rejects_malformed_float_and_names_row() {
        let err = load_trace_csv("a", "time,value\n0,1\n1,abc\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn rejects_empty_body_and_bad_header() {
        assert_eq!(
            load_trace_csv("a", "time,value\n".as_bytes()).unwrap_err(),
            TraceError::Empty
        );
        assert!(matches!(
            load_trace_csv("a", "t,v\n0,1\n".as_bytes()).unwrap_err(),
            TraceError::Header(_)
        ));
    }

    #[test]
    fn accepts_crlf_and_comments() {
        let src = "# speed log\r\ntime,value\r\n0,1.0\r\n# gap\r\n1,0.5\r\n";
        assert_eq!(load_trace_csv("a", src.as_bytes()).unwrap(), two());
    }

    #[test]
    fn long_trajectory_row_count() {
        // 45 minutes at 0.1 s sampling
        let mut src = String::from("time,value\n");
        for k in 0..27_000u32 {
            src.push_str(&format!("{},{}\n", f64::from(k) * 0.1, 60.0));
        }
        let t = load_trace_csv("long", src.as_bytes()).unwrap();
        assert_eq!(t.len(), 27_000);
    }

    #[test]
    fn step_interpolation() {
        let t = two();
        assert_eq!(t.value_at(0.5).unwrap(), 1.0);
        assert_eq!(t.value_at(1.0).unwrap(), 0.5);
        assert_eq!(t.value_at(0.0).unwrap(), 1.0);
        assert!(matches!(t.value_at(2.0), Err(TraceError::Domain { .. })));
        assert!(t.value_at(f64::NAN).is_err());
    }

    #[test]
    fn rescale_case_study_units() {
        let mph = Trace::new("car", &[(0.0, 70.0), (2.0, 35.0)]).unwrap();
        let r = Rescaling::new(0.5, 1.0 / 70.0).unwrap();
        let scaled = mph.rescale(r);
        assert_eq!(scaled.values()[0], 1.0);
        assert_eq!(scaled.times()[1], 1.0);
        assert_eq!(two().rescale(Rescaling::identity()), two());
        assert!(Rescaling::new(0.0, 1.0).is_err());
        assert!(Rescaling::new(1.0, -2.0).is_err());
    }

    #[test]
    fn zero_noise_copies() {
        let copies = two().augment_noise(5, 1, 1.0, 0.0);
        assert_eq!(copies.len(), 5);
        for c in &copies {
            assert_eq!(c.values(), two().values());
            assert_eq!(c.times(), two().times());
        }
    }

    #[test]
    fn noise_is_seeded() {
        let a = two().augment_noise(100, 7, 1.0, 0.3);
        let b = two().augment_noise(100, 7, 1.0, 0.3);
        let c = two().augment_noise(100, 8, 1.0, 0.3);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 100);
    }

    #[test]
    fn window_is_left_open() {
        let t = Trace::new("w", &[(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)]).unwrap();
        assert_eq!(t.window(0.0, 1.0), 1..3);
        assert_eq!(t.window(0.5, 1.0), 2..3);
        assert_eq!(t.window(1.0, 1.0), 3..3);
        assert_eq!(t.window(0.7, 0.2), 2..2);
    }
}
