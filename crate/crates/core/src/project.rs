//! Origin-anchored line projections of validity boundaries.
//!
//! A line `gamma(t) = t * u` from the origin to a point `u` on the far faces
//! of the unit box meets a monotone boundary at most once, so every boundary
//! is summarized by one parameter `t*` (and the point `gamma(t*)`). Lines are
//! chosen after labeling to maximize the smallest separation between label
//! bounding boxes, and a label's box becomes a readable specification.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::boundary::{classify_box, BoxClass, Membership, Rectangle, Validity};
use crate::learn::Labeling;
use crate::specdsl::{render, Formula, ParametricSpec};
use crate::trace::Trace;

/// Default bisection tolerance along a projection line.
pub const DEFAULT_TOL: f64 = 1e-4;
/// Default number of angles per angular dimension in a sweep.
pub const DEFAULT_ANGLE_STEPS: usize = 90;
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectError {
    #[error("no candidate line is crossed by every label; labels without crossings: {0:?}")]
    NoCandidate(Vec<usize>),
    #[error("need at least two labels, got {0}")]
    TooFewLabels(usize),
    #[error("bounding box of an empty point set")]
    EmptyPoints,
    #[error("invalid line direction {0:?}")]
    BadDirection(Vec<f64>),
    #[error("line has dimension {line}, specification has {spec}")]
    DimensionMismatch { line: usize, spec: usize },
}

/// `gamma(t) = t * direction`, with `direction` on the far boundary of the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct LineProjection {
    direction: Vec<f64>,
}

impl LineProjection {
    /// Scales a non-negative, nonzero vector onto the far faces of the box.
    pub fn through(v: &[f64]) -> Result<Self, ProjectError> {
        let m = v.iter().copied().fold(0.0, f64::max);
        if m <= 0.0 || v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ProjectError::BadDirection(v.to_vec()));
        }
        Ok(Self {
            direction: v.iter().map(|x| (x / m).min(1.0)).collect(),
        })
    }

    /// 2-D line at `angle` radians from the first axis.
    pub fn from_angle(angle: f64) -> Result<Self, ProjectError> {
        Self::from_angles(&[angle])
    }

    /// Hyperspherical angles in `[0, pi/2]`; `n - 1` angles for `n` parameters.
    pub fn from_angles(angles: &[f64]) -> Result<Self, ProjectError> {
        if angles.iter().any(|a| !(0.0..=FRAC_PI_2).contains(a)) {
            return Err(ProjectError::BadDirection(angles.to_vec()));
        }
        let mut v = Vec::with_capacity(angles.len() + 1);
        let mut sin_prod = 1.0;
        for a in angles {
            v.push(sin_prod * a.cos());
            sin_prod *= a.sin();
        }
        v.push(sin_prod);
        // clear rounding noise such as cos(pi/2)
        for x in &mut v {
            if x.abs() < 1e-15 {
                *x = 0.0;
            }
        }
        Self::through(&v)
    }

    pub fn diagonal(dim: usize) -> Self {
        Self {
            direction: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        self.direction.iter().map(|u| t * u).collect()
    }
}

/// Uniform sweep: `steps` angles per angular dimension at cell centres of `(0, pi/2)`.
pub fn angle_sweep(dim: usize, steps: usize) -> Vec<LineProjection> {
    assert!(dim >= 1 && steps >= 1);
    let free = dim - 1;
    if free == 0 {
        return vec![LineProjection::diagonal(1)];
    }
    let total = steps.pow(free as u32);
    (0..total)
        .map(|mut idx| {
            let angles: Vec<f64> = (0..free)
                .map(|_| {
                    let k = idx % steps;
                    idx /= steps;
                    (k as f64 + 0.5) * FRAC_PI_2 / steps as f64
                })
                .collect();
            LineProjection::from_angles(&angles).expect("sweep angles are in range")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub point: Vec<f64>,
}

/// Bisection for the unique boundary crossing on a line; `None` when both ends
/// of the line agree.
pub fn project_boundary<M: Membership + ?Sized>(
    m: &M,
    line: &LineProjection,
    tol: f64,
) -> Option<Crossing> {
    if m.contains(&line.at(0.0)) || !m.contains(&line.at(1.0)) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if m.contains(&line.at(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Some(Crossing {
        t,
        point: line.at(t),
    })
}

/// Per-axis min/max.
pub fn bounding_box_of(points: &[Vec<f64>]) -> Result<Rectangle, ProjectError> {
    let first = points.first().ok_or(ProjectError::EmptyPoints)?;
    let mut bot = first.clone();
    let mut top = first.clone();
    for p in &points[1..] {
        for (i, v) in p.iter().enumerate() {
            bot[i] = bot[i].min(*v);
            top[i] = top[i].max(*v);
        }
    }
    Ok(Rectangle::new(bot, top))
}

/// Infinity-norm gap between two boxes; 0 when they overlap.
pub fn box_separation(a: &Rectangle, b: &Rectangle) -> f64 {
    a.bot()
        .iter()
        .zip(a.top())
        .zip(b.bot().iter().zip(b.top()))
        .map(|((abot, atop), (bbot, btop))| (bbot - atop).max(abot - btop).max(0.0))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelBox {
    pub label: usize,
    pub rect: Rectangle,
}

/// Outcome of a line sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionChoice {
    pub index: usize,
    pub line: LineProjection,
    /// Smallest pairwise label separation on the chosen line(s).
    pub score: f64,
    pub boxes: Vec<LabelBox>,
}

/// Crossing parameters of every trace on every candidate line.
pub fn project_all(
    spec: &ParametricSpec,
    traces: &[Trace],
    candidates: &[LineProjection],
    tol: f64,
) -> Vec<Vec<Option<f64>>> {
    candidates
        .par_iter()
        .map(|line| {
            traces
                .iter()
                .map(|t| project_boundary(&Validity::new(spec, t), line, tol).map(|c| c.t))
                .collect()
        })
        .collect()
}

fn label_boxes(
    line: &LineProjection,
    ts: &[Option<f64>],
    labeling: &Labeling,
) -> Result<Vec<LabelBox>, Vec<usize>> {
    let mut boxes = Vec::new();
    let mut missing = Vec::new();
    for (label, members) in labeling.groups().iter().enumerate() {
        let pts: Vec<Vec<f64>> = members
            .iter()
            .filter_map(|&i| ts[i].map(|t| line.at(t)))
            .collect();
        match bounding_box_of(&pts) {
            Ok(rect) => boxes.push(LabelBox { label, rect }),
            Err(_) => missing.push(label),
        }
    }
    if missing.is_empty() {
        Ok(boxes)
    } else {
        Err(missing)
    }
}

fn pairwise_separations(boxes: &[LabelBox]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            out.push(box_separation(&boxes[i].rect, &boxes[j].rect));
        }
    }
    out
}

/// Sweeps `candidates` for the line maximizing the smallest separation between
/// label bounding boxes. Traces that miss a line are left out of its score;
/// a line missed by every member of some label is skipped. Ties go to the
/// lowest candidate index.
///
/// With `fixed` set, a label pair counts as separated by the larger of its
/// separation on the fixed line and on the candidate, so a second line can be
/// added greedily to a first.
pub fn optimize_projection(
    spec: &ParametricSpec,
    traces: &[Trace],
    labeling: &Labeling,
    candidates: &[LineProjection],
    tol: f64,
    fixed: Option<&ProjectionChoice>,
) -> Result<ProjectionChoice, ProjectError> {
    if labeling.k() < 2 {
        return Err(ProjectError::TooFewLabels(labeling.k()));
    }
    if let Some(line) = candidates.first() {
        if line.dim() != spec.dim() {
            return Err(ProjectError::DimensionMismatch {
                line: line.dim(),
                spec: spec.dim(),
            });
        }
    }
    let fixed_seps = fixed.map(|f| pairwise_separations(&f.boxes));
    let projected = project_all(spec, traces, candidates, tol);
    let mut best: Option<ProjectionChoice> = None;
    let mut offending = BTreeSet::new();
    for (index, (line, ts)) in candidates.iter().zip(&projected).enumerate() {
        let boxes = match label_boxes(line, ts, labeling) {
            Ok(b) => b,
            Err(missing) => {
                offending.extend(missing);
                continue;
            }
        };
        let seps = pairwise_separations(&boxes);
        let score = seps
            .iter()
            .enumerate()
            .map(|(p, s)| fixed_seps.as_ref().map_or(*s, |f| s.max(f[p])))
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(ProjectionChoice {
                index,
                line: line.clone(),
                score,
                boxes,
            });
        }
    }
    best.ok_or_else(|| ProjectError::NoCandidate(offending.into_iter().collect()))
}

/// A conjunction of corner instantiations that holds exactly when the trace's
/// boundary passes through the box: the bottom corner fails and the top holds.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpec {
    pub rect: Rectangle,
    /// `(corner, expected truth value)` in rendering order.
    pub literals: Vec<(Vec<f64>, bool)>,
}

impl LabelSpec {
    /// True for a single-point box, which no boundary can cross.
    pub fn is_zero_width(&self) -> bool {
        self.rect.max_edge() == 0.0
    }

    pub fn evaluate(&self, spec: &ParametricSpec, trace: &Trace) -> bool {
        self.literals
            .iter()
            .all(|(corner, want)| spec.evaluate(trace, corner) == *want)
    }

    /// Renders e.g. `¬phi(0.25,0.5) ∧ phi(0.3,0.51)` with normalized coordinates.
    pub fn render(&self, name: &str) -> String {
        let mut s = String::new();
        for (k, (corner, want)) in self.literals.iter().enumerate() {
            if k > 0 {
                s.push_str(" ∧ ");
            }
            if !want {
                s.push('¬');
            }
            let coords: Vec<String> = corner.iter().map(|v| v.to_string()).collect();
            let _ = write!(s, "{name}({})", coords.join(","));
        }
        s
    }

    /// The conjunction with each corner substituted into `spec`.
    pub fn formula(&self, spec: &ParametricSpec) -> Formula {
        Formula::and(
            self.literals
                .iter()
                .map(|(corner, want)| {
                    let f = spec.instantiate(corner);
                    if *want {
                        f
                    } else {
                        f.negate()
                    }
                })
                .collect(),
        )
    }

    /// Parameter-free `.psl` text with the corner instantiations substituted.
    pub fn to_psl(&self, spec: &ParametricSpec) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# box bot = {:?}, top = {:?}",
            self.rect.bot(),
            self.rect.top()
        );
        let _ = writeln!(out, "spec {}", render(&self.formula(spec), &[]));
        out
    }
}

/// Label specification of a parameter box.
pub fn extract_label_spec(rect: &Rectangle) -> LabelSpec {
    let ls = LabelSpec {
        rect: rect.clone(),
        literals: vec![(rect.bot().to_vec(), false), (rect.top().to_vec(), true)],
    };
    if ls.is_zero_width() {
        log::warn!(
            "zero-width label box at {:?}; the extracted specification is unsatisfiable",
            rect.bot()
        );
    }
    ls
}

/// Whether the trace's boundary passes through the box, by corner classification.
pub fn boundary_crosses(spec: &ParametricSpec, trace: &Trace, rect: &Rectangle) -> bool {
    classify_box(&Validity::new(spec, trace), rect) == BoxClass::Mixed
}

/// One-dimensional summary of many traces along a line.
#[derive(Debug, Clone, PartialEq)]
pub struct DimRed {
    pub positions: Vec<(String, Option<Crossing>)>,
    /// `(bin_lo, bin_hi, count)` over `[0, 1]`.
    pub histogram: Vec<(f64, f64, usize)>,
    pub absent: usize,
}

pub fn dimred(
    spec: &ParametricSpec,
    traces: &[Trace],
    line: &LineProjection,
    tol: f64,
    bins: usize,
) -> DimRed {
    assert!(bins > 0, "at least one bin");
    let positions: Vec<(String, Option<Crossing>)> = traces
        .par_iter()
        .map(|t| {
            (
                t.id().to_string(),
                project_boundary(&Validity::new(spec, t), line, tol),
            )
        })
        .collect();
    let mut counts = vec![0usize; bins];
    let mut absent = 0;
    for (_, c) in &positions {
        match c {
            Some(c) => counts[((c.t * bins as f64) as usize).min(bins - 1)] += 1,
            None => absent += 1,
        }
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(b, n)| (b as f64 / bins as f64, (b + 1) as f64 / bins as f64, n))
        .collect();
    DimRed {
        positions,
        histogram,
        absent,
    }
}

impl DimRed {
    pub fn t_values(&self) -> Vec<f64> {
        self.positions
            .iter()
            .filter_map(|(_, c)| c.as_ref().map(|c| c.t))
            .collect()
    }

    /// `trace_id,t_star,coord_1..coord_n`; absent crossings leave the fields empty.
    pub fn write_positions<W: Write>(&self, dim: usize, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("trace_id,t_star");
        for i in 1..=dim {
            let _ = write!(header, ",coord_{i}");
        }
        writeln!(out, "{header}")?;
        for (id, c) in &self.positions {
            match c {
                Some(c) => {
                    let coords: Vec<String> = c.point.iter().map(|v| v.to_string()).collect();
                    writeln!(out, "{id},{},{}", c.t, coords.join(","))?;
                }
                None => writeln!(out, "{id},{}", ",".repeat(dim))?,
            }
        }
        Ok(())
    }

    pub fn write_histogram<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (lo, hi, n) in &self.histogram {
            writeln!(out, "{lo},{hi},{n}")?;
        }
        Ok(())
    }
}
