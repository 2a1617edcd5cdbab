//! Interval bounds on the logical distance between two traces.
//!
//! The logical distance is the infinity-norm Hausdorff distance between the
//! two validity-domain boundaries. Both boundaries are covered by mixed
//! rectangles whose corners are compared instead; if every edge is at most
//! `eps / 2` the corner distance is within `eps` of the true distance. The
//! approximations are deepened until the bracket is narrower than `delta`.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::boundary::{BoundaryApprox, BoundaryCache, Rectangle, DEFAULT_ETA};
use crate::specdsl::ParametricSpec;
use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("cannot discretize an empty rectangle set")]
    EmptyRectangles,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point {0:?} lies outside the unit box")]
    OutsideUnitBox(Vec<f64>),
    #[error("a distance matrix needs at least two traces, got {0}")]
    TooFewTraces(usize),
    #[error("duplicate trace id `{0}`")]
    DuplicateId(String),
    #[error("distance file line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Nonempty finite set of unit-box points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, DistanceError> {
        if points.is_empty() {
            return Err(DistanceError::EmptyCloud);
        }
        for p in &points {
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(DistanceError::OutsideUnitBox(p.clone()));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Union of all rectangle corners, deduplicated in first-seen order.
pub fn discretize(rects: &[Rectangle]) -> Result<PointCloud, DistanceError> {
    if rects.is_empty() {
        return Err(DistanceError::EmptyRectangles);
    }
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for r in rects {
        for c in r.corners() {
            // +0.0 keys so that -0.0 and 0.0 collapse
            let key: Vec<u64> = c.iter().map(|v| (v + 0.0).to_bits()).collect();
            if seen.insert(key) {
                points.push(c);
            }
        }
    }
    PointCloud::new(points)
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn directed(a: &PointCloud, b: &PointCloud) -> f64 {
    a.points
        .par_iter()
        .map(|p| {
            b.points
                .iter()
                .map(|q| dist_inf(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

const LEAF: usize = 8;

struct Node {
    /// Tight bounding box of the points below this node.
    lo: Vec<f64>,
    hi: Vec<f64>,
    kind: NodeKind,
}

enum NodeKind {
    Leaf(std::ops::Range<usize>),
    Split(Box<Node>, Box<Node>),
}

impl Node {
    fn gap(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Static k-d tree for exact infinity-norm nearest-neighbour queries.
struct KdTree<'a> {
    points: &'a [Vec<f64>],
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    fn new(points: &'a [Vec<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = Self::build(points, &mut order, 0);
        Self {
            points,
            order,
            root,
        }
    }

    fn build(points: &[Vec<f64>], order: &mut [usize], offset: usize) -> Node {
        let dim = points[order[0]].len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in order.iter() {
            for (k, v) in points[i].iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        if order.len() <= LEAF {
            let kind = NodeKind::Leaf(offset..offset + order.len());
            return Node { lo, hi, kind };
        }
        // split the widest axis at the median
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .expect("points have at least one coordinate");
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&i, &j| points[i][axis].total_cmp(&points[j][axis]));
        let (lower, upper) = order.split_at_mut(mid);
        let kind = NodeKind::Split(
            Box::new(Self::build(points, lower, offset)),
            Box::new(Self::build(points, upper, offset + mid)),
        );
        Node { lo, hi, kind }
    }

    /// Smallest distance from `p`, or any value at most `enough` once one is found.
    fn nearest(&self, p: &[f64], enough: f64) -> f64 {
        let mut best = f64::INFINITY;
        self.visit(&self.root, p, enough, &mut best);
        best
    }

    fn visit(&self, node: &Node, p: &[f64], enough: f64, best: &mut f64) {
        match &node.kind {
            NodeKind::Leaf(range) => {
                for &i in &self.order[range.clone()] {
                    *best = best.min(dist_inf(p, &self.points[i]));
                }
            }
            NodeKind::Split(a, b) => {
                let (ga, gb) = (a.gap(p), b.gap(p));
                let (first, g_first, second, g_second) = if ga <= gb {
                    (a, ga, b, gb)
                } else {
                    (b, gb, a, ga)
                };
                for (child, g) in [(first, g_first), (second, g_second)] {
                    if *best <= enough || g >= *best {
                        return;
                    }
                    self.visit(child, p, enough, best);
                }
            }
        }
    }
}

/// Directed distance with a k-d tree search per point. A point stops
/// searching once it is known to be no farther than the running maximum,
/// since it can no longer raise the result. Both cutoffs skip only candidates
/// that cannot change the value, so it equals the brute-force result.
fn directed_pruned(a: &PointCloud, b: &PointCloud) -> f64 {
    let tree = KdTree::new(&b.points);
    let running = AtomicU64::new(0f64.to_bits());
    let n = a.points.len();
    // visit in a scrambled order; neighbouring points along a boundary would
    // otherwise raise the running maximum in many small steps
    let stride = scramble_stride(n);
    (0..n).into_par_iter().for_each(|k| {
        let p = &a.points[k * stride % n];
        let enough = f64::from_bits(running.load(Ordering::Relaxed));
        let d = tree.nearest(p, enough);
        if d > enough {
            // non-negative floats order like their bit patterns
            running.fetch_max(d.to_bits(), Ordering::Relaxed);
        }
    });
    f64::from_bits(running.into_inner())
}

/// A stride near `n / golden ratio` that is coprime to `n`.
fn scramble_stride(n: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mut s = ((n as f64 * 0.618_033_988_75) as usize).max(1);
    while gcd(s, n) != 1 {
        s += 1;
    }
    s
}

/// Infinity-norm Hausdorff distance, brute force over all pairs.
pub fn hausdorff_inf(a: &PointCloud, b: &PointCloud) -> f64 {
    directed(a, b).max(directed(b, a))
}

/// Same value as [`hausdorff_inf`], skipping points that cannot change the result.
pub fn hausdorff_inf_pruned(a: &PointCloud, b: &PointCloud) -> f64 {
    directed_pruned(a, b).max(directed_pruned(b, a))
}

/// Closed bracket `[lo, hi]` of non-negative reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceInterval {
    pub lo: f64,
    pub hi: f64,
}

impl DistanceInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(0.0 <= lo && lo <= hi, "invalid distance interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Scalar handed to learners.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, d: f64) -> bool {
        self.lo <= d && d <= self.hi
    }
}

/// `[max(0, d_hat - eps), d_hat + eps]`.
pub fn error_interval(d_hat: f64, eps: f64) -> DistanceInterval {
    DistanceInterval::new((d_hat - eps).max(0.0), d_hat + eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceOptions {
    /// Target bracket width.
    pub delta: f64,
    pub max_depth: usize,
    /// Diagonal bisection tolerance.
    pub eta: f64,
    /// Use the sorted nearest-neighbour scan instead of brute force; both
    /// return the same value.
    pub prune: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            delta: 0.01,
            max_depth: 20,
            eta: DEFAULT_ETA,
            prune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub interval: DistanceInterval,
    pub converged: bool,
    pub depth: usize,
    /// Error bound of the final iteration.
    pub eps: f64,
    /// One of the boundaries is a whole-domain sentinel.
    pub degenerate: bool,
}

/// Bracket of the logical distance, deepening both approximations until the
/// bracket is at most `opts.delta` wide or `opts.max_depth` is reached.
pub fn approx_dist(
    spec: &ParametricSpec,
    x: &Trace,
    y: &Trace,
    opts: &DistanceOptions,
) -> DistanceResult {
    let cache = BoundaryCache::new(spec, opts.eta);
    approx_dist_cached(spec, x, y, opts, &cache)
}

pub fn approx_dist_cached(
    spec: &ParametricSpec,
    x: &Trace,
    y: &Trace,
    opts: &DistanceOptions,
    cache: &BoundaryCache,
) -> DistanceResult {
    approx_dist_with(opts, |depth| (cache.get(spec, x, depth), cache.get(spec, y, depth)))
}

/// The refinement loop over any source of paired approximations.
pub fn approx_dist_with<F, B>(opts: &DistanceOptions, mut approx: F) -> DistanceResult
where
    F: FnMut(usize) -> (B, B),
    B: std::ops::Deref<Target = BoundaryApprox>,
{
    let mut depth = 0;
    loop {
        let (r, s) = approx(depth);
        let a = discretize(&r.rects).expect("approximations are nonempty");
        let b = discretize(&s.rects).expect("approximations are nonempty");
        let d_hat = if opts.prune {
            hausdorff_inf_pruned(&a, &b)
        } else {
            hausdorff_inf(&a, &b)
        };
        let eps = r.eps.max(s.eps);
        let interval = error_interval(d_hat, eps);
        let converged = interval.width() <= opts.delta;
        if converged || depth >= opts.max_depth {
            return DistanceResult {
                interval,
                converged,
                depth,
                eps,
                degenerate: r.degenerate.is_some() || s.degenerate.is_some(),
            };
        }
        depth += 1;
    }
}

/// Pairwise intervals, each unordered pair computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    // row-major strict upper triangle
    upper: Vec<DistanceResult>,
}

impl DistanceMatrix {
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let n = self.ids.len();
        i * (2 * n - i - 1) / 2 + (j - i - 1)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Off-diagonal entry; `None` on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> Option<&DistanceResult> {
        (i != j).then(|| &self.upper[self.index(i, j)])
    }

    pub fn interval(&self, i: usize, j: usize) -> DistanceInterval {
        self.get(i, j)
            .map_or(DistanceInterval::new(0.0, 0.0), |r| r.interval)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, &DistanceResult)> + '_ {
        let n = self.ids.len();
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .map(move |(i, j)| (i, j, &self.upper[self.index(i, j)]))
    }

    /// Interval midpoints as a dense symmetric matrix with zero diagonal.
    pub fn midpoints(&self) -> Vec<Vec<f64>> {
        let n = self.ids.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, j, r) in self.pairs() {
            m[i][j] = r.interval.midpoint();
            m[j][i] = m[i][j];
        }
        m
    }

    pub fn all_converged(&self) -> bool {
        self.upper.iter().all(|r| r.converged)
    }

    /// Long-form CSV `i,j,lo,hi,converged`, one row per unordered pair.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DistanceError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| DistanceError::Io(e.into());
        w.write_record(["i", "j", "lo", "hi", "converged"]).map_err(io)?;
        for (i, j, r) in self.pairs() {
            w.write_record([
                self.ids[i].as_str(),
                self.ids[j].as_str(),
                &r.interval.lo.to_string(),
                &r.interval.hi.to_string(),
                if r.converged { "true" } else { "false" },
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the long-form CSV. Every unordered pair of the ids seen must appear once.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, DistanceError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let fmt = |line: u64, message: String| DistanceError::Format { line, message };
        let header = rdr.headers().map_err(|e| fmt(1, e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["i", "j", "lo", "hi", "converged"] {
            return Err(fmt(1, "expected header `i,j,lo,hi,converged`".into()));
        }
        let mut ids: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| fmt(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != 5 {
                return Err(fmt(line, format!("expected 5 fields, found {}", rec.len())));
            }
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| fmt(line, format!("malformed number `{}`", &rec[k])))
            };
            let (lo, hi) = (num(2)?, num(3)?);
            if !(0.0 <= lo && lo <= hi) {
                return Err(fmt(line, format!("invalid interval [{lo}, {hi}]")));
            }
            let converged = match &rec[4] {
                "true" => true,
                "false" => false,
                other => return Err(fmt(line, format!("bad converged flag `{other}`"))),
            };
            for id in [&rec[0], &rec[1]] {
                if !ids.iter().any(|x| x == id) {
                    ids.push(id.to_string());
                }
            }
            rows.push((rec[0].to_string(), rec[1].to_string(), lo, hi, converged, line));
        }
        let n = ids.len();
        let mut upper: Vec<Option<DistanceResult>> = vec![None; n * n.saturating_sub(1) / 2];
        let mut m = DistanceMatrix {
            ids,
            upper: Vec::new(),
        };
        for (a, b, lo, hi, converged, line) in rows {
            let i = m.ids.iter().position(|x| *x == a).unwrap();
            let j = m.ids.iter().position(|x| *x == b).unwrap();
            if i == j {
                return Err(fmt(line, format!("self pair `{a}`")));
            }
            let k = m.index(i, j);
            if upper[k].is_some() {
                return Err(fmt(line, format!("pair ({a}, {b}) listed twice")));
            }
            upper[k] = Some(DistanceResult {
                interval: DistanceInterval::new(lo, hi),
                converged,
                depth: 0,
                eps: 0.5 * (hi - lo),
                degenerate: false,
            });
        }
        if n < 2 || upper.iter().any(Option::is_none) {
            return Err(fmt(0, "matrix does not list every pair of trace ids".into()));
        }
        m.upper = upper.into_iter().map(Option::unwrap).collect();
        Ok(m)
    }
}

/// All pairwise distances, sharing one boundary cache across pairs.
pub fn distance_matrix(
    spec: &ParametricSpec,
    traces: &[Trace],
    opts: &DistanceOptions,
) -> Result<DistanceMatrix, DistanceError> {
    let cache = BoundaryCache::new(spec, opts.eta);
    distance_matrix_cached(spec, traces, opts, &cache)
}

pub fn distance_matrix_cached(
    spec: &ParametricSpec,
    traces: &[Trace],
    opts: &DistanceOptions,
    cache: &BoundaryCache,
) -> Result<DistanceMatrix, DistanceError> {
    let n = traces.len();
    if n < 2 {
        return Err(DistanceError::TooFewTraces(n));
    }
    let mut seen = HashSet::new();
    for t in traces {
        if !seen.insert(t.id()) {
            return Err(DistanceError::DuplicateId(t.id().to_string()));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let upper: Vec<DistanceResult> = pairs
        .par_iter()
        .map(|&(i, j)| approx_dist_cached(spec, &traces[i], &traces[j], opts, cache))
        .collect();
    for (&(i, j), r) in pairs.iter().zip(&upper) {
        if !r.converged {
            log::warn!(
                "pair ({}, {}) did not converge: width {} at depth {}",
                traces[i].id(),
                traces[j].id(),
                r.interval.width(),
                r.depth
            );
        }
    }
    Ok(DistanceMatrix {
        ids: traces.iter().map(|t| t.id().to_string()).collect(),
        upper,
    })
}
