//! Rectangle over-approximations of a validity-domain boundary.
//!
//! For a monotone specification the validity domain is upward closed in the
//! unit box, so a box whose bottom corner fails and whose top corner holds must
//! meet the boundary ("mixed"). Each refinement bisects the diagonal of every
//! mixed box to find a crossing, keeps the sub-boxes that are incomparable with
//! the crossing plus the tiny bracket box around it, and drops everything that
//! is provably all-true or all-false.
//!
//! Sub-boxes that would still be wider than half their parent are split once
//! more at their centre so the maximum edge length at least halves per depth.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use thiserror::Error;

use crate::specdsl::ParametricSpec;
use crate::trace::Trace;

/// Default diagonal bisection tolerance in normalized units.
pub const DEFAULT_ETA: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that answers membership queries on the normalized unit box.
pub trait Membership: Sync {
    fn dim(&self) -> usize;
    fn contains(&self, theta: &[f64]) -> bool;
}

/// The validity domain of one trace under one specification.
#[derive(Clone, Copy)]
pub struct Validity<'a> {
    pub spec: &'a ParametricSpec,
    pub trace: &'a Trace,
}

impl<'a> Validity<'a> {
    pub fn new(spec: &'a ParametricSpec, trace: &'a Trace) -> Self {
        Self { spec, trace }
    }
}

impl Membership for Validity<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn contains(&self, theta: &[f64]) -> bool {
        self.spec.evaluate(self.trace, theta)
    }
}

/// Closed axis-aligned box `[bot, top]` inside the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    bot: Vec<f64>,
    top: Vec<f64>,
}

impl Rectangle {
    pub fn new(bot: Vec<f64>, top: Vec<f64>) -> Self {
        assert_eq!(bot.len(), top.len(), "corner dimensions differ");
        assert!(
            bot.iter().zip(&top).all(|(b, t)| b <= t),
            "bottom corner must be below top corner"
        );
        Self { bot, top }
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn point(p: Vec<f64>) -> Self {
        Self::new(p.clone(), p)
    }

    pub fn dim(&self) -> usize {
        self.bot.len()
    }

    pub fn bot(&self) -> &[f64] {
        &self.bot
    }

    pub fn top(&self) -> &[f64] {
        &self.top
    }

    pub fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        self.bot.iter().zip(&self.top).map(|(b, t)| t - b)
    }

    pub fn max_edge(&self) -> f64 {
        self.edges().fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        midpoint(&self.bot, &self.top)
    }

    /// All `2^n` corners; bit `i` of the index selects the top coordinate on axis `i`.
    pub fn corners(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let n = self.dim();
        (0..1usize << n).map(move |mask| {
            (0..n)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        self.top[i]
                    } else {
                        self.bot[i]
                    }
                })
                .collect()
        })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.bot.iter().zip(&self.top))
            .all(|(x, (b, t))| b <= x && x <= t)
    }

    /// Infinity-norm distance from a point to the box (0 inside).
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.bot.iter().zip(&self.top))
            .map(|(x, (b, t))| (b - x).max(x - t).max(0.0))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxClass {
    AllTrue,
    AllFalse,
    Mixed,
}

/// Whole-domain outcome when the box never splits into true and false parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degenerate {
    AllTrue,
    AllFalse,
}

impl Degenerate {
    fn as_str(self) -> &'static str {
        match self {
            Degenerate::AllTrue => "all_true",
            Degenerate::AllFalse => "all_false",
        }
    }
}

/// Upward closure makes two corner evaluations sufficient.
pub fn classify_box<M: Membership + ?Sized>(m: &M, r: &Rectangle) -> BoxClass {
    if m.contains(r.bot()) {
        BoxClass::AllTrue
    } else if !m.contains(r.top()) {
        BoxClass::AllFalse
    } else {
        BoxClass::Mixed
    }
}

/// Bisects the diagonal of a mixed box until the false/true pair is within
/// `eta` in the infinity norm. Returns `(p_false, p_true)`.
///
/// A box with a zero-length diagonal returns its midpoint twice.
pub fn diagonal_crossing<M: Membership + ?Sized>(
    m: &M,
    r: &Rectangle,
    eta: f64,
) -> (Vec<f64>, Vec<f64>) {
    let span = r.max_edge();
    if span == 0.0 {
        let c = r.center();
        return (c.clone(), c);
    }
    if span <= eta {
        return (r.bot().to_vec(), r.top().to_vec());
    }
    let at = |s: f64| -> Vec<f64> {
        r.bot()
            .iter()
            .zip(r.top())
            .map(|(b, t)| b + s * (t - b))
            .collect()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while (hi - lo) * span > eta {
        let mid = 0.5 * (lo + hi);
        if m.contains(&at(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (at(lo), at(hi))
}

/// Rectangle cover of the boundary at a fixed refinement depth.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryApprox {
    pub spec_id: String,
    pub trace_id: String,
    pub depth: usize,
    pub rects: Vec<Rectangle>,
    /// `2 * max edge + 2 * eta`; the discretized Hausdorff error bound.
    pub eps: f64,
    pub eta: f64,
    pub degenerate: Option<Degenerate>,
}

impl BoundaryApprox {
    pub fn dim(&self) -> usize {
        self.rects.first().map_or(0, Rectangle::dim)
    }

    pub fn max_edge(&self) -> f64 {
        self.rects.iter().map(Rectangle::max_edge).fold(0.0, f64::max)
    }

    /// The depth-0 approximation: the unit box, or a sentinel point when the
    /// specification does not split the box.
    pub fn initial<M: Membership + ?Sized>(
        m: &M,
        spec_id: &str,
        trace_id: &str,
        eta: f64,
    ) -> Self {
        let unit = Rectangle::unit(m.dim());
        let (rects, degenerate) = match classify_box(m, &unit) {
            BoxClass::Mixed => (vec![unit], None),
            BoxClass::AllTrue => {
                log::warn!("trace {trace_id}: specification holds on the whole parameter box");
                (vec![Rectangle::point(vec![0.0; m.dim()])], Some(Degenerate::AllTrue))
            }
            BoxClass::AllFalse => {
                log::warn!("trace {trace_id}: specification fails on the whole parameter box");
                (vec![Rectangle::point(vec![1.0; m.dim()])], Some(Degenerate::AllFalse))
            }
        };
        let mut b = Self {
            spec_id: spec_id.to_string(),
            trace_id: trace_id.to_string(),
            depth: 0,
            rects,
            eps: 0.0,
            eta,
            degenerate,
        };
        b.eps = b.error_bound();
        b
    }

    fn error_bound(&self) -> f64 {
        if self.degenerate.is_some() {
            0.0
        } else {
            2.0 * self.max_edge() + 2.0 * self.eta
        }
    }

    /// One refinement step; degenerate approximations are returned unchanged
    /// apart from the depth counter.
    pub fn refine<M: Membership + ?Sized>(&self, m: &M) -> Self {
        let rects = if self.degenerate.is_some() {
            self.rects.clone()
        } else if self.rects.len() >= 64 {
            self.rects
                .par_iter()
                .flat_map_iter(|r| split_mixed(m, r, self.eta))
                .collect()
        } else {
            self.rects
                .iter()
                .flat_map(|r| split_mixed(m, r, self.eta))
                .collect()
        };
        let mut next = Self {
            spec_id: self.spec_id.clone(),
            trace_id: self.trace_id.clone(),
            depth: self.depth + 1,
            rects,
            eps: 0.0,
            eta: self.eta,
            degenerate: self.degenerate,
        };
        next.eps = next.error_bound();
        next
    }

    pub fn to_depth<M: Membership + ?Sized>(
        m: &M,
        spec_id: &str,
        trace_id: &str,
        depth: usize,
        eta: f64,
    ) -> Self {
        let mut b = Self::initial(m, spec_id, trace_id, eta);
        for _ in 0..depth {
            b = b.refine(m);
        }
        b
    }

    /// Writes the boundary file: `key = value` header lines, then one
    /// `rect` line per rectangle with bottom then top coordinates.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# validity-domain boundary approximation");
        let _ = writeln!(s, "spec_id = {}", self.spec_id);
        let _ = writeln!(s, "trace_id = {}", self.trace_id);
        let _ = writeln!(s, "depth = {}", self.depth);
        let _ = writeln!(s, "dim = {}", self.dim());
        let _ = writeln!(s, "eps = {}", self.eps);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(
            s,
            "degenerate = {}",
            self.degenerate.map_or("none", Degenerate::as_str)
        );
        let _ = writeln!(s, "rects = {}", self.rects.len());
        for r in &self.rects {
            s.push_str("rect");
            for v in r.bot().iter().chain(r.top()) {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        out.write_all(s.as_bytes())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, BoundaryError> {
        let mut header: HashMap<String, String> = HashMap::new();
        let mut rects = Vec::new();
        let mut dim = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let err = |message: String| BoundaryError::Format {
                line: lineno,
                message,
            };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("rect ").filter(|_| !line.contains('=')) {
                let n: usize = dim.ok_or_else(|| err("`rect` before `dim`".into()))?;
                let coords = rest
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad coordinate `{v}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if coords.len() != 2 * n {
                    return Err(err(format!("expected {} coordinates, found {}", 2 * n, coords.len())));
                }
                let (bot, top) = coords.split_at(n);
                if bot.iter().zip(top).any(|(b, t)| b > t) {
                    return Err(err("bottom corner above top corner".into()));
                }
                rects.push(Rectangle::new(bot.to_vec(), top.to_vec()));
            } else if let Some((k, v)) = line.split_once('=') {
                let (k, v) = (k.trim().to_string(), v.trim().to_string());
                if k == "dim" {
                    dim = Some(v.parse().map_err(|_| err(format!("bad dim `{v}`")))?);
                }
                header.insert(k, v);
            } else {
                return Err(err(format!("unrecognized line `{line}`")));
            }
        }
        let get = |k: &str| {
            header.get(k).cloned().ok_or_else(|| BoundaryError::Format {
                line: 0,
                message: format!("missing header field `{k}`"),
            })
        };
        let num = |k: &str| -> Result<f64, BoundaryError> {
            let v = get(k)?;
            v.parse().map_err(|_| BoundaryError::Format {
                line: 0,
                message: format!("bad `{k}` value `{v}`"),
            })
        };
        let degenerate = match get("degenerate")?.as_str() {
            "none" => None,
            "all_true" => Some(Degenerate::AllTrue),
            "all_false" => Some(Degenerate::AllFalse),
            other => {
                return Err(BoundaryError::Format {
                    line: 0,
                    message: format!("bad degenerate flag `{other}`"),
                })
            }
        };
        let expected: usize = get("rects")?.parse().map_err(|_| BoundaryError::Format {
            line: 0,
            message: "bad rect count".into(),
        })?;
        if expected != rects.len() {
            return Err(BoundaryError::Format {
                line: 0,
                message: format!("header announces {expected} rects, found {}", rects.len()),
            });
        }
        Ok(Self {
            spec_id: get("spec_id")?,
            trace_id: get("trace_id")?,
            depth: get("depth")?.parse().map_err(|_| BoundaryError::Format {
                line: 0,
                message: "bad depth".into(),
            })?,
            rects,
            eps: num("eps")?,
            eta: num("eta")?,
            degenerate,
        })
    }
}

/// Children of one mixed box: incomparable sub-boxes around the crossing,
/// the bracket box, then a centre split of anything still wider than half.
///
/// The sub-boxes overlap across the bracket. Cutting at a single point would
/// let a flat stretch of boundary fall just outside every mixed child.
fn split_mixed<M: Membership + ?Sized>(m: &M, r: &Rectangle, eta: f64) -> Vec<Rectangle> {
    let n = r.dim();
    let width = r.max_edge();
    let tol = eta.min(width / 4.0);
    let (p_false, p_true) = diagonal_crossing(m, r, tol);

    let mut out = Vec::new();
    let full = (1usize << n) - 1;
    for mask in 1..full {
        let (bot, top): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    (p_false[i], r.top()[i])
                } else {
                    (r.bot()[i], p_true[i])
                }
            })
            .unzip();
        let sub = Rectangle::new(bot, top);
        if classify_box(m, &sub) == BoxClass::Mixed {
            halve_into(m, sub, width / 2.0, &mut out);
        }
    }
    // every sub-box contains the bracket; it only matters in one dimension
    if out.is_empty() {
        out.push(Rectangle::new(p_false, p_true));
    }
    out
}

fn halve_into<M: Membership + ?Sized>(m: &M, r: Rectangle, limit: f64, out: &mut Vec<Rectangle>) {
    let wide: Vec<usize> = r
        .edges()
        .enumerate()
        .filter(|&(_, e)| e > limit)
        .map(|(i, _)| i)
        .collect();
    if wide.is_empty() {
        out.push(r);
        return;
    }
    let c = r.center();
    for mask in 0..1usize << wide.len() {
        let mut bot = r.bot().to_vec();
        let mut top = r.top().to_vec();
        for (k, &axis) in wide.iter().enumerate() {
            if mask >> k & 1 == 1 {
                bot[axis] = c[axis];
            } else {
                top[axis] = c[axis];
            }
        }
        let piece = Rectangle::new(bot, top);
        if classify_box(m, &piece) == BoxClass::Mixed {
            // rounding at the centre can leave a half one ulp over the limit
            halve_into(m, piece, limit, out);
        }
    }
}

/// Memoized approximations per trace id, for a fixed specification and eta.
///
/// Readers share a lock; a missing depth is computed outside the lock from
/// the deepest stored approximation and then inserted by a single writer.
pub struct BoundaryCache {
    spec_id: String,
    eta: f64,
    chains: RwLock<HashMap<(String, u64), Chain>>,
}

/// Approximations of one trace at depths `0..len`.
type Chain = Vec<Arc<BoundaryApprox>>;

/// Cache key: the id plus the sample bits, so equal ids on different data never collide.
fn trace_key(trace: &Trace) -> (String, u64) {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for (t, v) in trace.samples() {
        t.to_bits().hash(&mut h);
        v.to_bits().hash(&mut h);
    }
    (trace.id().to_string(), h.finish())
}

impl BoundaryCache {
    pub fn new(spec: &ParametricSpec, eta: f64) -> Self {
        Self {
            spec_id: spec.spec_id(),
            eta,
            chains: RwLock::new(HashMap::new()),
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn get(&self, spec: &ParametricSpec, trace: &Trace, depth: usize) -> Arc<BoundaryApprox> {
        debug_assert_eq!(spec.spec_id(), self.spec_id);
        let key = trace_key(trace);
        let deepest = {
            let chains = self.chains.read().expect("cache lock poisoned");
            match chains.get(&key) {
                Some(chain) if chain.len() > depth => return Arc::clone(&chain[depth]),
                Some(chain) => chain.last().cloned(),
                None => None,
            }
        };
        let v = Validity::new(spec, trace);
        let mut fresh = Vec::new();
        let mut current = match deepest {
            Some(b) => b,
            None => {
                let b = Arc::new(BoundaryApprox::initial(&v, &self.spec_id, trace.id(), self.eta));
                fresh.push(Arc::clone(&b));
                b
            }
        };
        while current.depth < depth {
            current = Arc::new(current.refine(&v));
            fresh.push(Arc::clone(&current));
        }
        let mut chains = self.chains.write().expect("cache lock poisoned");
        let chain = chains.entry(key).or_default();
        for b in fresh {
            if b.depth == chain.len() {
                chain.push(b);
            }
        }
        Arc::clone(&chain[depth])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(v: f64) -> Trace {
        let samples: Vec<_> = (0..=20).map(|k| (f64::from(k) / 20.0, v)).collect();
        Trace::new("c", &samples).unwrap()
    }

    fn phi() -> ParametricSpec {
        ParametricSpec::slowdown(1.0, 0.0, 1.0)
    }

    #[test]
    fn classification_examples() {
        let (s, t) = (phi(), constant(0.5));
        let v = Validity::new(&s, &t);
        let r = |b: [f64; 2], tp: [f64; 2]| Rectangle::new(b.to_vec(), tp.to_vec());
        assert_eq!(classify_box(&v, &r([0.0, 0.6], [1.0, 1.0])), BoxClass::AllTrue);
        assert_eq!(classify_box(&v, &r([0.0, 0.0], [0.5, 0.4])), BoxClass::AllFalse);
        assert_eq!(classify_box(&v, &Rectangle::unit(2)), BoxClass::Mixed);
    }

    #[test]
    fn crossing_on_constant_trace() {
        let (s, t) = (phi(), constant(0.5));
        let v = Validity::new(&s, &t);
        let (pf, pt) = diagonal_crossing(&v, &Rectangle::unit(2), 1e-3);
        assert!(!v.contains(&pf) && v.contains(&pt));
        // diagonal point (s, s) holds iff s > 0.5
        assert!((pf[1] - 0.5).abs() <= 1e-3 && (pt[1] - 0.5).abs() <= 1e-3);
        assert!((pt[1] - pf[1]).abs() <= 1e-3);
    }

    #[test]
    fn tight_box_is_its_own_bracket() {
        let (s, t) = (phi(), constant(0.5));
        let v = Validity::new(&s, &t);
        let r = Rectangle::new(vec![0.5, 0.4999], vec![0.50005, 0.50005]);
        let (pf, pt) = diagonal_crossing(&v, &r, 1e-3);
        assert_eq!((pf.as_slice(), pt.as_slice()), (r.bot(), r.top()));
    }

    #[test]
    fn zero_diagonal_returns_midpoint() {
        let (s, t) = (phi(), constant(0.5));
        let v = Validity::new(&s, &t);
        let r = Rectangle::point(vec![0.3, 0.3]);
        let (pf, pt) = diagonal_crossing(&v, &r, 1e-3);
        assert_eq!(pf, vec![0.3, 0.3]);
        assert_eq!(pt, pf);
    }

    #[test]
    fn first_refinement_of_constant_trace() {
        let (s, t) = (phi(), constant(0.5));
        let v = Validity::new(&s, &t);
        let b0 = BoundaryApprox::initial(&v, "s", "c", 1e-4);
        let b1 = b0.refine(&v);
        // both sub-boxes overlap the bracket, so each is just over half
        // wide and gets halved once
        assert!(b1.rects.len() <= 4, "{:?}", b1.rects);
        // the box right of the crossing on the tau axis still contains the
        // vertical part of the boundary at tau = 1
        assert!(b1
            .rects
            .iter()
            .any(|r| r.bot()[0] >= 0.49 && r.top()[0] == 1.0 && r.top()[1] <= 0.51));
        for r in &b1.rects {
            assert_eq!(classify_box(&v, r), BoxClass::Mixed);
        }
    }

    #[test]
    fn all_true_domain_is_degenerate() {
        let s = phi();
        let t = constant(-1.0);
        let v = Validity::new(&s, &t);
        let b = BoundaryApprox::to_depth(&v, "s", "neg", 3, 1e-4);
        assert_eq!(b.degenerate, Some(Degenerate::AllTrue));
        assert_eq!(b.rects, vec![Rectangle::point(vec![0.0, 0.0])]);
        assert_eq!(b.eps, 0.0);
        assert_eq!(b.depth, 3);
    }

    #[test]
    fn depth_zero_is_unit_box() {
        let (s, t) = (phi(), constant(0.5));
        let b = BoundaryApprox::to_depth(&Validity::new(&s, &t), "s", "c", 0, 1e-4);
        assert_eq!(b.rects, vec![Rectangle::unit(2)]);
        assert_eq!(b.eps, 2.0 + 2e-4);
    }

    #[test]
    fn cache_extends_chains() {
        let (s, t) = (phi(), constant(0.5));
        let cache = BoundaryCache::new(&s, 1e-4);
        let b3 = cache.get(&s, &t, 3);
        let b5 = cache.get(&s, &t, 5);
        let direct = BoundaryApprox::to_depth(&Validity::new(&s, &t), &s.spec_id(), "c", 5, 1e-4);
        assert_eq!(*b5, direct);
        assert!(Arc::ptr_eq(&b3, &cache.get(&s, &t, 3)));
    }

    #[test]
    fn file_round_trip() {
        let (s, t) = (phi(), constant(0.5));
        let b = BoundaryApprox::to_depth(&Validity::new(&s, &t), &s.spec_id(), "c", 4, 1e-4);
        let mut buf = Vec::new();
        b.write(&mut buf).unwrap();
        let back = BoundaryApprox::read(buf.as_slice()).unwrap();
        assert_eq!(back, b);
        let bad = String::from_utf8(buf).unwrap().replace("rects = ", "rects = 9");
        assert!(BoundaryApprox::read(bad.as_bytes()).is_err());
    }
}
