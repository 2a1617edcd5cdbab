//! Labelings from distance matrices and from projected parameter points.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("asked for {k} clusters from {n} items")]
    TooManyClusters { k: usize, n: usize },
    #[error("k must be positive")]
    ZeroClusters,
    #[error("distance matrix is not square, symmetric, and zero on the diagonal (entry {0}, {1})")]
    BadMatrix(usize, usize),
    #[error("labeling line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unknown linkage `{0}` (expected single, complete, or average)")]
    UnknownLinkage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    Single,
    #[default]
    Complete,
    Average,
}

impl FromStr for Linkage {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(LearnError::UnknownLinkage(other.to_string())),
        }
    }
}

/// Assignment of every trace id to one of `k` labels `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    ids: Vec<String>,
    labels: Vec<usize>,
    k: usize,
}

impl Labeling {
    /// Relabels arbitrary cluster indices by first appearance so labels are contiguous.
    pub fn new(ids: Vec<String>, raw: &[usize]) -> Self {
        assert_eq!(ids.len(), raw.len(), "one label per id");
        let mut map = BTreeMap::new();
        let labels: Vec<usize> = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Self {
            ids,
            labels,
            k: map.len(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id).map(|i| self.labels[i])
    }

    /// Member indices per label.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            g[l].push(i);
        }
        g
    }

    /// Partition as a canonical set of sorted member lists, independent of label names.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut g = self.groups();
        g.sort();
        g
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "trace_id,label")?;
        for (id, l) in self.ids.iter().zip(&self.labels) {
            writeln!(out, "{id},{l}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, LearnError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let bad = |line: usize, message: String| LearnError::Format { line, message };
        let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["trace_id", "label"] {
            return Err(bad(1, "expected header `trace_id,label`".into()));
        }
        let (mut ids, mut labels) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(0, e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != 2 {
                return Err(bad(line, "expected two fields".into()));
            }
            let l: usize = rec[1]
                .parse()
                .map_err(|_| bad(line, format!("bad label `{}`", &rec[1])))?;
            ids.push(rec[0].to_string());
            labels.push(l);
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; k];
        for &l in &labels {
            used[l] = true;
        }
        if ids.is_empty() || used.iter().any(|u| !u) {
            return Err(bad(0, "labels must form a contiguous range starting at 0".into()));
        }
        Ok(Self { ids, labels, k })
    }
}

/// Bottom-up merging until `k` clusters remain. Equal distances merge the pair
/// whose (smallest member, smallest member) indices are lexicographically least.
pub fn agglomerative(
    ids: &[String],
    dist: &[Vec<f64>],
    k: usize,
    linkage: Linkage,
) -> Result<Labeling, LearnError> {
    let n = dist.len();
    if k == 0 {
        return Err(LearnError::ZeroClusters);
    }
    if k > n {
        return Err(LearnError::TooManyClusters { k, n });
    }
    assert_eq!(ids.len(), n, "one id per matrix row");
    for i in 0..n {
        if dist[i].len() != n || dist[i][i] != 0.0 {
            return Err(LearnError::BadMatrix(i, i));
        }
        for j in 0..i {
            if dist[i][j] != dist[j][i] || dist[i][j].is_nan() {
                return Err(LearnError::BadMatrix(i, j));
            }
        }
    }

    // active clusters are kept sorted by smallest member, so index order is tie order
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut d: Vec<Vec<f64>> = dist.to_vec();
    while members.len() > k {
        let m = members.len();
        let (mut best, mut bi, mut bj) = (f64::INFINITY, 0, 1);
        for i in 0..m {
            for j in i + 1..m {
                if d[i][j] < best {
                    (best, bi, bj) = (d[i][j], i, j);
                }
            }
        }
        let (na, nb) = (members[bi].len() as f64, members[bj].len() as f64);
        for c in 0..m {
            if c == bi || c == bj {
                continue;
            }
            let merged = match linkage {
                Linkage::Single => d[bi][c].min(d[bj][c]),
                Linkage::Complete => d[bi][c].max(d[bj][c]),
                Linkage::Average => (na * d[bi][c] + nb * d[bj][c]) / (na + nb),
            };
            d[bi][c] = merged;
            d[c][bi] = merged;
        }
        let moved = members.remove(bj);
        members[bi].extend(moved);
        d.remove(bj);
        for row in &mut d {
            row.remove(bj);
        }
    }
    let mut raw = vec![0; n];
    for (label, group) in members.iter().enumerate() {
        for &i in group {
            raw[i] = label;
        }
    }
    Ok(Labeling::new(ids.to_vec(), &raw))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: the first centre uniformly, the rest proportional to the
/// squared distance to the nearest chosen centre.
pub fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| sq_dist(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = d2.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[pick].clone());
    }
    centers
}

/// Lloyd's algorithm from a seeded k-means++ start. Returns `(assignments, centres)`.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<(Vec<usize>, Vec<Vec<f64>>), LearnError> {
    if k == 0 {
        return Err(LearnError::ZeroClusters);
    }
    if points.len() < k {
        return Err(LearnError::TooManyClusters { k, n: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_init(points, k, &mut rng);
    let dim = points[0].len();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (p, a) in points.iter().zip(assign.iter_mut()) {
            let mut best = 0;
            for c in 1..k {
                if sq_dist(p, &centers[c]) < sq_dist(p, &centers[best]) {
                    best = c;
                }
            }
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok((assign, centers))
}

/// Mean silhouette coefficient under Euclidean distance. Singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], assign: &[usize]) -> f64 {
    let k = assign.iter().max().map_or(0, |m| m + 1);
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i != j {
                sums[assign[j]] += sq_dist(&points[i], &points[j]).sqrt();
                counts[assign[j]] += 1;
            }
        }
        let own = assign[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

pub type Point2 = [f64; 2];
pub type Cov2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Point2,
    pub cov: Cov2,
}

impl GmmComponent {
    fn log_density(&self, p: &Point2) -> f64 {
        let [[a, b], [c, d]] = self.cov;
        let det = a * d - b * c;
        let (dx, dy) = (p[0] - self.mean[0], p[1] - self.mean[1]);
        // inverse of [[a,b],[c,d]] is [[d,-b],[-c,a]] / det
        let maha = (d * dx * dx - (b + c) * dx * dy + a * dy * dy) / det;
        -0.5 * maha - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln()
    }
}

/// Two-dimensional Gaussian mixture with full covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when the log-likelihood improves by less than this.
    pub tol: f64,
    /// Added to each covariance diagonal after every M-step.
    pub reg: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            max_iter: 200,
            tol: 1e-6,
            reg: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Total log-likelihood of the data under each successive parameter set.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn weighted_moments(points: &[Point2], w: &[f64], reg: f64) -> (f64, Point2, Cov2) {
    let nk: f64 = w.iter().sum();
    let mut mean = [0.0; 2];
    for (p, wi) in points.iter().zip(w) {
        mean[0] += wi * p[0];
        mean[1] += wi * p[1];
    }
    mean = [mean[0] / nk, mean[1] / nk];
    let mut cov = [[0.0; 2]; 2];
    for (p, wi) in points.iter().zip(w) {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        cov[0][0] += wi * dx * dx;
        cov[0][1] += wi * dx * dy;
        cov[1][1] += wi * dy * dy;
    }
    cov[0][0] = cov[0][0] / nk + reg;
    cov[1][1] = cov[1][1] / nk + reg;
    cov[0][1] /= nk;
    cov[1][0] = cov[0][1];
    (nk, mean, cov)
}

impl GmmModel {
    /// Expectation-maximization from a seeded k-means++ start.
    pub fn fit(points: &[Point2], opts: &GmmOptions) -> Result<GmmFit, LearnError> {
        let (k, n) = (opts.k, points.len());
        if k == 0 {
            return Err(LearnError::ZeroClusters);
        }
        if n < k {
            return Err(LearnError::TooManyClusters { k, n });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let as_vec: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        let centers = kmeans_pp_init(&as_vec, k, &mut rng);
        let (_, _, global) = weighted_moments(points, &vec![1.0; n], opts.reg);
        let mut model = GmmModel {
            components: centers
                .iter()
                .map(|c| GmmComponent {
                    weight: 1.0 / k as f64,
                    mean: [c[0], c[1]],
                    cov: global,
                })
                .collect(),
        };

        let mut resp = vec![vec![0.0; n]; k];
        let mut lls = Vec::new();
        let mut converged = false;
        let mut scratch = vec![0.0; k];
        for _ in 0..opts.max_iter {
            // E-step
            let mut ll = 0.0;
            for (i, p) in points.iter().enumerate() {
                for (c, comp) in model.components.iter().enumerate() {
                    scratch[c] = comp.weight.ln() + comp.log_density(p);
                }
                let norm = log_sum_exp(&scratch);
                ll += norm;
                for c in 0..k {
                    resp[c][i] = (scratch[c] - norm).exp();
                }
            }
            if let Some(&prev) = lls.last() {
                if ll - prev < opts.tol {
                    lls.push(ll);
                    converged = true;
                    break;
                }
            }
            lls.push(ll);
            // M-step
            for (c, comp) in model.components.iter_mut().enumerate() {
                let nk: f64 = resp[c].iter().sum();
                if nk <= 1e-12 {
                    // an emptied component keeps its mean and falls back to the global spread
                    comp.weight = 0.0;
                    comp.cov = global;
                    continue;
                }
                let (nk, mean, cov) = weighted_moments(points, &resp[c], opts.reg);
                comp.weight = nk / n as f64;
                comp.mean = mean;
                comp.cov = cov;
            }
            let total: f64 = model.components.iter().map(|c| c.weight).sum();
            for comp in &mut model.components {
                comp.weight /= total;
            }
        }
        Ok(GmmFit {
            model,
            log_likelihoods: lls,
            converged,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Component with the largest weighted density; ties go to the lowest index.
    pub fn predict(&self, p: &Point2) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (c, comp) in self.components.iter().enumerate() {
            let score = comp.weight.ln() + comp.log_density(p);
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        best
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# gaussian mixture model");
        let _ = writeln!(s, "k = {}", self.k());
        for (c, comp) in self.components.iter().enumerate() {
            let _ = writeln!(s, "component {c}");
            let _ = writeln!(s, "weight = {}", comp.weight);
            let _ = writeln!(s, "mean = {} {}", comp.mean[0], comp.mean[1]);
            let [[a, b], [c2, d]] = comp.cov;
            let _ = writeln!(s, "cov = {a} {b} {c2} {d}");
        }
        out.write_all(s.as_bytes())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, LearnError> {
        let mut components: Vec<GmmComponent> = Vec::new();
        let mut k = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let bad = |m: &str| LearnError::Format {
                line: lineno,
                message: m.to_string(),
            };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with("component") {
                components.push(GmmComponent {
                    weight: f64::NAN,
                    mean: [f64::NAN; 2],
                    cov: [[f64::NAN; 2]; 2],
                });
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
            let nums: Vec<f64> = val
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| bad("malformed number")))
                .collect::<Result<_, _>>()?;
            let key = key.trim();
            if key == "k" {
                k = Some(val.trim().parse::<usize>().map_err(|_| bad("bad k"))?);
                continue;
            }
            let comp = components.last_mut().ok_or_else(|| bad("field before `component`"))?;
            match (key, nums.as_slice()) {
                ("weight", [w]) => comp.weight = *w,
                ("mean", [x, y]) => comp.mean = [*x, *y],
                ("cov", [a, b, c, d]) => comp.cov = [[*a, *b], [*c, *d]],
                _ => return Err(bad("unexpected field")),
            }
        }
        let complete = components
            .iter()
            .all(|c| !c.weight.is_nan() && !c.mean[0].is_nan() && !c.cov[0][0].is_nan());
        if k != Some(components.len()) || !complete {
            return Err(LearnError::Format {
                line: 0,
                message: "component count or fields incomplete".into(),
            });
        }
        Ok(Self { components })
    }
}
