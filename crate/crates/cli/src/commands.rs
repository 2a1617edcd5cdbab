//! One function per subcommand. Stages exchange data only through files in
//! the output directory:
//!
//! | file                  | written by | read by          |
//! |-----------------------|------------|------------------|
//! | `boundaries/<id>.bnd` | boundary   |                  |
//! | `distmat.csv`         | distmat    | cluster          |
//! | `labels.csv`          | cluster    | project          |
//! | `projection.txt`      | project    | extract          |
//! | `specs/label_<k>.psl` | extract    |                  |
//! | `dimred_points.csv`   | dimred     |                  |
//! | `dimred_hist.csv`     | dimred     |                  |

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use logdist_core::boundary::{classify_box, BoundaryApprox, BoxClass, Rectangle, Validity};
use logdist_core::distance::{distance_matrix, DistanceMatrix, DistanceOptions};
use logdist_core::learn::{agglomerative, Labeling};
use logdist_core::project::{
    angle_sweep, dimred, extract_label_spec, optimize_projection, DimRed, LabelBox,
    LineProjection, ProjectionChoice,
};
use logdist_core::specdsl::{render, Formula, ParametricSpec};
use logdist_core::trace::Trace;

use crate::config::PipelineConfig;
use crate::files::{
    load_spec, load_trace, load_traces, open, spec_name, write_atomic, Classify, CmdResult,
};

pub const DISTMAT: &str = "distmat.csv";
pub const LABELS: &str = "labels.csv";
pub const PROJECTION: &str = "projection.txt";
pub const DIMRED_POINTS: &str = "dimred_points.csv";
pub const DIMRED_HIST: &str = "dimred_hist.csv";

fn out(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn spec(cfg: &PipelineConfig) -> CmdResult<ParametricSpec> {
    load_spec(cfg.spec_path.as_deref()).input()
}

pub fn distance_options(cfg: &PipelineConfig) -> DistanceOptions {
    DistanceOptions {
        delta: cfg.delta,
        max_depth: cfg.max_depth,
        eta: cfg.eta,
        prune: true,
    }
}

/// Refines until the largest rectangle edge is at most `precision`
/// (default `delta / 4`) and writes `boundaries/<id>.bnd`.
pub fn cmd_boundary(
    cfg: &PipelineConfig,
    trace_id: &str,
    precision: Option<f64>,
) -> CmdResult<PathBuf> {
    let spec = spec(cfg)?;
    let trace = load_trace(&cfg.trace_dir, trace_id).input()?;
    let precision = precision.unwrap_or(cfg.delta / 4.0);
    if !(precision.is_finite() && precision > 0.0) {
        return Err(anyhow!("precision must be positive, got {precision}")).input();
    }
    let v = Validity::new(&spec, &trace);
    let mut b = BoundaryApprox::initial(&v, &spec.spec_id(), trace.id(), cfg.eta);
    while b.degenerate.is_none() && b.max_edge() > precision && b.depth < cfg.max_depth {
        b = b.refine(&v);
    }
    if b.degenerate.is_none() {
        if b.max_edge() > precision {
            log::warn!(
                "trace {trace_id}: max edge {} above {precision} at depth limit {}",
                b.max_edge(),
                cfg.max_depth
            );
        }
        if let Some(r) = b.rects.iter().find(|r| classify_box(&v, r) != BoxClass::Mixed) {
            return Err(anyhow!("rectangle {r:?} of trace {trace_id} is not mixed")).invariant();
        }
    }
    let path = out(cfg, &format!("boundaries/{trace_id}.bnd"));
    write_atomic(&path, |w| Ok(b.write(w)?)).input()?;
    Ok(path)
}

pub fn cmd_distmat(cfg: &PipelineConfig) -> CmdResult<DistanceMatrix> {
    let spec = spec(cfg)?;
    let traces = load_traces(&cfg.trace_dir).input()?;
    let m = distance_matrix(&spec, &traces, &distance_options(cfg)).input()?;
    for (i, j, r) in m.pairs() {
        if !(0.0 <= r.interval.lo && r.interval.lo <= r.interval.hi) {
            return Err(anyhow!("pair ({i}, {j}) has interval {:?}", r.interval)).invariant();
        }
    }
    write_atomic(&out(cfg, DISTMAT), |w| Ok(m.write_csv(w)?)).input()?;
    Ok(m)
}

fn read_distmat(cfg: &PipelineConfig) -> CmdResult<DistanceMatrix> {
    let path = out(cfg, DISTMAT);
    DistanceMatrix::read_csv(open(&path).input()?)
        .with_context(|| format!("in {}", path.display()))
        .input()
}

pub fn cmd_cluster(cfg: &PipelineConfig) -> CmdResult<Labeling> {
    let m = read_distmat(cfg)?;
    let labels = agglomerative(m.ids(), &m.midpoints(), cfg.clustering.k, cfg.linkage().input()?)
        .with_context(|| format!("clustering {}", out(cfg, DISTMAT).display()))
        .input()?;
    write_atomic(&out(cfg, LABELS), |w| Ok(labels.write_csv(w)?)).input()?;
    Ok(labels)
}

fn read_labels(cfg: &PipelineConfig) -> CmdResult<Labeling> {
    let path = out(cfg, LABELS);
    Labeling::read_csv(open(&path).input()?)
        .with_context(|| format!("in {}", path.display()))
        .input()
}

/// Traces in labeling order; every labeled id must have a trace file.
fn labeled_traces(cfg: &PipelineConfig, labels: &Labeling) -> CmdResult<Vec<Trace>> {
    labels
        .ids()
        .iter()
        .map(|id| {
            load_trace(&cfg.trace_dir, id)
                .with_context(|| format!("{} names trace `{id}`", out(cfg, LABELS).display()))
                .input()
        })
        .collect()
}

/// Chosen lines in the order they were added.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFile {
    pub lines: Vec<ProjectionChoice>,
}

impl ProjectionFile {
    /// `line <index> <score> <direction...>` followed by its
    /// `box <label> <bot...> <top...>` records.
    pub fn write<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        for choice in &self.lines {
            let dir: Vec<String> = choice.line.direction().iter().map(f64::to_string).collect();
            writeln!(w, "line {} {} {}", choice.index, choice.score, dir.join(" "))?;
            for b in &choice.boxes {
                let coords: Vec<String> = b
                    .rect
                    .bot()
                    .iter()
                    .chain(b.rect.top())
                    .map(f64::to_string)
                    .collect();
                writeln!(w, "box {} {}", b.label, coords.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let reader = BufReader::new(open(path)?);
        let mut lines: Vec<ProjectionChoice> = Vec::new();
        for (no, text) in reader.lines().enumerate() {
            let text = text?;
            let at = || format!("{}:{}", path.display(), no + 1);
            let mut fields = text.split_whitespace();
            let nums = |fields: std::str::SplitWhitespace| -> anyhow::Result<Vec<f64>> {
                fields
                    .map(|f| f.parse::<f64>().with_context(|| format!("{}: bad number `{f}`", at())))
                    .collect()
            };
            match fields.next() {
                None => continue,
                Some("line") => {
                    let v = nums(fields)?;
                    if v.len() < 3 {
                        bail!("{}: line record needs index, score, direction", at());
                    }
                    let line = LineProjection::through(&v[2..]).with_context(at)?;
                    lines.push(ProjectionChoice {
                        index: v[0] as usize,
                        line,
                        score: v[1],
                        boxes: Vec::new(),
                    });
                }
                Some("box") => {
                    let v = nums(fields)?;
                    let current = lines
                        .last_mut()
                        .ok_or_else(|| anyhow!("{}: box before any line", at()))?;
                    let dim = current.line.dim();
                    if v.len() != 1 + 2 * dim {
                        bail!("{}: box needs a label and {} coordinates", at(), 2 * dim);
                    }
                    let (bot, top) = (v[1..=dim].to_vec(), v[dim + 1..].to_vec());
                    if bot.iter().zip(&top).any(|(b, t)| b > t) {
                        bail!("{}: box bottom exceeds top", at());
                    }
                    current.boxes.push(LabelBox {
                        label: v[0] as usize,
                        rect: Rectangle::new(bot, top),
                    });
                }
                Some(other) => bail!("{}: unknown record `{other}`", at()),
            }
        }
        if lines.is_empty() {
            bail!("{}: no line records", path.display());
        }
        Ok(Self { lines })
    }
}

pub fn cmd_project(cfg: &PipelineConfig) -> CmdResult<ProjectionFile> {
    let spec = spec(cfg)?;
    let labels = read_labels(cfg)?;
    let traces = labeled_traces(cfg, &labels)?;
    let candidates = angle_sweep(spec.dim(), cfg.projection.angle_steps);
    let tol = cfg.projection.tol;
    let first = optimize_projection(&spec, &traces, &labels, &candidates, tol, None).input()?;
    log::info!("line {} separates labels by {}", first.index, first.score);
    let mut lines = vec![first];
    if cfg.projection.lines == 2 {
        let second =
            optimize_projection(&spec, &traces, &labels, &candidates, tol, Some(&lines[0]))
                .input()?;
        log::info!("second line {} raises the separation to {}", second.index, second.score);
        lines.push(second);
    }
    let file = ProjectionFile { lines };
    write_atomic(&out(cfg, PROJECTION), |w| Ok(file.write(w)?)).input()?;
    Ok(file)
}

/// Label specifications, one conjunction per label across all chosen lines.
#[derive(Debug, Clone)]
pub struct Extracted {
    pub label: usize,
    /// Human-readable rendering with normalized corners.
    pub rendered: String,
    pub formula: Formula,
    pub path: PathBuf,
}

pub fn cmd_extract(cfg: &PipelineConfig) -> CmdResult<Vec<Extracted>> {
    let spec = spec(cfg)?;
    let name = spec_name(cfg.spec_path.as_deref());
    let proj_path = out(cfg, PROJECTION);
    let proj = ProjectionFile::read(&proj_path).input()?;
    let mut per_label: BTreeMap<usize, Vec<Rectangle>> = BTreeMap::new();
    for choice in &proj.lines {
        if choice.line.dim() != spec.dim() {
            return Err(anyhow!(
                "{} has {}-dimensional lines, the specification has {} parameters",
                proj_path.display(),
                choice.line.dim(),
                spec.dim()
            ))
            .input();
        }
        for b in &choice.boxes {
            per_label.entry(b.label).or_default().push(b.rect.clone());
        }
    }
    let mut out_specs = Vec::new();
    for (label, rects) in per_label {
        let specs: Vec<_> = rects.iter().map(extract_label_spec).collect();
        let rendered = specs
            .iter()
            .map(|s| s.render(&name))
            .collect::<Vec<_>>()
            .join(" ∧ ");
        let formula = Formula::and(specs.iter().map(|s| s.formula(&spec)).collect());
        let path = out(cfg, &format!("specs/label_{label}.psl"));
        write_atomic(&path, |w| {
            writeln!(w, "# label {label}: {rendered}")?;
            for s in &specs {
                writeln!(w, "# box bot = {:?}, top = {:?}", s.rect.bot(), s.rect.top())?;
            }
            writeln!(w, "spec {}", render(&formula, &[]))?;
            Ok(())
        })
        .input()?;
        out_specs.push(Extracted {
            label,
            rendered,
            formula,
            path,
        });
    }
    Ok(out_specs)
}

fn dimred_line(cfg: &PipelineConfig, dim: usize) -> CmdResult<LineProjection> {
    match cfg.dimred.angle {
        None => Ok(LineProjection::diagonal(dim)),
        Some(_) if dim != 2 => Err(anyhow!(
            "dimred.angle needs a two-parameter specification, this one has {dim}"
        ))
        .input(),
        Some(a) => LineProjection::from_angle(a).input(),
    }
}

pub fn cmd_dimred(cfg: &PipelineConfig) -> CmdResult<DimRed> {
    let spec = spec(cfg)?;
    let base = load_traces(&cfg.trace_dir).input()?;
    let traces: Vec<Trace> = if cfg.dimred.noise_copies == 0 {
        base
    } else {
        base.iter()
            .enumerate()
            .flat_map(|(i, t)| {
                t.augment_noise(
                    cfg.dimred.noise_copies,
                    cfg.seed.wrapping_add(i as u64),
                    1.0,
                    cfg.dimred.noise_std,
                )
            })
            .collect()
    };
    let line = dimred_line(cfg, spec.dim())?;
    let d = dimred(&spec, &traces, &line, cfg.projection.tol, cfg.dimred.bins);
    if d.absent > 0 {
        log::warn!("{} of {} traces miss the line", d.absent, traces.len());
    }
    write_atomic(&out(cfg, DIMRED_POINTS), |w| Ok(d.write_positions(spec.dim(), w)?)).input()?;
    write_atomic(&out(cfg, DIMRED_HIST), |w| Ok(d.write_histogram(w)?)).input()?;
    Ok(d)
}
