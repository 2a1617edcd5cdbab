//! Highway slow-down study on generated data: rescale, project onto two
//! lines, cluster with a Gaussian mixture, keep the cluster of an idealized
//! slow-down, refine it by logical distance to the ideal, and describe the
//! result with its crossing boxes on the two lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::anyhow;
use logdist_core::boundary::{BoundaryCache, Validity};
use logdist_core::distance::{approx_dist_cached, DistanceResult};
use logdist_core::learn::{GmmModel, GmmOptions, Point2};
use logdist_core::project::{
    bounding_box_of, extract_label_spec, project_boundary, LabelSpec, LineProjection,
};
use logdist_core::specdsl::{render, Formula, ParametricSpec};
use logdist_core::synth::{intro_traces, CaseClass, HighwayGenerator};
use logdist_core::trace::{Rescaling, Trace};
use rayon::prelude::*;

use crate::commands::distance_options;
use crate::config::PipelineConfig;
use crate::files::{write_atomic, Classify, CmdResult};

#[derive(Debug, Clone)]
pub struct CaseStudyReport {
    pub generated: BTreeMap<CaseClass, usize>,
    pub kept: BTreeMap<CaseClass, usize>,
    pub cluster_sizes: Vec<usize>,
    pub ideal_feature: Point2,
    pub ideal_cluster: usize,
    /// `(trace id, class, distance to the ideal)` for the ideal's cluster.
    pub candidates: Vec<(String, CaseClass, DistanceResult)>,
    pub refined: Vec<String>,
    pub false_negatives: Vec<String>,
    pub false_positives: Vec<String>,
    /// Rendered box specification of the refined set on each line.
    pub artifact: Vec<String>,
    pub artifact_formula: Formula,
    /// Kept traces on which the learned artifact agrees with the refined set.
    pub artifact_agreement: (usize, usize),
    pub dir: PathBuf,
}

fn feature(spec: &ParametricSpec, t: &Trace, lines: &[LineProjection; 2], tol: f64) -> Option<Point2> {
    let v = Validity::new(spec, t);
    let a = project_boundary(&v, &lines[0], tol)?;
    let b = project_boundary(&v, &lines[1], tol)?;
    Some([a.t, b.t])
}

pub fn cmd_casestudy(cfg: &PipelineConfig) -> CmdResult<CaseStudyReport> {
    let cs = &cfg.casestudy;
    let generator = HighwayGenerator {
        per_class: cs.per_class,
        ..Default::default()
    };
    let rescaling = Rescaling::new(cs.time_scale, cs.value_scale).input()?;
    let horizon = generator.duration * cs.time_scale;
    let spec = ParametricSpec::slowdown(horizon, 0.0, 1.0);
    let tol = cfg.projection.tol;
    let dir = cfg.output_dir.join("casestudy");

    let data: Vec<(Trace, CaseClass)> = generator
        .generate(cfg.seed)
        .into_iter()
        .map(|(t, c)| (t.rescale(rescaling), c))
        .collect();
    let mut generated = BTreeMap::new();
    for (_, c) in &data {
        *generated.entry(*c).or_insert(0) += 1;
    }

    let lines = [
        LineProjection::from_angle(cs.angles[0]).input()?,
        LineProjection::from_angle(cs.angles[1]).input()?,
    ];
    let features: Vec<Option<Point2>> = data
        .par_iter()
        .map(|(t, _)| feature(&spec, t, &lines, tol))
        .collect();
    let kept: Vec<usize> = (0..data.len()).filter(|&i| features[i].is_some()).collect();
    let mut kept_counts = BTreeMap::new();
    for &i in &kept {
        *kept_counts.entry(data[i].1).or_insert(0) += 1;
    }
    log::info!("{} of {} traces cross both lines", kept.len(), data.len());
    let points: Vec<Point2> = kept.iter().map(|&i| features[i].expect("kept")).collect();

    let fit = GmmModel::fit(
        &points,
        &GmmOptions {
            k: cs.gmm_k,
            seed: cfg.seed,
            ..Default::default()
        },
    )
    .input()?;
    if !fit.converged {
        log::warn!("mixture fit stopped at the iteration limit");
    }
    let model = fit.model;
    let assignment: Vec<usize> = points.iter().map(|p| model.predict(p)).collect();
    let mut cluster_sizes = vec![0; model.k()];
    for &a in &assignment {
        cluster_sizes[a] += 1;
    }

    // the first introductory trace, stretched over the study horizon
    let ideal = intro_traces()[0]
        .rescale(Rescaling::new(horizon, 1.0).input()?)
        .with_id("ideal");
    let ideal_feature = feature(&spec, &ideal, &lines, tol)
        .ok_or_else(|| anyhow!("the idealized slow-down misses a projection line"))
        .invariant()?;
    let ideal_cluster = model.predict(&ideal_feature);

    let opts = distance_options(cfg);
    let cache = BoundaryCache::new(&spec, opts.eta);
    let members: Vec<usize> = kept
        .iter()
        .zip(&assignment)
        .filter(|(_, &a)| a == ideal_cluster)
        .map(|(&i, _)| i)
        .collect();
    let candidates: Vec<(String, CaseClass, DistanceResult)> = members
        .par_iter()
        .map(|&i| {
            let d = approx_dist_cached(&spec, &ideal, &data[i].0, &opts, &cache);
            (data[i].0.id().to_string(), data[i].1, d)
        })
        .collect();
    let refined: Vec<String> = candidates
        .iter()
        .filter(|(_, _, d)| d.interval.midpoint() < cs.threshold)
        .map(|(id, _, _)| id.clone())
        .collect();
    let false_negatives: Vec<String> = data
        .iter()
        .filter(|(t, c)| *c == CaseClass::SlowDown && !refined.iter().any(|r| r == t.id()))
        .map(|(t, _)| t.id().to_string())
        .collect();
    let false_positives: Vec<String> = candidates
        .iter()
        .filter(|(id, c, _)| *c != CaseClass::SlowDown && refined.contains(id))
        .map(|(id, _, _)| id.clone())
        .collect();

    // the refined set's crossing box on each of the two lines
    let refined_idx: Vec<usize> = kept
        .iter()
        .copied()
        .filter(|&i| refined.iter().any(|r| r == data[i].0.id()))
        .collect();
    let mut label_specs: Vec<LabelSpec> = Vec::with_capacity(2);
    for (k, line) in lines.iter().enumerate() {
        let pts: Vec<Vec<f64>> = refined_idx
            .iter()
            .map(|&i| line.at(features[i].expect("kept")[k]))
            .collect();
        label_specs.push(extract_label_spec(&bounding_box_of(&pts).invariant()?));
    }
    let artifact: Vec<String> = label_specs.iter().map(|s| s.render("phi")).collect();
    let artifact_formula = Formula::and(label_specs.iter().map(|s| s.formula(&spec)).collect());
    let agree = kept
        .iter()
        .filter(|&&i| {
            let t = &data[i].0;
            let inside = label_specs.iter().all(|s| s.evaluate(&spec, t));
            inside == refined.iter().any(|r| r == t.id())
        })
        .count();

    let report = CaseStudyReport {
        generated,
        kept: kept_counts,
        cluster_sizes,
        ideal_feature,
        ideal_cluster,
        candidates,
        refined,
        false_negatives,
        false_positives,
        artifact,
        artifact_formula,
        artifact_agreement: (agree, kept.len()),
        dir: dir.clone(),
    };

    write_atomic(&dir.join("features.csv"), |w| {
        writeln!(w, "trace_id,class,t_star_1,t_star_2,cluster")?;
        let mut k = 0;
        for (i, (t, c)) in data.iter().enumerate() {
            match features[i] {
                Some(f) => {
                    writeln!(w, "{},{c},{},{},{}", t.id(), f[0], f[1], assignment[k])?;
                    k += 1;
                }
                None => writeln!(w, "{},{c},,,", t.id())?,
            }
        }
        Ok(())
    })
    .input()?;
    write_atomic(&dir.join("gmm.txt"), |w| Ok(model.write(w)?)).input()?;
    write_atomic(&dir.join("distances.csv"), |w| {
        writeln!(w, "trace_id,class,lo,hi,converged")?;
        for (id, c, d) in &report.candidates {
            writeln!(w, "{id},{c},{},{},{}", d.interval.lo, d.interval.hi, d.converged)?;
        }
        Ok(())
    })
    .input()?;
    write_atomic(&dir.join("slowdown.psl"), |w| {
        writeln!(w, "# {}", report.artifact.join(" ∧ "))?;
        writeln!(w, "spec {}", render(&report.artifact_formula, &[]))?;
        Ok(())
    })
    .input()?;
    let text = report.render();
    write_atomic(&dir.join("report.txt"), |w| Ok(w.write_all(text.as_bytes())?)).input()?;
    Ok(report)
}

impl CaseStudyReport {
    /// `key = value` lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let total: usize = self.generated.values().sum();
        let kept: usize = self.kept.values().sum();
        let _ = writeln!(s, "generated = {total}");
        for (c, n) in &self.generated {
            let _ = writeln!(s, "generated.{c} = {n}");
        }
        let _ = writeln!(s, "kept = {kept}");
        let _ = writeln!(s, "filtered_out = {}", total - kept);
        for (c, n) in &self.kept {
            let _ = writeln!(s, "kept.{c} = {n}");
        }
        for (k, n) in self.cluster_sizes.iter().enumerate() {
            let _ = writeln!(s, "cluster.{k} = {n}");
        }
        let _ = writeln!(
            s,
            "ideal.feature = {} {}",
            self.ideal_feature[0], self.ideal_feature[1]
        );
        let _ = writeln!(s, "ideal.cluster = {}", self.ideal_cluster);
        let _ = writeln!(s, "ideal.cluster_size = {}", self.candidates.len());
        let _ = writeln!(s, "refined = {}", self.refined.len());
        let _ = writeln!(s, "false_negatives = {}", self.false_negatives.len());
        let _ = writeln!(s, "false_positives = {}", self.false_positives.len());
        for (k, a) in self.artifact.iter().enumerate() {
            let _ = writeln!(s, "artifact.line_{} = {a}", k + 1);
        }
        let _ = writeln!(
            s,
            "artifact.agreement = {} / {}",
            self.artifact_agreement.0, self.artifact_agreement.1
        );
        s
    }
}
