//! Pipeline configuration: one TOML file plus command-line overrides.
//!
//! ```toml
//! spec_path = "specs/slowdown.psl"   # omitted: G[tau,1](x < h) on the unit square
//! trace_dir = "traces"               # one `<id>.csv` per trace
//! output_dir = "out"
//! delta = 0.01
//! eta = 1e-4
//! max_depth = 20
//! seed = 0
//!
//! [clustering]
//! method = "agglomerative"
//! k = 3
//! linkage = "complete"
//!
//! [projection]
//! angle_steps = 90
//! tol = 1e-4
//! lines = 1                          # 2 adds a greedy second line
//!
//! [dimred]
//! bins = 20
//! angle = 0.7853981633974483         # omitted: the main diagonal
//! noise_copies = 0                   # noisy copies per trace, N(1, noise_std)
//! noise_std = 0.3
//!
//! [casestudy]
//! per_class = 40
//! gmm_k = 5
//! threshold = 0.3
//! angles = [0.46, 1.36]
//! time_scale = 0.5
//! value_scale = 0.014285714285714285
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use logdist_core::learn::Linkage;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub spec_path: Option<PathBuf>,
    pub trace_dir: PathBuf,
    pub output_dir: PathBuf,
    pub delta: f64,
    pub eta: f64,
    pub max_depth: usize,
    pub seed: u64,
    pub clustering: Clustering,
    pub projection: Projection,
    pub dimred: Dimred,
    pub casestudy: CaseStudy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Clustering {
    pub method: String,
    pub k: usize,
    pub linkage: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Projection {
    pub angle_steps: usize,
    pub tol: f64,
    pub lines: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dimred {
    pub bins: usize,
    pub angle: Option<f64>,
    pub noise_copies: usize,
    pub noise_std: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseStudy {
    pub per_class: usize,
    pub gmm_k: usize,
    pub threshold: f64,
    pub angles: [f64; 2],
    pub time_scale: f64,
    pub value_scale: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            spec_path: None,
            trace_dir: PathBuf::from("traces"),
            output_dir: PathBuf::from("out"),
            delta: 0.01,
            eta: 1e-4,
            max_depth: 20,
            seed: 0,
            clustering: Clustering::default(),
            projection: Projection::default(),
            dimred: Dimred::default(),
            casestudy: CaseStudy::default(),
        }
    }
}

impl Default for Clustering {
    fn default() -> Self {
        Self {
            method: "agglomerative".into(),
            k: 3,
            linkage: "complete".into(),
        }
    }
}

impl Default for Projection {
    fn default() -> Self {
        Self {
            angle_steps: 90,
            tol: 1e-4,
            lines: 1,
        }
    }
}

impl Default for Dimred {
    fn default() -> Self {
        Self {
            bins: 20,
            angle: None,
            noise_copies: 0,
            noise_std: 0.3,
        }
    }
}

impl Default for CaseStudy {
    fn default() -> Self {
        Self {
            per_class: 40,
            gmm_k: 5,
            threshold: 0.3,
            angles: [0.46, 1.36],
            time_scale: 0.5,
            value_scale: 1.0 / 70.0,
        }
    }
}

impl PipelineConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Self =
            toml::from_str(&text).with_context(|| format!("bad config {}", path.display()))?;
        if let Some(base) = path.parent() {
            cfg.spec_path = cfg.spec_path.map(|p| base.join(p));
            cfg.trace_dir = base.join(&cfg.trace_dir);
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta", self.delta),
            ("eta", self.eta),
            ("projection.tol", self.projection.tol),
            ("dimred.noise_std", self.dimred.noise_std),
            ("casestudy.threshold", self.casestudy.threshold),
            ("casestudy.time_scale", self.casestudy.time_scale),
            ("casestudy.value_scale", self.casestudy.value_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                bail!("{name} must be positive, got {v}");
            }
        }
        let counts = [
            ("clustering.k", self.clustering.k),
            ("projection.angle_steps", self.projection.angle_steps),
            ("dimred.bins", self.dimred.bins),
            ("casestudy.per_class", self.casestudy.per_class),
            ("casestudy.gmm_k", self.casestudy.gmm_k),
        ];
        for (name, v) in counts {
            if v == 0 {
                bail!("{name} must be at least 1");
            }
        }
        if !(1..=2).contains(&self.projection.lines) {
            bail!("projection.lines must be 1 or 2, got {}", self.projection.lines);
        }
        if self.clustering.method != "agglomerative" {
            bail!(
                "unsupported clustering.method `{}` (distance matrices are clustered agglomeratively)",
                self.clustering.method
            );
        }
        self.linkage()?;
        Ok(())
    }

    pub fn linkage(&self) -> Result<Linkage> {
        self.clustering
            .linkage
            .parse()
            .map_err(|e| anyhow::anyhow!("clustering.linkage: {e}"))
    }
}
