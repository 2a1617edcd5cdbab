//! Loading inputs and writing artifacts atomically.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use logdist_core::specdsl::{parse, ParametricSpec};
use logdist_core::trace::{load_trace_csv, Trace};

/// A command failure with its exit status.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable, malformed, or mismatched input (exit 2).
    Input(anyhow::Error),
    /// A computed artifact broke one of its own invariants (exit 3).
    Invariant(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Invariant(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "{e:#}"),
            Failure::Invariant(e) => write!(f, "internal invariant violated: {e:#}"),
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn input(self) -> CmdResult<T>;
    fn invariant(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn invariant(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Invariant(e.into()))
    }
}

/// Writes through a temporary file in the target directory, then renames it
/// into place, so readers never see a partial artifact.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn load_spec(path: Option<&Path>) -> Result<ParametricSpec> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read spec {}", p.display()))?;
            parse(&text).with_context(|| format!("in spec {}", p.display()))
        }
        None => Ok(ParametricSpec::slowdown(1.0, 0.0, 1.0)),
    }
}

/// Name used when rendering instantiated specifications.
pub fn spec_name(path: Option<&Path>) -> String {
    path.and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "phi".into())
}

pub fn trace_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.csv"))
}

pub fn load_trace(dir: &Path, id: &str) -> Result<Trace> {
    let path = trace_path(dir, id);
    let file =
        std::fs::File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    load_trace_csv(id, file).with_context(|| format!("in {}", path.display()))
}

/// Every `*.csv` in `dir`, ordered by file name; ids are the file stems.
pub fn load_traces(dir: &Path) -> Result<Vec<Trace>> {
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read trace directory {}", dir.display()))?;
    let mut ids = Vec::new();
    for e in entries {
        let path = e?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            if let Some(stem) = path.file_stem() {
                ids.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    ids.sort();
    if ids.is_empty() {
        anyhow::bail!("no .csv traces in {}", dir.display());
    }
    ids.iter().map(|id| load_trace(dir, id)).collect()
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))
}
