//! Ensemble data model, on-disk format and windowed access to runs.
//!
//! An ensemble on disk is a JSON manifest plus one CSV per run:
//!
//! ```text
//! { "k": 7, "runs": [ { "id": "r0", "d": 2.3, "beta": -2.7, "file": "runs/r0.csv" } ] }
//! ```
//!
//! Each CSV has the header `t,p0x,p0y,p0z,...,p{k-1}z` and one row per time
//! step. Row indices in errors are 0-based time-step indices (the header is
//! not counted).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accepted deviation of a particle orientation norm from 1 before load-time
/// renormalization.
pub const NORM_TOLERANCE: f64 = 1e-3;

/// Norms closer to 1 than this are left untouched, so files written by the
/// generator load back bit-for-bit.
pub const RENORMALIZE_THRESHOLD: f64 = 1e-12;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("run {run}: cannot read {path}: {source}")]
    RunFile {
        run: String,
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("run {run}: bad header: {message}")]
    Header { run: String, message: String },
    #[error("run {run}, row {row}: malformed CSV: {message}")]
    Csv { run: String, row: usize, message: String },
    #[error("run {run}, row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        run: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("run {run}, row {row}: non-finite value in column {column}")]
    NonFinite { run: String, row: usize, column: usize },
    #[error("run {run}, row {row}: time is not strictly increasing")]
    NonMonotonic { run: String, row: usize },
    #[error("run {run}: needs at least 2 time steps, found {found}")]
    TooFewSamples { run: String, found: usize },
    #[error("run {run}, row {row}: particle {particle} orientation norm {norm} outside [{lo}, {hi}]",
        lo = 1.0 - NORM_TOLERANCE, hi = 1.0 + NORM_TOLERANCE)]
    OrientationNorm {
        run: String,
        row: usize,
        particle: usize,
        norm: f64,
    },
    #[error("run {run}: non-finite parameter value")]
    InvalidParameter { run: String },
    #[error("duplicate run id {0}")]
    DuplicateRunId(String),
    #[error("run {run}: feature dimension {found} does not match ensemble dimension {expected}")]
    DimensionMismatch { run: String, expected: usize, found: usize },
    #[error("invalid window [{t_start}, {t_end}]")]
    InvalidWindow { t_start: f64, t_end: f64 },
    #[error("run {run}: window [{t_start}, {t_end}] selects {samples} samples, need at least 2")]
    EmptyWindow {
        run: String,
        t_start: f64,
        t_end: f64,
        samples: usize,
    },
    #[error("particle {particle} out of range for k = {k}")]
    ParticleOutOfRange { particle: usize, k: usize },
}

impl EnsembleError {
    /// Run the error refers to, if any.
    pub fn run_id(&self) -> Option<&str> {
        use EnsembleError::*;
        match self {
            RunFile { run, .. }
            | Header { run, .. }
            | Csv { run, .. }
            | ColumnCount { run, .. }
            | NonFinite { run, .. }
            | NonMonotonic { run, .. }
            | TooFewSamples { run, .. }
            | OrientationNorm { run, .. }
            | InvalidParameter { run }
            | DimensionMismatch { run, .. }
            | EmptyWindow { run, .. } => Some(run),
            DuplicateRunId(run) => Some(run),
            _ => None,
        }
    }

    /// Time-step row the error refers to, if any.
    pub fn row(&self) -> Option<usize> {
        use EnsembleError::*;
        match self {
            Csv { row, .. }
            | ColumnCount { row, .. }
            | NonFinite { row, .. }
            | NonMonotonic { row, .. }
            | OrientationNorm { row, .. } => Some(*row),
            _ => None,
        }
    }

    /// True when the manifest itself could not be read.
    pub fn is_not_found(&self) -> bool {
        matches!(self, EnsembleError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub d: f64,
    pub beta: f64,
}

impl ParameterPoint {
    pub fn new(d: f64, beta: f64) -> Self {
        Self { d, beta }
    }

    pub fn is_finite(&self) -> bool {
        self.d.is_finite() && self.beta.is_finite()
    }
}

/// Inclusive time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_start: f64,
    pub t_end: f64,
}

impl Window {
    pub fn new(t_start: f64, t_end: f64) -> Result<Self, EnsembleError> {
        if t_start.is_nan() || t_end.is_nan() || t_start > t_end {
            return Err(EnsembleError::InvalidWindow { t_start, t_end });
        }
        Ok(Self { t_start, t_end })
    }

    /// Window covering every sample.
    pub fn all() -> Self {
        Self {
            t_start: f64::NEG_INFINITY,
            t_end: f64::INFINITY,
        }
    }

    /// Open-ended bounds default to the full time axis.
    pub fn from_bounds(from: Option<f64>, to: Option<f64>) -> Result<Self, EnsembleError> {
        Self::new(from.unwrap_or(f64::NEG_INFINITY), to.unwrap_or(f64::INFINITY))
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_start <= t && t <= self.t_end
    }
}

impl Default for Window {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn offset(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("unknown axis {other:?}, expected x, y or z")),
        }
    }
}

/// One simulation run: a time axis and a row-major `T × D` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    id: String,
    params: ParameterPoint,
    times: Vec<f64>,
    features: Vec<f64>,
    dim: usize,
}

impl Run {
    /// Builds a run and checks the structural invariants (shape, finiteness,
    /// strictly increasing times, unit orientation blocks). Orientation blocks
    /// inside the tolerance band are renormalized.
    pub fn new(
        id: impl Into<String>,
        params: ParameterPoint,
        times: Vec<f64>,
        mut features: Vec<f64>,
        dim: usize,
    ) -> Result<Self, EnsembleError> {
        let id = id.into();
        if !params.is_finite() {
            return Err(EnsembleError::InvalidParameter { run: id });
        }
        if dim == 0 || !dim.is_multiple_of(3) || features.len() != times.len() * dim {
            return Err(EnsembleError::DimensionMismatch {
                run: id,
                expected: times.len() * dim,
                found: features.len(),
            });
        }
        if times.len() < 2 {
            return Err(EnsembleError::TooFewSamples {
                run: id,
                found: times.len(),
            });
        }
        for (row, t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(EnsembleError::NonFinite {
                    run: id,
                    row,
                    column: 0,
                });
            }
            if row > 0 && *t <= times[row - 1] {
                return Err(EnsembleError::NonMonotonic { run: id, row });
            }
        }
        for (row, chunk) in features.chunks_mut(dim).enumerate() {
            if let Some(c) = chunk.iter().position(|v| !v.is_finite()) {
                return Err(EnsembleError::NonFinite {
                    run: id,
                    row,
                    column: c + 1,
                });
            }
            normalize_orientations(chunk).map_err(|(particle, norm)| EnsembleError::OrientationNorm {
                run: id.clone(),
                row,
                particle,
                norm,
            })?;
        }
        Ok(Self {
            id,
            params,
            times,
            features,
            dim,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn params(&self) -> ParameterPoint {
        self.params
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particles(&self) -> usize {
        self.dim / 3
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// View over every sample.
    pub fn view(&self) -> RunView<'_> {
        RunView {
            id: &self.id,
            params: self.params,
            times: &self.times,
            features: &self.features,
            dim: self.dim,
        }
    }

    pub fn slice(&self, w: &Window) -> Result<RunView<'_>, EnsembleError> {
        self.view().slice(w)
    }

    pub fn component_series(&self, particle: usize, axis: Axis) -> Result<(Vec<f64>, Vec<f64>), EnsembleError> {
        self.view().component_series(particle, axis)
    }
}

fn normalize_orientations(row: &mut [f64]) -> Result<(), (usize, f64)> {
    for (p, block) in row.chunks_mut(3).enumerate() {
        let norm = (block[0] * block[0] + block[1] * block[1] + block[2] * block[2]).sqrt();
        if !(1.0 - NORM_TOLERANCE..=1.0 + NORM_TOLERANCE).contains(&norm) {
            return Err((p, norm));
        }
        if (norm - 1.0).abs() > RENORMALIZE_THRESHOLD {
            block.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(())
}

/// Borrowed, contiguous range of a run's samples.
#[derive(Debug, Clone, Copy)]
pub struct RunView<'a> {
    id: &'a str,
    params: ParameterPoint,
    times: &'a [f64],
    features: &'a [f64],
    dim: usize,
}

impl<'a> RunView<'a> {
    /// View over raw row-major data without any validation. Mostly useful
    /// for feeding the analysis kernels synthetic matrices.
    pub fn from_raw(id: &'a str, times: &'a [f64], features: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && features.len() == times.len() * dim, "shape mismatch");
        Self {
            id,
            params: ParameterPoint::new(0.0, 0.0),
            times,
            features,
            dim,
        }
    }

    pub fn id(&self) -> &'a str {
        self.id
    }

    pub fn params(&self) -> ParameterPoint {
        self.params
    }

    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    pub fn features(&self) -> &'a [f64] {
        self.features
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &'a [f64]> + 'a {
        self.features.chunks_exact(self.dim)
    }

    /// Restricts the view to `t_start <= t <= t_end`. Fails when fewer than
    /// two samples remain.
    pub fn slice(&self, w: &Window) -> Result<RunView<'a>, EnsembleError> {
        let lo = self.times.partition_point(|&t| t < w.t_start);
        let hi = self.times.partition_point(|&t| t <= w.t_end);
        let samples = hi.saturating_sub(lo);
        if samples < 2 {
            return Err(EnsembleError::EmptyWindow {
                run: self.id.to_string(),
                t_start: w.t_start,
                t_end: w.t_end,
                samples,
            });
        }
        Ok(RunView {
            id: self.id,
            params: self.params,
            times: &self.times[lo..hi],
            features: &self.features[lo * self.dim..hi * self.dim],
            dim: self.dim,
        })
    }

    pub fn component_series(&self, particle: usize, axis: Axis) -> Result<(Vec<f64>, Vec<f64>), EnsembleError> {
        let k = self.dim / 3;
        if particle >= k {
            return Err(EnsembleError::ParticleOutOfRange { particle, k });
        }
        let col = 3 * particle + axis.offset();
        let values = self.rows().map(|r| r[col]).collect();
        Ok((self.times.to_vec(), values))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    id: String,
    k: usize,
    runs: Vec<Run>,
}

impl Ensemble {
    pub fn new(id: impl Into<String>, k: usize, runs: Vec<Run>) -> Result<Self, EnsembleError> {
        let mut seen = HashSet::new();
        for run in &runs {
            if run.dim() != 3 * k {
                return Err(EnsembleError::DimensionMismatch {
                    run: run.id.clone(),
                    expected: 3 * k,
                    found: run.dim(),
                });
            }
            if !seen.insert(run.id.as_str()) {
                return Err(EnsembleError::DuplicateRunId(run.id.clone()));
            }
        }
        Ok(Self { id: id.into(), k, runs })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        3 * self.k
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn run(&self, id: &str) -> Option<&Run> {
        self.runs.iter().find(|r| r.id == id)
    }

    pub fn run_ids(&self) -> impl Iterator<Item = &str> {
        self.runs.iter().map(|r| r.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub k: usize,
    pub runs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub d: f64,
    pub beta: f64,
    pub file: String,
}

/// Resolves `path` to a manifest file: a directory means `<dir>/manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// Loads and validates an ensemble from a manifest file or a directory
/// containing `manifest.json`.
pub fn load_ensemble(path: impl AsRef<Path>) -> Result<Ensemble, EnsembleError> {
    let manifest_file = manifest_path(path.as_ref());
    let text = fs::read_to_string(&manifest_file).map_err(|source| EnsembleError::Io {
        path: manifest_file.clone(),
        source,
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| EnsembleError::Manifest {
        path: manifest_file.clone(),
        message: e.to_string(),
    })?;
    let base = manifest_file.parent().unwrap_or(Path::new("."));
    let default_id = base
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ensemble".to_string());
    load_from_manifest(&manifest, base, default_id)
}

/// Loads the runs of an already-parsed manifest; run files resolve against `base`.
pub fn load_from_manifest(manifest: &Manifest, base: &Path, default_id: String) -> Result<Ensemble, EnsembleError> {
    if manifest.k == 0 {
        return Err(EnsembleError::Manifest {
            path: base.to_path_buf(),
            message: "k must be positive".into(),
        });
    }
    let runs = manifest
        .runs
        .iter()
        .map(|entry| load_run(entry, base, manifest.k))
        .collect::<Result<Vec<_>, _>>()?;
    Ensemble::new(manifest.id.clone().unwrap_or(default_id), manifest.k, runs)
}

/// Expected CSV header for `k` particles.
pub fn csv_header(k: usize) -> Vec<String> {
    let mut header = Vec::with_capacity(1 + 3 * k);
    header.push("t".to_string());
    for p in 0..k {
        for axis in ["x", "y", "z"] {
            header.push(format!("p{p}{axis}"));
        }
    }
    header
}

fn load_run(entry: &ManifestEntry, base: &Path, k: usize) -> Result<Run, EnsembleError> {
    let run = entry.id.clone();
    let params = ParameterPoint::new(entry.d, entry.beta);
    if !params.is_finite() {
        return Err(EnsembleError::InvalidParameter { run });
    }
    let path = base.join(&entry.file);
    let bytes = fs::read(&path).map_err(|source| EnsembleError::RunFile {
        run: run.clone(),
        path: path.clone(),
        source,
    })?;
    let columns = 1 + 3 * k;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| EnsembleError::Header {
        run: run.clone(),
        message: e.to_string(),
    })?;
    let expected = csv_header(k);
    if header.len() != columns {
        return Err(EnsembleError::Header {
            run,
            message: format!("expected {columns} columns (1 + 3k), found {}", header.len()),
        });
    }
    if let Some((found, want)) = header.iter().zip(&expected).find(|(h, e)| h.trim() != e.as_str()) {
        return Err(EnsembleError::Header {
            run,
            message: format!("expected column {want:?}, found {found:?}"),
        });
    }

    let mut times = Vec::new();
    let mut features = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EnsembleError::Csv {
            run: run.clone(),
            row,
            message: e.to_string(),
        })?;
        if record.len() != columns {
            return Err(EnsembleError::ColumnCount {
                run,
                row,
                expected: columns,
                found: record.len(),
            });
        }
        for (column, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| EnsembleError::Csv {
                run: run.clone(),
                row,
                message: format!("column {column}: cannot parse {field:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(EnsembleError::NonFinite { run, row, column });
            }
            if column == 0 {
                times.push(value);
            } else {
                features.push(value);
            }
        }
    }
    Run::new(run, params, times, features, 3 * k)
}

/// Serializes a run to the CSV format read by [`load_ensemble`]. Floats use
/// the shortest representation that parses back to the same value.
pub fn run_to_csv(run: &Run) -> String {
    let mut out = String::with_capacity(run.features.len() * 22);
    out.push_str(&csv_header(run.particles()).join(","));
    out.push('\n');
    for (i, t) in run.times.iter().enumerate() {
        write!(out, "{t:?}").unwrap();
        for v in run.row(i) {
            write!(out, ",{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes `manifest.json` and one CSV per run under `dir`.
pub fn write_ensemble(ensemble: &Ensemble, dir: &Path) -> io::Result<Manifest> {
    let runs_dir = dir.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let mut entries = Vec::with_capacity(ensemble.runs.len());
    for run in &ensemble.runs {
        let file = format!("runs/{}.csv", run.id);
        fs::write(dir.join(&file), run_to_csv(run))?;
        entries.push(ManifestEntry {
            id: run.id.clone(),
            d: run.params.d,
            beta: run.params.beta,
            file,
        });
    }
    let manifest = Manifest {
        id: Some(ensemble.id.clone()),
        k: ensemble.k,
        runs: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}
