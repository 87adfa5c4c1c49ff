//! On-disk formats.
//!
//! - Matrix, CSV: one row per line, comma-separated, no header.
//! - Matrix, JSON: `{"rows": r, "cols": c, "data": [...]}` in row-major order,
//!   with an optional `"name"`.
//! - Dataset, JSON-lines: a metadata record, then `X`, then `S` and `A` when
//!   the generating truth is known.
//! - Trace, JSON-lines: a header record, then one `{"m", "A", "logjoint"}`
//!   record per kept draw (`"S"` too with `--keep-sources`).
//! - Fit, JSON: `{method, W, iterations, final_objective, converged}` plus the
//!   objective history and, for samplers, the posterior-mean sources.
//! - Metrics, CSV: [`METRICS_COLUMNS`], one row per fit.
//!
//! Every file embeds the resolved command config: JSON files under `"config"`
//! and CSV files as leading `# key=value` lines.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use pgica_core::Matrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub type Config = BTreeMap<String, String>;

pub const METRICS_COLUMNS: [&str; 12] =
    ["method", "family", "n", "d", "sigma", "seed", "amari", "src", "rmse", "d_pm", "runtime_ms", "status"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub name: Option<String>,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixRecord {
    pub fn named(name: &str, m: &Matrix) -> Self {
        MatrixRecord { name: Some(name.to_string()), rows: m.rows(), cols: m.cols(), data: m.to_vec() }
    }

    pub fn plain(m: &Matrix) -> Self {
        MatrixRecord { name: None, rows: m.rows(), cols: m.cols(), data: m.to_vec() }
    }

    pub fn to_matrix(&self) -> anyhow::Result<Matrix> {
        Ok(Matrix::new(self.rows, self.cols, self.data.clone())?)
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    for r in 0..m.rows() {
        w.write_record(m.row(r).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> anyhow::Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            bail!("{}: row {} has {} fields, expected {}", path.display(), i + 1, rec.len(), cols.unwrap());
        }
        for field in rec.iter() {
            data.push(field.parse::<f64>().with_context(|| format!("{}: row {}: '{field}'", path.display(), i + 1))?);
        }
        rows += 1;
    }
    Ok(Matrix::new(rows, cols.unwrap_or(0), data)?)
}

/// Line 1 of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub protocol: String,
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub family: String,
    pub seed: u64,
    /// Per-column families for benchmark data.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub families: Option<Vec<String>>,
    /// Whether the sources were rescaled to unit variance.
    pub standardized: bool,
    #[serde(default)]
    pub config: Config,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub meta: Option<DatasetMeta>,
    pub x: Matrix,
    pub s: Option<Matrix>,
    pub a: Option<Matrix>,
}

impl DatasetFile {
    pub fn has_truth(&self) -> bool {
        self.s.is_some() && self.a.is_some()
    }
}

pub fn write_dataset(path: &Path, meta: &DatasetMeta, x: &Matrix, truth: Option<(&Matrix, &Matrix)>) -> anyhow::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", serde_json::to_string(meta)?)?;
    writeln!(w, "{}", serde_json::to_string(&MatrixRecord::named("X", x))?)?;
    if let Some((s, a)) = truth {
        writeln!(w, "{}", serde_json::to_string(&MatrixRecord::named("S", s))?)?;
        writeln!(w, "{}", serde_json::to_string(&MatrixRecord::named("A", a))?)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset file, or a bare CSV matrix as truth-free `X`.
pub fn read_dataset(path: &Path) -> anyhow::Result<DatasetFile> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return Ok(DatasetFile { meta: None, x: read_matrix_csv(path)?, s: None, a: None });
    }
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().with_context(|| format!("{} is empty", path.display()))??;
    let meta: DatasetMeta =
        serde_json::from_str(&first).with_context(|| format!("{}: metadata record", path.display()))?;
    let mut matrices = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MatrixRecord =
            serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        matrices.push(rec.to_matrix()?);
    }
    let mut it = matrices.into_iter();
    let x = it.next().with_context(|| format!("{} has no X record", path.display()))?;
    if x.shape() != (meta.n, meta.d) {
        bail!("{}: X is {}x{} but metadata says {}x{}", path.display(), x.rows(), x.cols(), meta.n, meta.d);
    }
    let s = it.next();
    let a = it.next();
    if s.is_some() != a.is_some() {
        bail!("{}: truth needs both S and A", path.display());
    }
    Ok(DatasetFile { meta: Some(meta), x, s, a })
}

/// Streaming writer for Gibbs traces.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path, method: &str, config: &Config) -> anyhow::Result<TraceWriter> {
        let mut out = create(path)?;
        writeln!(out, "{}", json!({ "method": method, "config": config }))?;
        Ok(TraceWriter { out })
    }

    pub fn draw(&mut self, m: usize, a: &Matrix, logjoint: f64, s: Option<&Matrix>) -> anyhow::Result<()> {
        let mut rec = json!({ "m": m, "A": MatrixRecord::plain(a), "logjoint": logjoint });
        if let Some(s) = s {
            rec["S"] = serde_json::to_value(MatrixRecord::plain(s))?;
        }
        writeln!(self.out, "{rec}")?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub method: String,
    #[serde(rename = "W")]
    pub w: MatrixRecord,
    pub iterations: usize,
    pub final_objective: f64,
    /// `null` for samplers.
    pub converged: Option<bool>,
    #[serde(default)]
    pub objective_history: Vec<f64>,
    /// Posterior-mean sources for samplers; point estimators use `X·Wᵀ`.
    #[serde(rename = "S", skip_serializing_if = "Option::is_none", default)]
    pub s: Option<MatrixRecord>,
    #[serde(default)]
    pub config: Config,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_fit(path: &Path) -> anyhow::Result<FitFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing fit file {}", path.display()))
}

pub fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// One metrics CSV row. Optional numbers are written as empty fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub family: String,
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub seed: u64,
    pub amari: Option<f64>,
    pub src: Option<f64>,
    pub rmse: Option<f64>,
    pub d_pm: Option<f64>,
    pub runtime_ms: Option<u64>,
    pub status: String,
}

fn comment_lines(w: &mut impl Write, config: &Config, extra: &[String]) -> anyhow::Result<()> {
    for (k, v) in config {
        writeln!(w, "# {k}={v}")?;
    }
    for line in extra {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Writes a fresh CSV headed by the config lines.
pub fn write_csv<T: Serialize>(path: &Path, config: &Config, notes: &[String], rows: &[T]) -> anyhow::Result<()> {
    let mut out = create(path)?;
    comment_lines(&mut out, config, notes)?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends `row`, creating the file (config lines and header) when absent.
pub fn append_metrics_row(path: &Path, config: &Config, row: &MetricsRow) -> anyhow::Result<()> {
    if !path.exists() {
        return write_csv(path, config, &[], std::slice::from_ref(row));
    }
    let file = std::fs::OpenOptions::new().append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    rdr.deserialize().map(|r| r.with_context(|| format!("reading {}", path.display()))).collect()
}

/// Metrics CSV to a writer (for stdout), with config lines.
pub fn write_metrics_to(w: impl Write, config: &Config, rows: &[MetricsRow]) -> anyhow::Result<()> {
    let mut w = w;
    comment_lines(&mut w, config, &[])?;
    let mut cw = csv::Writer::from_writer(w);
    for r in rows {
        cw.serialize(r)?;
    }
    cw.flush()?;
    Ok(())
}
