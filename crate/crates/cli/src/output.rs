//! Artifacts, manifests and plot exports.

use crate::config::RunConfig;
use quasikin::numerics::line_fit;
use quasikin::verification::VerificationReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Regime(String),
    Check(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Regime(_) => 3,
            CliError::Check(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Regime(m) => write!(f, "regime: {m}"),
            CliError::Check(m) => write!(f, "check: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl From<quasikin::Error> for CliError {
    fn from(e: quasikin::Error) -> Self {
        match e {
            quasikin::Error::Config(m) => CliError::Config(m),
            quasikin::Error::Regime(m) | quasikin::Error::Numeric(m) => CliError::Regime(m),
        }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub kind: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub mode: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Canonical TOML of the effective configuration.
    pub config: String,
    pub artifacts: Vec<Artifact>,
}

pub struct OutputDir {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, kind: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            kind: kind.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn csv<S: AsRef<str>>(&mut self, name: &str, kind: &str, header: &[&str], rows: &[Vec<S>]) -> Result<(), CliError> {
        let bytes = csv_bytes(header, rows)?;
        self.write(name, kind, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, kind: &str, value: &T) -> Result<(), CliError> {
        let bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, kind, &bytes)
    }

    /// Writes the manifest, then fails on files it does not reference.
    pub fn finish(self, cfg: &RunConfig, threads: usize, wall: f64) -> Result<(), CliError> {
        let record = RunRecord {
            tool: "quasikin".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode: cfg.mode.name().to_string(),
            seed: cfg.seed,
            threads,
            wall_time_s: wall,
            config: cfg.canonical(),
            artifacts: self.artifacts.clone(),
        };
        let path = self.dir.join(MANIFEST);
        let bytes = serde_json::to_vec_pretty(&record).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        audit(&self.dir, &record)
    }
}

fn csv_bytes<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref())).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Every file in `dir` must be the manifest or one of its artifacts, with
/// a matching checksum.
pub fn audit(dir: &Path, record: &RunRecord) -> Result<(), CliError> {
    let listed: BTreeSet<&str> = record.artifacts.iter().map(|a| a.path.as_str()).collect();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        if !entry.file_type().map_err(|e| io_err(dir, e))?.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name != MANIFEST && !listed.contains(name.as_str()) {
            return Err(CliError::Io(format!("orphan file {name} in {}", dir.display())));
        }
    }
    for a in &record.artifacts {
        let path = dir.join(&a.path);
        let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        if sha256_hex(&bytes) != a.sha256 {
            return Err(CliError::Io(format!("checksum mismatch for {}", a.path)));
        }
    }
    Ok(())
}

fn read_record(path: &Path) -> Result<RunRecord, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn artifact<'a>(record: &'a RunRecord, kind: &str) -> Result<&'a Artifact, CliError> {
    record
        .artifacts
        .iter()
        .find(|a| a.kind == kind)
        .ok_or_else(|| CliError::Io(format!("run has no '{kind}' artifact")))
}

fn read_report(dir: &Path, record: &RunRecord) -> Result<VerificationReport, CliError> {
    let path = dir.join(&artifact(record, "report")?.path);
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse(s: &str) -> Result<f64, CliError> {
    s.parse().map_err(|_| CliError::Io(format!("bad number '{s}' in artifact")))
}

/// Writes (x, y, series) rows for `selector` into `out` (default: an
/// `export` directory next to the record) with its own manifest.
pub fn export(record_path: &Path, selector: &str, out: Option<&Path>) -> Result<(), CliError> {
    if selector.is_empty() {
        return Err(CliError::Config("empty export selector".into()));
    }
    let record = read_record(record_path)?;
    let dir = record_path.parent().unwrap_or(Path::new("."));
    audit(dir, &record)?;
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = if selector == "spectrum" {
        (vec!["x", "y", "series"], spectrum_rows(dir, &record)?)
    } else if let Some(check) = selector.strip_prefix("rate:") {
        (vec!["x", "y", "series", "slope"], rate_rows(dir, &record, check)?)
    } else if selector == "error" {
        let report = read_report(dir, &record)?;
        let rec = report
            .record("main_theorem")
            .ok_or_else(|| CliError::Io("report has no main_theorem record".into()))?;
        let rows = rec
            .rows
            .iter()
            .filter(|r| r.series == "sup_gap")
            .map(|r| vec![fmt_f(r.x), fmt_f(r.value), "E".to_string()])
            .collect();
        (vec!["x", "y", "series"], rows)
    } else {
        return Err(CliError::Config(format!("unknown selector '{selector}'")));
    };
    let out_dir = out.map_or_else(|| dir.join("export"), Path::to_path_buf);
    let mut od = OutputDir::create(&out_dir)?;
    let name = format!("plot_{}.csv", selector.replace(':', "_"));
    od.csv(&name, "plot", &header, &rows)?;
    let manifest = out_dir.join("export_manifest.json");
    let bytes = serde_json::to_vec_pretty(&od.artifacts).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(&manifest, bytes).map_err(|e| io_err(&manifest, e))
}

fn spectrum_rows(dir: &Path, record: &RunRecord) -> Result<Vec<Vec<String>>, CliError> {
    let path = dir.join(&artifact(record, "spectrum")?.path);
    let mut rd = csv::Reader::from_path(&path).map_err(|e| io_err(&path, e))?;
    let header = rd.headers().map_err(|e| io_err(&path, e))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let abs = col("abs_s").ok_or_else(|| CliError::Io("spectrum has no abs_s column".into()))?;
    let tau = col("tau").ok_or_else(|| CliError::Io("spectrum has no tau column".into()))?;
    let (value, label) = match (col("total"), col("value"), col("quantity")) {
        (Some(v), _, _) => (v, None),
        (None, Some(v), q) => (v, q),
        _ => return Err(CliError::Io("spectrum has no value column".into())),
    };
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| io_err(&path, e))?;
        let name = label.map_or("n", |q| &rec[q]);
        let series = if rec[tau].is_empty() {
            name.to_string()
        } else {
            format!("{name}@tau={}", &rec[tau])
        };
        rows.push((parse(&rec[abs])?, vec![rec[abs].to_string(), rec[value].to_string(), series]));
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(rows.into_iter().map(|r| r.1).collect())
}

fn rate_rows(dir: &Path, record: &RunRecord, check: &str) -> Result<Vec<Vec<String>>, CliError> {
    let report = read_report(dir, record)?;
    let rec = report
        .record(check)
        .ok_or_else(|| CliError::Io(format!("report has no '{check}' record")))?;
    let mut series: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rec.rows.iter().filter(|r| r.series.starts_with("gap")) {
        if r.x > 0.0 && r.value > 0.0 {
            let e = series.entry(r.series.as_str()).or_default();
            e.0.push(r.x.ln());
            e.1.push(r.value.ln());
        }
    }
    if series.is_empty() {
        return Err(CliError::Io(format!("'{check}' has no gap series")));
    }
    let mut rows = Vec::new();
    for (name, (xs, ys)) in series {
        let slope = if xs.len() >= 2 { line_fit(&xs, &ys).slope } else { f64::NAN };
        for (x, y) in xs.iter().zip(&ys) {
            rows.push(vec![fmt_f(*x), fmt_f(*y), name.to_string(), fmt_f(slope)]);
        }
    }
    Ok(rows)
}
