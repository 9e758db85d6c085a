//! CSV paths, JSON reports and run manifests.
//!
//! Paths are stored as `t,x` (or `t,x1,x2`) with consecutive integer `t`.
//! Floats are written in Rust's shortest round-trip form, so writing and
//! reading a path reproduces it bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{LikelihoodMethod, LogLikResult};
use crate::el::{EstimateResult, GridSummary};
use crate::error::{Error, Result};
use crate::model::ModelKind;
use crate::simulate::SamplePath;
use crate::spectest::TestResult;

/// Monthly sampling, the default interval in years.
pub const DEFAULT_DELTA: f64 = 1.0 / 12.0;

/// Reads a path with header `t,x` or `t,x1,x2`.
pub fn ingest_csv(path: &Path, delta: f64) -> Result<SamplePath> {
    let file = fs::File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, delta)
}

/// [`ingest_csv`] from any reader.
pub fn read_csv<R: std::io::Read>(reader: R, delta: f64) -> Result<SamplePath> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let dim = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["t", "x"] => 1,
        ["t", "x1", "x2"] => 2,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header t,x or t,x1,x2, found {}", header.join(",")),
            })
        }
    };
    let mut values = Vec::new();
    let mut previous: Option<i64> = None;
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() != dim + 1 {
            return Err(Error::Parse { line, message: format!("expected {} fields, found {}", dim + 1, record.len()) });
        }
        let t: i64 = record[0]
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("t must be an integer, found {:?}", &record[0]) })?;
        if let Some(p) = previous {
            if t <= p {
                return Err(Error::Parse { line, message: format!("t must increase, found {t} after {p}") });
            }
            if t != p + 1 {
                return Err(Error::Gap { line, expected: p + 1, found: t });
            }
        }
        previous = Some(t);
        for k in 0..dim {
            let v: f64 = record[k + 1].parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse {:?} as a number", &record[k + 1]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: "non-finite value".into() });
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::Data("the file holds no observations".into()));
    }
    SamplePath::new(dim, values, delta)
}

/// Writes `path` with `t` running from 1.
pub fn write_csv(out: &Path, path: &SamplePath) -> Result<()> {
    let mut w = csv::Writer::from_path(out).map_err(csv_error)?;
    write_records(&mut w, path)?;
    w.flush()?;
    Ok(())
}

/// The CSV text of a path.
pub fn csv_string(path: &SamplePath) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_records(&mut w, path)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn write_records<W: std::io::Write>(w: &mut csv::Writer<W>, path: &SamplePath) -> Result<()> {
    if path.dim() == 1 {
        w.write_record(["t", "x"]).map_err(csv_error)?;
    } else {
        w.write_record(["t", "x1", "x2"]).map_err(csv_error)?;
    }
    for t in 0..path.len() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(path.row(t).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(csv_error)?;
    }
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("{other:?}")),
    }
}

/// Writes pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize>(out: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(out, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    El,
    Mle,
    Amle,
}

impl From<LikelihoodMethod> for Method {
    fn from(m: LikelihoodMethod) -> Self {
        match m {
            LikelihoodMethod::Mle => Method::Mle,
            LikelihoodMethod::Amle => Method::Amle,
        }
    }
}

/// Common JSON schema for EL and likelihood fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub model: ModelKind,
    pub parameters: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub el_value: Option<f64>,
    pub loglik: Option<f64>,
    pub q2n_norm: Option<f64>,
    pub grid: Option<GridSummary>,
    pub n: usize,
    pub seed: Option<u64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub note: Option<String>,
}

impl From<&EstimateResult> for EstimateReport {
    fn from(r: &EstimateResult) -> Self {
        EstimateReport {
            method: Method::El,
            model: r.model,
            parameters: names(r.model),
            theta_hat: r.theta_hat.clone(),
            std_errors: r.std_errors(),
            el_value: Some(r.el_value),
            loglik: None,
            q2n_norm: r.q2n_norm.is_finite().then_some(r.q2n_norm),
            grid: Some(r.grid.clone()),
            n: r.n,
            seed: r.seed,
            iterations: r.iterations,
            evaluations: r.evaluations,
            note: r.covariance_error.clone(),
        }
    }
}

impl From<&LogLikResult> for EstimateReport {
    fn from(r: &LogLikResult) -> Self {
        EstimateReport {
            method: r.method.into(),
            model: r.model,
            parameters: names(r.model),
            theta_hat: r.theta_hat.clone(),
            std_errors: r.hessian_se.clone(),
            el_value: None,
            loglik: Some(r.loglik),
            q2n_norm: None,
            grid: None,
            n: r.n,
            seed: r.seed,
            iterations: r.iterations,
            evaluations: r.evaluations,
            note: r.se_error.clone(),
        }
    }
}

/// Bandwidth-by-bandwidth statistics with the bootstrap 95% quantile, plus an
/// `overall` row for the max statistic.
pub fn test_plot_csv(result: &TestResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bandwidth", "statistic", "bootstrap_q95"]).map_err(csv_error)?;
    for (h, s, q) in result.plot_rows() {
        w.write_record([h, format!("{s:?}"), format!("{q:?}")]).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn names(kind: ModelKind) -> Vec<String> {
    kind.param_names().iter().map(|s| s.to_string()).collect()
}

/// Hex SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let text = serde_json::to_string(config)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub wall_seconds: f64,
    pub version: String,
}

/// Manifest location for an output file: `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Refuses to replace existing outputs unless `force` is set or they were
/// produced by the same configuration.
pub fn check_overwrite(out: &Path, hash: &str, force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    let manifest = manifest_path(out);
    if manifest.exists() {
        let text = fs::read_to_string(&manifest)?;
        let previous: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("unreadable manifest {}: {e}", manifest.display())))?;
        if previous.config_hash != hash {
            return Err(Error::Config(format!(
                "{} was produced by a different configuration (hash {}); pass --force to overwrite",
                out.display(),
                previous.config_hash
            )));
        }
        return Ok(());
    }
    if out.exists() {
        return Err(Error::Config(format!("{} exists and has no manifest; pass --force to overwrite", out.display())));
    }
    Ok(())
}
