//! Monte Carlo studies (simulate → estimate → optionally test, repeated) and
//! the interest-rate case study.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::mle_fit;
use crate::el::{estimate_el, ElOptions};
use crate::error::{Error, Result};
use crate::init::start_values;
use crate::io::{csv_error, EstimateReport, Method};
use crate::model::{ModelKind, ModelSpec};
use crate::rng::derive_seed;
use crate::simulate::{simulate_seeded, SamplePath};
use crate::spectest::{bootstrap_test, bootstrap_test_at, TestOptions, TestResult};
use crate::stats;

/// Largest share of failed replicates tolerated by a study.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

/// IG-OU parameters `(λ, a, b)` whose stationary law and monthly changes
/// match the summary statistics of the 1965–1999 3-month T-bill series
/// (mean 0.065, SD 0.026, SD of changes 0.005).
pub const SYNTHETIC_TBILL_THETA: [f64; 3] = [0.224, 0.638, 9.81];
pub const SYNTHETIC_TBILL_LEN: usize = 410;
/// Seed of the bundled `data/tbill_synthetic.csv`.
pub const SYNTHETIC_TBILL_SEED: u64 = 7;

/// Synthetic stand-in for the T-bill series.
pub fn synthetic_tbill(seed: u64) -> Result<SamplePath> {
    let model = ModelSpec::new(ModelKind::IgOu, SYNTHETIC_TBILL_THETA.to_vec(), crate::io::DEFAULT_DELTA)?;
    simulate_seeded(&model, SYNTHETIC_TBILL_LEN, seed, 0, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartPoint {
    /// Start the optimizers at the generating parameter.
    Truth,
    /// Moment-based start values computed from each path.
    Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub null_model: ModelKind,
    pub bootstrap: usize,
    pub alpha: f64,
    pub bandwidths: Option<Vec<f64>>,
    pub reestimate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub model: ModelKind,
    pub theta: Vec<f64>,
    pub n: Vec<usize>,
    pub delta: f64,
    pub reps: usize,
    pub estimators: Vec<Method>,
    pub start: StartPoint,
    pub test: Option<TestSpec>,
    pub seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        ModelSpec::new(self.model, self.theta.clone(), self.delta).map_err(|e| Error::Config(e.to_string()))?;
        if self.n.is_empty() || self.n.iter().any(|&n| n < 30) {
            return Err(Error::Config("every sample size must be at least 30".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        for m in &self.estimators {
            let ok = match m {
                Method::El => true,
                Method::Mle => matches!(self.model, ModelKind::Vsk | ModelKind::Cir | ModelKind::BiOu),
                Method::Amle => self.model == ModelKind::VskMj,
            };
            if !ok {
                return Err(Error::Config(format!("estimator {m:?} is not available for {}", self.model)));
            }
        }
        if let Some(t) = &self.test {
            if t.null_model.dim() != 1 || self.model.dim() != 1 {
                return Err(Error::Config("the specification test is univariate".into()));
            }
            if t.bootstrap == 0 || !(t.alpha > 0.0 && t.alpha < 1.0) {
                return Err(Error::Config("test needs bootstrap >= 1 and alpha in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub method: Method,
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub method: Method,
    pub theta_hat: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub n: usize,
    pub null_model: ModelKind,
    pub completed: usize,
    pub failed: usize,
    /// Rejections by the overall order-statistic rule.
    pub rejections: usize,
    pub rejection_rate: f64,
    /// Per-bandwidth rejections (`p ≤ α`), in bandwidth order.
    pub bandwidth_rejections: Vec<usize>,
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<SummaryRow>,
    pub replicates: Vec<ReplicateRecord>,
    pub tests: Vec<TestSummary>,
    /// Failure counts by error category.
    pub failures: BTreeMap<String, usize>,
}

enum Outcome {
    Fit(Vec<f64>),
    Failed(Error),
}

fn fit_one(kind: ModelKind, method: Method, path: &SamplePath, start: &[f64]) -> Result<Vec<f64>> {
    match method {
        Method::El => {
            let opts = ElOptions { diagnostics: false, ..ElOptions::default() };
            Ok(estimate_el(kind, path, Some(start), &opts)?.theta_hat)
        }
        Method::Mle | Method::Amle => Ok(mle_fit(kind, path, start)?.theta_hat),
    }
}

/// Runs the replicates of a study. Deterministic in the seed: replicate `r`
/// at sample size `n` always uses the same random streams.
pub fn run_mc_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let truth = ModelSpec::new(config.model, config.theta.clone(), config.delta)?;
    let mut rows = Vec::new();
    let mut replicates = Vec::new();
    let mut tests = Vec::new();
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    let mut attempted = 0usize;

    for &n in &config.n {
        let path_seed = derive_seed(config.seed, n as u64);
        let results: Vec<(Vec<Outcome>, Option<Result<TestResult>>)> = (0..config.reps)
            .into_par_iter()
            .map(|r| {
                let path = match simulate_seeded(&truth, n, path_seed, r as u64, None) {
                    Ok(p) => p,
                    Err(e) => {
                        let fits = config
                            .estimators
                            .iter()
                            .map(|_| Outcome::Failed(Error::Numerical(e.to_string())))
                            .collect();
                        return (fits, config.test.as_ref().map(|_| Err(e)));
                    }
                };
                let start = match config.start {
                    StartPoint::Truth => Ok(config.theta.clone()),
                    StartPoint::Moments => start_values(config.model, &path),
                };
                let fits = config
                    .estimators
                    .iter()
                    .map(|&m| match start.as_ref() {
                        Ok(s) => match fit_one(config.model, m, &path, s) {
                            Ok(t) => Outcome::Fit(t),
                            Err(e) => Outcome::Failed(e),
                        },
                        Err(e) => Outcome::Failed(Error::Data(e.to_string())),
                    })
                    .collect();
                let test = config.test.as_ref().map(|spec| run_test(config, spec, &path, n, r));
                (fits, test)
            })
            .collect();

        for (j, &method) in config.estimators.iter().enumerate() {
            let mut fitted: Vec<&Vec<f64>> = Vec::new();
            for (r, (fits, _)) in results.iter().enumerate() {
                attempted += 1;
                match &fits[j] {
                    Outcome::Fit(t) => {
                        fitted.push(t);
                        replicates.push(ReplicateRecord {
                            n,
                            replicate: r,
                            method,
                            theta_hat: Some(t.clone()),
                            error: None,
                        });
                    }
                    Outcome::Failed(e) => {
                        *failures.entry(e.category().to_string()).or_default() += 1;
                        replicates.push(ReplicateRecord {
                            n,
                            replicate: r,
                            method,
                            theta_hat: None,
                            error: Some(e.to_string()),
                        });
                    }
                }
            }
            for (k, name) in config.model.param_names().iter().enumerate() {
                let values: Vec<f64> = fitted.iter().map(|t| t[k]).collect();
                rows.push(SummaryRow {
                    n,
                    method,
                    parameter: name.to_string(),
                    truth: config.theta[k],
                    mean: if values.is_empty() { f64::NAN } else { stats::mean(&values) },
                    sd: if values.len() > 1 { stats::sd(&values) } else { f64::NAN },
                    count: values.len(),
                });
            }
        }

        if let Some(spec) = &config.test {
            let mut done: Vec<&TestResult> = Vec::new();
            let mut failed = 0;
            for (_, t) in &results {
                attempted += 1;
                match t.as_ref().expect("test requested") {
                    Ok(res) => done.push(res),
                    Err(e) => {
                        failed += 1;
                        *failures.entry(e.category().to_string()).or_default() += 1;
                    }
                }
            }
            let k = done.first().map(|d| d.bandwidths.len()).unwrap_or(0);
            let rejections = done.iter().filter(|d| d.reject).count();
            tests.push(TestSummary {
                n,
                null_model: spec.null_model,
                completed: done.len(),
                failed,
                rejections,
                rejection_rate: if done.is_empty() { f64::NAN } else { rejections as f64 / done.len() as f64 },
                bandwidth_rejections: (0..k)
                    .map(|i| done.iter().filter(|d| d.p_values.get(i).is_some_and(|&p| p <= spec.alpha)).count())
                    .collect(),
                p_values: done.iter().map(|d| d.p_value).collect(),
            });
        }
    }

    let failed: usize = failures.values().sum();
    if failed as f64 > MAX_FAILURE_SHARE * attempted as f64 {
        let taxonomy: Vec<String> = failures.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        return Err(Error::Numerical(format!(
            "{failed} of {attempted} replicate fits failed ({})",
            taxonomy.join(", ")
        )));
    }
    Ok(StudyReport { config: config.clone(), rows, replicates, tests, failures })
}

fn run_test(config: &StudyConfig, spec: &TestSpec, path: &SamplePath, n: usize, r: usize) -> Result<TestResult> {
    let seed = derive_seed(derive_seed(config.seed ^ 0x7e57, n as u64), r as u64);
    let mut opts = TestOptions::new(spec.bootstrap, spec.alpha, seed);
    opts.bandwidths = spec.bandwidths.clone();
    opts.reestimate = spec.reestimate;
    if spec.null_model == config.model && config.start == StartPoint::Truth {
        let fit = estimate_el(spec.null_model, path, Some(&config.theta), &opts.el)?;
        bootstrap_test_at(spec.null_model, path, &fit, &opts)
    } else {
        bootstrap_test(spec.null_model, path, &opts)
    }
}

impl StudyReport {
    /// `n,method,parameter,true,mean,sd` rows.
    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "method", "parameter", "true", "mean", "sd"]).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record([
                row.n.to_string(),
                method_name(row.method).to_string(),
                row.parameter.clone(),
                format!("{:?}", row.truth),
                format!("{:?}", row.mean),
                format!("{:?}", row.sd),
            ])
            .map_err(csv_error)?;
        }
        into_string(w)
    }

    /// `n,null_model,bandwidth,rejection_rate` with the overall test last.
    pub fn test_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "null_model", "bandwidth", "rejection_rate"]).map_err(csv_error)?;
        for t in &self.tests {
            let denom = t.completed.max(1) as f64;
            for (i, c) in t.bandwidth_rejections.iter().enumerate() {
                w.write_record([
                    t.n.to_string(),
                    t.null_model.slug().to_string(),
                    format!("h{}", i + 1),
                    format!("{:?}", *c as f64 / denom),
                ])
                .map_err(csv_error)?;
            }
            w.write_record([
                t.n.to_string(),
                t.null_model.slug().to_string(),
                "overall".into(),
                format!("{:?}", t.rejection_rate),
            ])
            .map_err(csv_error)?;
        }
        into_string(w)
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::El => "el",
        Method::Mle => "mle",
        Method::Amle => "amle",
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub diff_mean: f64,
    pub diff_sd: f64,
}

impl DataSummary {
    pub fn of(path: &SamplePath) -> Self {
        let x = path.coordinate(0);
        let d = stats::diff(&x);
        DataSummary {
            n: x.len(),
            mean: stats::mean(&x),
            sd: stats::sd(&x),
            diff_mean: stats::mean(&d),
            diff_sd: stats::sd(&d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyConfig {
    pub models: Vec<ModelKind>,
    pub bootstrap: usize,
    pub alpha: f64,
    pub bandwidths: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        CaseStudyConfig {
            models: ModelKind::UNIVARIATE.to_vec(),
            bootstrap: 99,
            alpha: 0.05,
            bandwidths: None,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub summary: DataSummary,
    pub estimates: Vec<EstimateReport>,
    pub tests: Vec<TestResult>,
}

/// Fits every configured model by EL (and by MLE/AMLE where a likelihood
/// exists) and runs the bootstrap test with each model as the null.
pub fn run_case_study(data: &SamplePath, config: &CaseStudyConfig) -> Result<CaseStudyReport> {
    if data.dim() != 1 {
        return Err(Error::Data("the case study needs a univariate series".into()));
    }
    let mut estimates = Vec::new();
    let mut tests = Vec::new();
    for (i, &kind) in config.models.iter().enumerate() {
        if kind.dim() != 1 {
            return Err(Error::Config(format!("{kind} is not a univariate model")));
        }
        let el = estimate_el(kind, data, None, &ElOptions::default())?;
        estimates.push(EstimateReport::from(&el));
        if kind != ModelKind::IgOu {
            let start = start_values(kind, data)?;
            estimates.push(EstimateReport::from(&mle_fit(kind, data, &start)?));
        }
        let mut opts = TestOptions::new(config.bootstrap, config.alpha, derive_seed(config.seed, i as u64));
        opts.bandwidths = config.bandwidths.clone();
        tests.push(bootstrap_test_at(kind, data, &el, &opts)?);
    }
    Ok(CaseStudyReport { summary: DataSummary::of(data), estimates, tests })
}

impl CaseStudyReport {
    /// `model,method,parameter,estimate,std_error`.
    pub fn estimates_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "method", "parameter", "estimate", "std_error"]).map_err(csv_error)?;
        for e in &self.estimates {
            for (k, name) in e.parameters.iter().enumerate() {
                let se = e.std_errors.as_ref().map(|s| format!("{:?}", s[k])).unwrap_or_default();
                w.write_record([
                    e.model.slug().to_string(),
                    method_name(e.method).to_string(),
                    name.clone(),
                    format!("{:?}", e.theta_hat[k]),
                    se,
                ])
                .map_err(csv_error)?;
            }
        }
        into_string(w)
    }

    /// `model,bandwidth,statistic,bootstrap_q95,p_value` with an `overall` row
    /// per model.
    pub fn tests_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "bandwidth", "statistic", "bootstrap_q95", "p_value"]).map_err(csv_error)?;
        for t in &self.tests {
            for i in 0..t.bandwidths.len() {
                w.write_record([
                    t.null_model.slug().to_string(),
                    format!("{:?}", t.bandwidths[i]),
                    format!("{:?}", t.statistics[i]),
                    format!("{:?}", t.bootstrap_q95[i]),
                    format!("{:?}", t.p_values[i]),
                ])
                .map_err(csv_error)?;
            }
            w.write_record([
                t.null_model.slug().to_string(),
                "overall".into(),
                format!("{:?}", t.t_n),
                format!("{:?}", t.overall_q95),
                format!("{:?}", t.p_value),
            ])
            .map_err(csv_error)?;
        }
        into_string(w)
    }
}

/// Caps rayon's global pool at `CCF_EL_THREADS` threads when the variable is
/// set. Has no effect once the pool is running.
pub fn init_thread_pool() -> Result<()> {
    let Ok(value) = std::env::var("CCF_EL_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Config(format!("CCF_EL_THREADS must be a positive integer, found {value:?}")))?;
    // An already-initialized pool is not an error for callers.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Writes `contents` to `out`, creating parent directories.
pub fn write_text(out: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, contents)?;
    Ok(())
}
