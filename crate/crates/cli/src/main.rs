use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ccf_el::baselines::{mle_fit, LikelihoodMethod};
use ccf_el::el::{estimate_el, ElOptions};
use ccf_el::init::start_values;
use ccf_el::io::{self, check_overwrite, config_hash, manifest_path, EstimateReport, Manifest, Method, DEFAULT_DELTA};
use ccf_el::spectest::{bootstrap_test, TestOptions};
use ccf_el::study::{self, CaseStudyConfig, StartPoint, StudyConfig, TestSpec};
use ccf_el::{simulate_seeded, Error, ModelKind, ModelSpec, Result, SamplePath};

#[derive(Parser)]
#[command(
    name = "ccf-el",
    version,
    about = "Empirical-likelihood estimation and specification tests for Markov models via conditional characteristic functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model to a CSV path by EL, MLE or AMLE.
    Estimate(EstimateArgs),
    /// Bootstrap specification test of a null model.
    Test(TestArgs),
    /// Monte Carlo study: simulate, estimate and optionally test, repeatedly.
    McStudy(McStudyArgs),
    /// Fit and test every univariate model on one interest-rate series.
    CaseStudy(CaseStudyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    El,
    Mle,
    Amle,
}

impl From<EstimatorArg> for Method {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::El => Method::El,
            EstimatorArg::Mle => Method::Mle,
            EstimatorArg::Amle => Method::Amle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Truth,
    Moments,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    /// Parameters as name=value pairs, e.g. kappa=0.858,alpha=0.089,sigma=0.047.
    #[arg(long)]
    theta: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, value_enum, default_value = "el")]
    estimator: EstimatorArg,
    /// Starting values (name=value pairs); moment-based when omitted.
    #[arg(long)]
    theta: Option<String>,
    /// Recorded in the report.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON report; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long, value_parser = parse_model)]
    null_model: ModelKind,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 99)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated bandwidths; cross-validated multiples when omitted.
    #[arg(long, value_delimiter = ',')]
    bandwidths: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON report; the plot CSV goes next to it as `<stem>.plot.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct McStudyArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long)]
    theta: String,
    /// One or more comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Comma-separated estimators.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "el")]
    estimator: Vec<EstimatorArg>,
    #[arg(long, value_enum, default_value = "moments")]
    start: StartArg,
    /// Run the bootstrap test of this null on every replicate.
    #[arg(long, value_parser = parse_model)]
    null_model: Option<ModelKind>,
    #[arg(long, default_value_t = 99)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_delimiter = ',')]
    bandwidths: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Summary CSV; per-replicate JSON and test CSV go next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct CaseStudyArgs {
    /// Series CSV; the synthetic T-bill stand-in when omitted.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 99)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_delimiter = ',')]
    bandwidths: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

/// Parses `name=value,...` (any order, all names required) or a bare
/// comma-separated list in canonical order.
fn parse_theta(kind: ModelKind, text: &str) -> Result<Vec<f64>> {
    let names = kind.param_names();
    let parts: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let number =
        |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("cannot parse parameter value {s:?}")));
    if parts.iter().all(|p| !p.contains('=')) {
        if parts.len() != names.len() {
            return Err(Error::Config(format!("{kind} takes {} parameters ({})", names.len(), names.join(","))));
        }
        return parts.iter().map(|p| number(p)).collect();
    }
    let mut theta = vec![None; names.len()];
    for part in parts {
        let (key, value) =
            part.split_once('=').ok_or_else(|| Error::Config(format!("expected name=value, found {part:?}")))?;
        let idx = names
            .iter()
            .position(|n| *n == key.trim())
            .ok_or_else(|| Error::Config(format!("{kind} has no parameter {key:?}; expected {}", names.join(","))))?;
        if theta[idx].replace(number(value)?).is_some() {
            return Err(Error::Config(format!("parameter {key} given twice")));
        }
    }
    theta
        .into_iter()
        .zip(names)
        .map(|(v, n)| v.ok_or_else(|| Error::Config(format!("missing parameter {n}"))))
        .collect()
}

fn load(input: &Path, delta: f64, kind: ModelKind) -> Result<SamplePath> {
    let path = io::ingest_csv(input, delta)?;
    if path.dim() != kind.dim() {
        return Err(Error::Data(format!("{kind} needs {}-dimensional data, the file has {}", kind.dim(), path.dim())));
    }
    Ok(path)
}

/// `dir/stem.suffix` for an output `dir/stem.ext`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Output files of one run, checked before any work starts and written
/// together with a manifest.
struct Outputs {
    command: &'static str,
    hash: String,
    config: serde_json::Value,
    seed: Option<u64>,
    paths: Vec<PathBuf>,
    started: Instant,
}

impl Outputs {
    fn prepare<C: Serialize>(
        command: &'static str,
        config: &C,
        seed: Option<u64>,
        paths: Vec<PathBuf>,
        force: bool,
    ) -> Result<Self> {
        let hash = config_hash(config)?;
        for p in &paths {
            check_overwrite(p, &hash, force)?;
        }
        Ok(Outputs { command, hash, config: serde_json::to_value(config)?, seed, paths, started: Instant::now() })
    }

    fn write(self, contents: &[String]) -> Result<()> {
        for (p, text) in self.paths.iter().zip(contents) {
            study::write_text(p, text)?;
        }
        let manifest = Manifest {
            command: self.command.into(),
            config_hash: self.hash,
            config: self.config,
            outputs: self.paths.clone(),
            seed: self.seed,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        };
        for p in &self.paths {
            io::write_json(&manifest_path(p), &manifest)?;
        }
        Ok(())
    }
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let theta = parse_theta(args.model, &args.theta)?;
    let model = ModelSpec::new(args.model, theta.clone(), args.delta).map_err(|e| Error::Config(e.to_string()))?;
    if args.n < 2 {
        return Err(Error::Config("n must be at least 2".into()));
    }
    let config = serde_json::json!({
        "model": args.model, "theta": theta, "n": args.n, "delta": args.delta, "seed": args.seed,
    });
    let outputs = Outputs::prepare("simulate", &config, Some(args.seed), vec![args.out.clone()], args.force)?;
    let path = simulate_seeded(&model, args.n, args.seed, 0, None)?;
    outputs.write(&[io::csv_string(&path)?])
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let data = load(&args.input, args.delta, args.model)?;
    let start = match &args.theta {
        Some(t) => Some(parse_theta(args.model, t)?),
        None => None,
    };
    let method: Method = args.estimator.into();
    let config = serde_json::json!({
        "model": args.model, "input": args.input, "delta": args.delta, "estimator": method,
        "theta": start, "seed": args.seed,
    });
    let outputs = match &args.out {
        Some(out) => Some(Outputs::prepare("estimate", &config, args.seed, vec![out.clone()], args.force)?),
        None => None,
    };
    let mut report = match method {
        Method::El => EstimateReport::from(&estimate_el(args.model, &data, start.as_deref(), &ElOptions::default())?),
        Method::Mle | Method::Amle => {
            let available: Method =
                LikelihoodMethod::for_model(args.model).map_err(|e| Error::Config(e.to_string()))?.into();
            if available != method {
                return Err(Error::Config(format!(
                    "{kind} supports --estimator {available:?}, not {method:?}",
                    kind = args.model
                )));
            }
            let init = match start {
                Some(s) => s,
                None => start_values(args.model, &data)?,
            };
            EstimateReport::from(&mle_fit(args.model, &data, &init)?)
        }
    };
    report.seed = args.seed;
    let text = json_text(&report)?;
    match outputs {
        Some(o) => o.write(&[text]),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn test(args: TestArgs) -> Result<()> {
    let data = load(&args.input, args.delta, args.null_model)?;
    let mut opts = TestOptions::new(args.bootstrap, args.alpha, args.seed);
    opts.bandwidths = args.bandwidths.clone();
    let config = serde_json::json!({
        "null_model": args.null_model, "input": args.input, "delta": args.delta, "bootstrap": args.bootstrap,
        "alpha": args.alpha, "bandwidths": args.bandwidths, "seed": args.seed,
    });
    let outputs = match &args.out {
        Some(out) => Some(Outputs::prepare(
            "test",
            &config,
            Some(args.seed),
            vec![out.clone(), sibling(out, "plot.csv")],
            args.force,
        )?),
        None => None,
    };
    let result = bootstrap_test(args.null_model, &data, &opts)?;
    let text = json_text(&result)?;
    match outputs {
        Some(o) => o.write(&[text, io::test_plot_csv(&result)?]),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn mc_study(args: McStudyArgs) -> Result<()> {
    let theta = parse_theta(args.model, &args.theta)?;
    let config = StudyConfig {
        model: args.model,
        theta,
        n: args.n.clone(),
        delta: args.delta,
        reps: args.reps,
        estimators: args.estimator.iter().map(|&e| e.into()).collect(),
        start: match args.start {
            StartArg::Truth => StartPoint::Truth,
            StartArg::Moments => StartPoint::Moments,
        },
        test: args.null_model.map(|null_model| TestSpec {
            null_model,
            bootstrap: args.bootstrap,
            alpha: args.alpha,
            bandwidths: args.bandwidths.clone(),
            reestimate: true,
        }),
        seed: args.seed,
    };
    config.validate()?;
    let mut paths = vec![args.out.clone(), sibling(&args.out, "replicates.json")];
    if config.test.is_some() {
        paths.push(sibling(&args.out, "tests.csv"));
    }
    let outputs = Outputs::prepare("mc-study", &config, Some(args.seed), paths, args.force)?;
    let report = study::run_mc_study(&config)?;
    let mut contents = vec![report.table_csv()?, json_text(&report)?];
    if config.test.is_some() {
        contents.push(report.test_csv()?);
    }
    outputs.write(&contents)
}

fn case_study(args: CaseStudyArgs) -> Result<()> {
    let data = match &args.input {
        Some(p) => load(p, args.delta, ModelKind::Vsk)?,
        None => study::synthetic_tbill(study::SYNTHETIC_TBILL_SEED)?,
    };
    let config = CaseStudyConfig {
        bootstrap: args.bootstrap,
        alpha: args.alpha,
        bandwidths: args.bandwidths.clone(),
        seed: args.seed,
        ..CaseStudyConfig::default()
    };
    let hashed = serde_json::json!({ "input": args.input, "delta": args.delta, "study": config });
    let paths = vec![args.out.join("estimates.csv"), args.out.join("tests.csv"), args.out.join("report.json")];
    let outputs = Outputs::prepare("case-study", &hashed, Some(args.seed), paths, args.force)?;
    let report = study::run_case_study(&data, &config)?;
    for t in &report.tests {
        eprintln!(
            "{:<7} T_n = {:>9.4}  p = {:.3}  {}",
            t.null_model.label(),
            t.t_n,
            t.p_value,
            if t.reject { "rejected" } else { "not rejected" }
        );
    }
    outputs.write(&[report.estimates_csv()?, report.tests_csv()?, json_text(&report)?])
}

fn run(cli: Cli) -> Result<()> {
    study::init_thread_pool()?;
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Test(a) => test(a),
        Command::McStudy(a) => mc_study(a),
        Command::CaseStudy(a) => case_study(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
