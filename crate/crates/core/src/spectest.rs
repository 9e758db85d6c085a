//! Kernel-smoothed empirical-likelihood specification test.
//!
//! For a frequency τ and a state x the local ratio `ℓ_nh(τ, x; θ)` solves the
//! EL dual on the kernel-weighted residuals `K_h(x − X_t) ε⃗(τ, X_t; θ)`. The
//! integrated ratio averages it over a test-mode frequency grid and a state
//! grid, the statistic `T_n` maximizes `h^{−1/2}(ℓ_nh − 2)` over a bandwidth
//! set, and a parametric bootstrap from the fitted null calibrates `T_n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::el::dual::solve_lambda;
use crate::el::grid::{build_test_grid, FrequencyGrid};
use crate::el::objective::{ElProblem, MAX_INFEASIBLE_SHARE};
use crate::el::{estimate_el, minimize_el_with, ElOptions, EstimateResult};
use crate::error::{Error, Result};
use crate::model::{residual, FrequencyPoint, InstrumentMode, ModelKind, ModelSpec};
use crate::optim::NelderMeadOptions;
use crate::simulate::{simulate_seeded, SamplePath};
use crate::stats;

/// Bandwidth multipliers applied to the cross-validated reference.
pub const DEFAULT_MULTIPLIERS: [f64; 5] = [0.7, 0.85, 1.0, 1.2, 1.45];
/// Equispaced state nodes of π₂.
pub const STATE_NODES: usize = 21;
/// Share of the sample range covered by the state grid.
pub const STATE_COVERAGE: f64 = 0.9;
/// Largest share of bootstrap replicates allowed to fail.
pub const MAX_BOOTSTRAP_FAILURES: f64 = 0.05;

const CV_GRID: usize = 30;
/// Nelder–Mead relative tolerance for the null fit and bootstrap refits.
pub const REFIT_TOL: f64 = 1e-4;
/// Observations required in the narrowest window at every state node.
pub const MIN_WINDOW_OBS: usize = 10;
const CV_RANGE: (f64, f64) = (0.02, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelForm {
    /// `15/16 (1 − u²)²` on `[−1, 1]`
    Biweight,
    /// `1/2` on `[−1, 1]`
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub form: KernelForm,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(form: KernelForm, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::Parameter(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec { form, bandwidth })
    }

    pub fn biweight(bandwidth: f64) -> Result<Self> {
        KernelSpec::new(KernelForm::Biweight, bandwidth)
    }

    /// `K(u)`
    pub fn kernel(&self, u: f64) -> f64 {
        match self.form {
            KernelForm::Biweight => stats::biweight(u),
            KernelForm::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// `K_h(d) = K(d/h)/h`
    pub fn weight(&self, d: f64) -> f64 {
        self.kernel(d / self.bandwidth) / self.bandwidth
    }
}

/// Bandwidths `h_i = c_i h` for increasing multipliers `c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSet {
    reference: f64,
    multipliers: Vec<f64>,
}

impl BandwidthSet {
    pub fn new(reference: f64, multipliers: Vec<f64>) -> Result<Self> {
        if !(reference.is_finite() && reference > 0.0) {
            return Err(Error::Parameter(format!("reference bandwidth must be positive, got {reference}")));
        }
        if multipliers.is_empty() {
            return Err(Error::Parameter("bandwidth set is empty".into()));
        }
        if multipliers.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Parameter("bandwidth multipliers must be positive".into()));
        }
        if multipliers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("bandwidth multipliers must be strictly increasing".into()));
        }
        Ok(BandwidthSet { reference, multipliers })
    }

    /// The default five-point set around `reference`.
    pub fn around(reference: f64) -> Result<Self> {
        BandwidthSet::new(reference, DEFAULT_MULTIPLIERS.to_vec())
    }

    /// An explicit list of bandwidths (sorted; the smallest is the reference).
    pub fn from_bandwidths(mut bandwidths: Vec<f64>) -> Result<Self> {
        bandwidths.sort_by(f64::total_cmp);
        let reference = *bandwidths.first().ok_or_else(|| Error::Parameter("bandwidth set is empty".into()))?;
        if !(reference > 0.0) {
            return Err(Error::Parameter("bandwidths must be positive".into()));
        }
        BandwidthSet::new(reference, bandwidths.iter().map(|h| h / reference).collect())
    }

    pub fn reference(&self) -> f64 {
        self.reference
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.multipliers.iter().map(|c| c * self.reference).collect()
    }
}

/// Local smoothed log-EL ratio `ℓ_nh(τ, x; θ)` at one frequency and state.
///
/// Errors with [`Error::SparseNeighborhood`] when fewer than 3 observations
/// fall inside the kernel window and with [`Error::ConvexHull`] when the
/// weighted residuals do not surround the origin.
pub fn local_smoothed_el(
    tau: &FrequencyPoint,
    x: f64,
    model: &ModelSpec,
    data: &SamplePath,
    kernel: &KernelSpec,
) -> Result<f64> {
    if model.dim() != 1 || data.dim() != 1 {
        return Err(Error::Parameter("the smoothed test is univariate".into()));
    }
    let mut z = Vec::new();
    for t in 0..data.len() - 1 {
        let k = kernel.weight(x - data.row(t)[0]);
        if k > 0.0 {
            let e = residual(model, tau, data.row(t), data.row(t + 1), InstrumentMode::Test)?;
            z.push([k * e.re, k * e.im]);
        }
    }
    window_ratio(&z)
}

fn window_ratio(z: &[[f64; 2]]) -> Result<f64> {
    if z.len() < 3 {
        return Err(Error::SparseNeighborhood(z.len()));
    }
    if z.iter().all(|v| v[0] == 0.0 && v[1] == 0.0) {
        return Ok(0.0);
    }
    let sol = solve_lambda(z)?;
    let total: f64 = z.iter().map(|v| (sol.lambda[0] * v[0] + sol.lambda[1] * v[1]).ln_1p()).sum();
    Ok((2.0 * total).max(0.0))
}

/// `21` equispaced states between the 5% and 95% sample quantiles.
pub fn state_grid(data: &SamplePath) -> Vec<f64> {
    let mut x = data.coordinate(0);
    x.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - STATE_COVERAGE);
    let (a, b) = (stats::quantile_sorted(&x, tail), stats::quantile_sorted(&x, 1.0 - tail));
    (0..STATE_NODES).map(|i| a + (b - a) * i as f64 / (STATE_NODES - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedEl {
    pub value: f64,
    /// (τ, x) cells skipped for a sparse window or an infeasible dual,
    /// counted with the multiplicity of the frequency grid.
    pub skipped: usize,
    pub total: usize,
}

/// Precomputed residuals and state grid for evaluating `ℓ_nh(θ)` at several
/// bandwidths.
struct SmoothedProblem<'a> {
    problem: ElProblem,
    states: Vec<f64>,
    conditioning: &'a [f64],
    form: KernelForm,
}

impl<'a> SmoothedProblem<'a> {
    fn new(
        kind: ModelKind,
        data: &SamplePath,
        grid: &FrequencyGrid,
        states: Vec<f64>,
        conditioning: &'a [f64],
        form: KernelForm,
    ) -> Result<Self> {
        if kind.dim() != 1 {
            return Err(Error::Parameter("the smoothed test is univariate".into()));
        }
        if grid.mode() != InstrumentMode::Test {
            return Err(Error::Parameter("the smoothed test needs a test-mode grid".into()));
        }
        Ok(SmoothedProblem { problem: ElProblem::new(kind, data, grid)?, states, conditioning, form })
    }

    fn evaluate(&self, model: &ModelSpec, bandwidth: f64) -> Result<SmoothedEl> {
        let kernel = KernelSpec::new(self.form, bandwidth)?;
        let residuals = self.problem.residuals(model)?;
        let state_weight = 1.0 / self.states.len() as f64;
        let mut value = 0.0;
        let mut feasible = 0.0;
        let mut bad = 0.0;
        let mut skipped = 0;
        let mut total = 0;
        let mut z = Vec::new();
        for &x in &self.states {
            let window: Vec<(usize, f64)> = self
                .conditioning
                .iter()
                .enumerate()
                .filter_map(|(t, &c)| {
                    let k = kernel.weight(x - c);
                    (k > 0.0).then_some((t, k))
                })
                .collect();
            if window.len() < MIN_WINDOW_OBS {
                // Too little data near this state: it drops out of π₂.
                let count: usize = self.problem.nodes.iter().map(|node| node.count).sum();
                total += count;
                skipped += count;
                continue;
            }
            for (node, eps) in self.problem.nodes.iter().zip(&residuals) {
                let w = node.weight * state_weight;
                total += node.count;
                let outcome = if eps.is_empty() {
                    Ok(0.0)
                } else {
                    z.clear();
                    z.extend(window.iter().map(|&(t, k)| [k * eps[t].re, k * eps[t].im]));
                    window_ratio(&z)
                };
                match outcome {
                    Ok(r) => {
                        value += w * r;
                        feasible += w;
                    }
                    Err(Error::SparseNeighborhood(_))
                    | Err(Error::ConvexHull)
                    | Err(Error::MaxIter(_))
                    | Err(Error::Numerical(_)) => {
                        bad += w;
                        skipped += node.count;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if !(feasible > 0.0) || bad > MAX_INFEASIBLE_SHARE * (feasible + bad) {
            return Err(Error::Degenerate { infeasible: skipped, total });
        }
        Ok(SmoothedEl { value: value / feasible, skipped, total })
    }
}

/// `ℓ_nh(θ) = ∫∫ ℓ_nh(τ, x; θ) π₁(τ) π₂(x)` over a test-mode frequency grid
/// and the given state nodes (uniform weights). Skipped cells are dropped and
/// the weights renormalized.
pub fn integrated_smoothed_el(
    model: &ModelSpec,
    data: &SamplePath,
    kernel: &KernelSpec,
    grid: &FrequencyGrid,
    states: &[f64],
) -> Result<SmoothedEl> {
    if states.is_empty() {
        return Err(Error::Parameter("state grid is empty".into()));
    }
    let x = data.coordinate(0);
    let cond = &x[..x.len().saturating_sub(1)];
    SmoothedProblem::new(model.kind(), data, grid, states.to_vec(), cond, kernel.form)?
        .evaluate(model, kernel.bandwidth)
}

/// Least-squares leave-one-out cross-validation bandwidth of the biweight
/// Nadaraya–Watson regression of `X_{t+1}` on `X_t`, minimized over 30
/// log-spaced bandwidths in `[0.02, 1]·sd(X)`. A point with no neighbours is
/// predicted by the sample mean.
pub fn cv_bandwidth(data: &SamplePath) -> Result<f64> {
    if data.dim() != 1 {
        return Err(Error::Data("bandwidth selection is univariate".into()));
    }
    if data.len() < 50 {
        return Err(Error::Data(format!("cross-validation needs at least 50 observations, got {}", data.len())));
    }
    let x = data.coordinate(0);
    let cond = &x[..x.len() - 1];
    let resp = &x[1..];
    let fallback = stats::mean(resp);
    let sd = stats::sd(&x);
    let (lo, hi) = (CV_RANGE.0 * sd, CV_RANGE.1 * sd);
    let mut best = (f64::INFINITY, lo);
    for i in 0..CV_GRID {
        let h = lo * (hi / lo).powf(i as f64 / (CV_GRID - 1) as f64);
        let mut score = 0.0;
        for (t, &c) in cond.iter().enumerate() {
            let mut den = 0.0;
            let mut num = 0.0;
            for (s, &d) in cond.iter().enumerate() {
                if s == t {
                    continue;
                }
                let k = stats::biweight((c - d) / h);
                if k > 0.0 {
                    den += k;
                    num += k * resp[s];
                }
            }
            let fit = if den > 0.0 { num / den } else { fallback };
            score += (resp[t] - fit).powi(2);
        }
        if score < best.0 {
            best = (score, h);
        }
    }
    Ok(best.1)
}

/// Smallest bandwidth whose narrowest window (multiplier `min_multiplier`)
/// holds at least [`MIN_WINDOW_OBS`] conditioning observations at every
/// node of [`state_grid`].
pub fn window_floor(data: &SamplePath, min_multiplier: f64) -> Result<f64> {
    if data.dim() != 1 {
        return Err(Error::Data("bandwidth selection is univariate".into()));
    }
    let x = data.coordinate(0);
    let cond = &x[..x.len() - 1];
    if cond.len() < MIN_WINDOW_OBS {
        return Err(Error::Data(format!("need at least {MIN_WINDOW_OBS} observations")));
    }
    let mut widest: f64 = 0.0;
    let mut dist = Vec::with_capacity(cond.len());
    for s in state_grid(data) {
        dist.clear();
        dist.extend(cond.iter().map(|c| (c - s).abs()));
        dist.select_nth_unstable_by(MIN_WINDOW_OBS - 1, f64::total_cmp);
        widest = widest.max(dist[MIN_WINDOW_OBS - 1]);
    }
    // The biweight support is open, so step just past the k-th distance.
    Ok(widest * (1.0 + 1e-9) / min_multiplier)
}

/// Cross-validated bandwidth, raised to [`window_floor`] for the default
/// multipliers when the kernel windows would be sparse.
pub fn reference_bandwidth(data: &SamplePath) -> Result<f64> {
    Ok(cv_bandwidth(data)?.max(window_floor(data, DEFAULT_MULTIPLIERS[0])?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBandwidthStat {
    pub bandwidths: Vec<f64>,
    /// Raw `ℓ_nh_i(θ̂)`.
    pub statistics: Vec<f64>,
    /// `h_i^{−1/2}(ℓ_nh_i − 2)`.
    pub standardized: Vec<f64>,
    pub t_n: f64,
    pub skipped: Vec<usize>,
}

/// Standardized statistic `h^{−1/2}(ℓ − 2)`.
pub fn standardize(statistic: f64, bandwidth: f64) -> f64 {
    (statistic - 2.0) / bandwidth.sqrt()
}

/// `T_n = max_i h_i^{−1/2}(ℓ_nh_i − 2)` from per-bandwidth ratios.
pub fn max_standardized(bandwidths: &[f64], statistics: &[f64]) -> f64 {
    bandwidths.iter().zip(statistics).map(|(&h, &l)| standardize(l, h)).fold(f64::NEG_INFINITY, f64::max)
}

/// Per-bandwidth `ℓ_nh_i(θ̂)` and `T_n` on the test grid for the fitted null.
pub fn multi_bandwidth_stat(
    model: &ModelSpec,
    data: &SamplePath,
    bandwidths: &[f64],
    grid: &FrequencyGrid,
    form: KernelForm,
) -> Result<MultiBandwidthStat> {
    if bandwidths.is_empty() {
        return Err(Error::Parameter("bandwidth set is empty".into()));
    }
    let x = data.coordinate(0);
    let cond = &x[..x.len() - 1];
    let problem = SmoothedProblem::new(model.kind(), data, grid, state_grid(data), cond, form)?;
    let mut statistics = Vec::with_capacity(bandwidths.len());
    let mut skipped = Vec::with_capacity(bandwidths.len());
    for &h in bandwidths {
        let s = problem.evaluate(model, h)?;
        statistics.push(s.value);
        skipped.push(s.skipped);
    }
    let standardized: Vec<f64> = bandwidths.iter().zip(&statistics).map(|(&h, &l)| standardize(l, h)).collect();
    Ok(MultiBandwidthStat {
        bandwidths: bandwidths.to_vec(),
        t_n: max_standardized(bandwidths, &statistics),
        statistics,
        standardized,
        skipped,
    })
}

/// `T_n` for a fitted null: builds the test grid from the data and the null.
fn statistic_for(
    model: &ModelSpec,
    data: &SamplePath,
    bandwidths: &[f64],
    form: KernelForm,
) -> Result<MultiBandwidthStat> {
    let grid = build_test_grid(data, model)?;
    multi_bandwidth_stat(model, data, bandwidths, &grid, form)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    /// Bootstrap replicates B.
    pub replicates: usize,
    pub alpha: f64,
    /// Explicit bandwidths; `None` uses the default multipliers around the
    /// cross-validated reference.
    pub bandwidths: Option<Vec<f64>>,
    pub kernel: KernelForm,
    pub seed: u64,
    /// Re-estimate θ on every bootstrap path (the test as specified); when
    /// false the bootstrap statistic is evaluated at the generating θ̂.
    pub reestimate: bool,
    /// Optimizer settings for the initial fit and the bootstrap refits.
    pub el: ElOptions,
}

impl TestOptions {
    pub fn new(replicates: usize, alpha: f64, seed: u64) -> Self {
        TestOptions {
            replicates,
            alpha,
            bandwidths: None,
            kernel: KernelForm::Biweight,
            seed,
            reestimate: true,
            el: ElOptions {
                optimizer: NelderMeadOptions { rel_tol: REFIT_TOL, ..NelderMeadOptions::default() },
                diagnostics: false,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::Config("need at least one bootstrap replicate".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub null_model: ModelKind,
    pub theta_hat: Vec<f64>,
    pub n: usize,
    pub bandwidths: Vec<f64>,
    /// Raw per-bandwidth `ℓ_nh_i(θ̂)`.
    pub statistics: Vec<f64>,
    pub standardized: Vec<f64>,
    pub t_n: f64,
    /// `T*_n` of the successful bootstrap replicates, in replicate order.
    pub bootstrap: Vec<f64>,
    /// Raw `ℓ*_nh_i` per successful replicate, in replicate order.
    pub bootstrap_statistics: Vec<Vec<f64>>,
    pub p_value: f64,
    pub p_values: Vec<f64>,
    /// 95% bootstrap quantile of each raw `ℓ*_nh_i`.
    pub bootstrap_q95: Vec<f64>,
    /// 95% bootstrap quantile of `T*_n`.
    pub overall_q95: f64,
    pub alpha: f64,
    /// Order-statistic rule `T_n ≥ T*_([B(1−α)]+1)`.
    pub reject: bool,
    pub replicates: usize,
    pub failed: usize,
    pub seed: u64,
    pub reestimated: bool,
}

/// `(1 + #{T* ≥ T}) / (B + 1)`.
pub fn bootstrap_p_value(t: f64, boot: &[f64]) -> f64 {
    let exceed = boot.iter().filter(|&&b| b >= t).count();
    (1 + exceed) as f64 / (boot.len() + 1) as f64
}

/// Rejects when `T ≥ T*_(k)` with `k = ⌊B(1−α)⌋ + 1` (1-based, ascending).
pub fn order_statistic_reject(t: f64, boot: &[f64], alpha: f64) -> bool {
    let mut sorted = boot.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (sorted.len() as f64 * (1.0 - alpha)).floor() as usize + 1;
    match sorted.get(k - 1) {
        Some(&crit) => t >= crit,
        None => false,
    }
}

fn q95(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    stats::quantile_sorted(&v, 0.95)
}

/// Fits the null by EL and runs the bootstrap test.
pub fn bootstrap_test(null: ModelKind, data: &SamplePath, opts: &TestOptions) -> Result<TestResult> {
    opts.validate()?;
    let fit = estimate_el(null, data, None, &opts.el)?;
    bootstrap_test_at(null, data, &fit, opts)
}

/// Bootstrap test around an existing fit of the null.
pub fn bootstrap_test_at(
    null: ModelKind,
    data: &SamplePath,
    fit: &EstimateResult,
    opts: &TestOptions,
) -> Result<TestResult> {
    opts.validate()?;
    if null.dim() != 1 {
        return Err(Error::Parameter("the smoothed test is univariate".into()));
    }
    let model = ModelSpec::new(null, fit.theta_hat.clone(), data.delta())?;
    let bandwidths = match &opts.bandwidths {
        Some(list) => BandwidthSet::from_bandwidths(list.clone())?.bandwidths(),
        None => BandwidthSet::around(reference_bandwidth(data)?)?.bandwidths(),
    };
    let observed = statistic_for(&model, data, &bandwidths, opts.kernel)?;
    let n = data.len();

    let draws: Vec<Option<MultiBandwidthStat>> =
        (0..opts.replicates as u64).into_par_iter().map(|b| replicate(&model, n, opts, &bandwidths, b).ok()).collect();
    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed as f64 > MAX_BOOTSTRAP_FAILURES * opts.replicates as f64 {
        return Err(Error::Bootstrap { failed, total: opts.replicates });
    }
    let draws: Vec<MultiBandwidthStat> = draws.into_iter().flatten().collect();
    let boot: Vec<f64> = draws.iter().map(|d| d.t_n).collect();
    let p_values = (0..bandwidths.len())
        .map(|i| {
            let col: Vec<f64> = draws.iter().map(|d| d.standardized[i]).collect();
            bootstrap_p_value(observed.standardized[i], &col)
        })
        .collect();
    let bootstrap_q95 =
        (0..bandwidths.len()).map(|i| q95(&draws.iter().map(|d| d.statistics[i]).collect::<Vec<_>>())).collect();
    Ok(TestResult {
        null_model: null,
        theta_hat: fit.theta_hat.clone(),
        n,
        statistics: observed.statistics,
        standardized: observed.standardized,
        t_n: observed.t_n,
        p_value: bootstrap_p_value(observed.t_n, &boot),
        reject: order_statistic_reject(observed.t_n, &boot, opts.alpha),
        overall_q95: q95(&boot),
        bootstrap_statistics: draws.iter().map(|d| d.statistics.clone()).collect(),
        bootstrap: boot,
        p_values,
        bootstrap_q95,
        bandwidths,
        alpha: opts.alpha,
        replicates: opts.replicates,
        failed,
        seed: opts.seed,
        reestimated: opts.reestimate,
    })
}

fn replicate(
    model: &ModelSpec,
    n: usize,
    opts: &TestOptions,
    bandwidths: &[f64],
    b: u64,
) -> Result<MultiBandwidthStat> {
    let path = simulate_seeded(model, n, opts.seed, b, None)?;
    let refit = if opts.reestimate {
        let grid = crate::el::build_grid(&path, model.kind(), InstrumentMode::Estimate)?;
        let fit = minimize_el_with(model.kind(), &path, &grid, model.theta(), &opts.el)?;
        model.with_theta(fit.theta_hat)?
    } else {
        model.clone()
    };
    statistic_for(&refit, &path, bandwidths, opts.kernel)
}

impl TestResult {
    /// Plot rows `(bandwidth, statistic, bootstrap_q95)` with a final
    /// `overall` row for `T_n`.
    pub fn plot_rows(&self) -> Vec<(String, f64, f64)> {
        let mut rows: Vec<(String, f64, f64)> = self
            .bandwidths
            .iter()
            .zip(&self.statistics)
            .zip(&self.bootstrap_q95)
            .map(|((h, s), q)| (format!("{h}"), *s, *q))
            .collect();
        rows.push(("overall".into(), self.t_n, self.overall_q95));
        rows
    }
}
