//! Maximum empirical likelihood estimation: minimize `ℓ_n(θ)` over θ.

use serde::{Deserialize, Serialize};

use super::covariance::to_rows;
use super::grid::{build_grid, FrequencyGrid, GridSummary};
use super::objective::ElProblem;
use crate::error::Result;
use crate::init::start_values;
use crate::model::{InstrumentMode, ModelKind};
use crate::optim::{minimize, NelderMeadOptions};
use crate::simulate::SamplePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElOptions {
    pub optimizer: NelderMeadOptions,
    /// Compute the plug-in covariance and the `Q2n` diagnostic at the optimum.
    pub diagnostics: bool,
}

impl Default for ElOptions {
    fn default() -> Self {
        ElOptions { optimizer: NelderMeadOptions::default(), diagnostics: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub model: ModelKind,
    pub theta_hat: Vec<f64>,
    /// `ℓ_n(θ̂)`
    pub el_value: f64,
    /// `Σ̂/n`; absent when Γ̂ was singular or diagnostics were skipped.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub covariance_error: Option<String>,
    /// `‖∫Q2n π dτ‖` at θ̂ (NaN when diagnostics were skipped).
    pub q2n_norm: f64,
    pub infeasible_nodes: usize,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best objective value after each simplex iteration.
    pub trace: Vec<f64>,
    pub grid: GridSummary,
    pub n: usize,
    pub seed: Option<u64>,
}

impl EstimateResult {
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance.as_ref().map(|c| (0..c.len()).map(|i| c[i][i].max(0.0).sqrt()).collect())
    }
}

/// MELE starting from `theta_init` with default options.
pub fn minimize_el(
    kind: ModelKind,
    data: &SamplePath,
    grid: &FrequencyGrid,
    theta_init: &[f64],
) -> Result<EstimateResult> {
    minimize_el_with(kind, data, grid, theta_init, &ElOptions::default())
}

pub fn minimize_el_with(
    kind: ModelKind,
    data: &SamplePath,
    grid: &FrequencyGrid,
    theta_init: &[f64],
    opts: &ElOptions,
) -> Result<EstimateResult> {
    let problem = ElProblem::new(kind, data, grid)?;
    problem.model(theta_init)?;
    let objective = |theta: &[f64]| match problem.evaluate(theta) {
        Ok(v) => v.value,
        Err(_) => f64::INFINITY,
    };
    let fit = minimize(objective, theta_init, &opts.optimizer)?;
    let at_opt = problem.evaluate(&fit.x)?;
    let (covariance, covariance_error, q2n_norm) = if opts.diagnostics {
        let (c, e) = match problem.covariance(&fit.x) {
            Ok(c) => (Some(to_rows(&c)), None),
            Err(e) => (None, Some(e.to_string())),
        };
        (c, e, problem.q2n_norm(&fit.x)?)
    } else {
        (None, None, f64::NAN)
    };
    Ok(EstimateResult {
        model: kind,
        theta_hat: fit.x,
        el_value: at_opt.value,
        covariance,
        covariance_error,
        q2n_norm,
        infeasible_nodes: at_opt.infeasible,
        iterations: fit.iterations,
        evaluations: fit.evaluations,
        trace: fit.history,
        grid: grid.summary(),
        n: data.len(),
        seed: data.seed(),
    })
}

/// Builds the estimation grid from the data, picks moment-based starting
/// values (unless given) and runs [`minimize_el_with`].
pub fn estimate_el(
    kind: ModelKind,
    data: &SamplePath,
    theta_init: Option<&[f64]>,
    opts: &ElOptions,
) -> Result<EstimateResult> {
    let grid = build_grid(data, kind, InstrumentMode::Estimate)?;
    let init = match theta_init {
        Some(t) => t.to_vec(),
        None => start_values(kind, data)?,
    };
    minimize_el_with(kind, data, &grid, &init, opts)
}
