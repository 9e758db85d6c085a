//! Frequency grids: quadrature nodes and weights for the measure π.
//!
//! The support box comes from the data. At a few interior state values the
//! Nadaraya–Watson estimate of `E[e^{iuX_{t+1}} | X_t = x]` is scanned over
//! increasing `u`; the frequency at which its modulus first drops below
//! [`SUPPORT_THRESHOLD`] marks where the CCF carries no more information.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cis, FrequencyPoint, InstrumentMode, ModelKind, ModelSpec};
use crate::simulate::SamplePath;
use crate::stats;

/// Conditional CF modulus that ends the frequency support. Past it the
/// residual moments are mostly sampling noise and flatten the objective.
pub const SUPPORT_THRESHOLD: f64 = 0.5;

const SUPPORT_STATE_POINTS: usize = 5;
const SUPPORT_SCAN: usize = 400;
const SUPPORT_CAP: f64 = 10.0;
const MIN_GRID_OBS: usize = 30;
const MIN_WINDOW_EFFECTIVE: f64 = 10.0;

/// Axis-aligned support box `[−U_k, U_k] × [−R_k, R_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub u_bound: Vec<f64>,
    pub r_bound: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    nodes: Vec<FrequencyPoint>,
    weights: Vec<f64>,
    support: Support,
    mode: InstrumentMode,
}

/// Compact description of a grid for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub nodes: usize,
    pub mode: InstrumentMode,
    pub u_bound: Vec<f64>,
    pub r_bound: Vec<f64>,
}

impl FrequencyGrid {
    /// Builds a grid from explicit nodes and weights. Weights must be
    /// non-negative and sum to one within 1e-12.
    pub fn new(nodes: Vec<FrequencyPoint>, weights: Vec<f64>, mode: InstrumentMode) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Parameter("grid needs one weight per node".into()));
        }
        let dim = nodes[0].dim();
        if nodes.iter().any(|p| p.dim() != dim) {
            return Err(Error::Parameter("grid nodes have mixed dimensions".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Parameter("grid weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("grid weights sum to {total}, not 1")));
        }
        let mut support = Support { u_bound: vec![0.0; dim], r_bound: vec![0.0; dim] };
        for p in &nodes {
            for k in 0..dim {
                support.u_bound[k] = support.u_bound[k].max(p.u()[k].abs());
                support.r_bound[k] = support.r_bound[k].max(p.r()[k].abs());
            }
        }
        Ok(FrequencyGrid { nodes, weights, support, mode })
    }

    /// Tensor grid with equispaced nodes on `[−U_k, U_k]` and `[−R_k, R_k]`
    /// and uniform weights. `r_count = 1` places the single r node at 0.
    pub fn tensor(support: &Support, u_count: usize, r_count: usize, mode: InstrumentMode) -> Result<Self> {
        let dim = support.u_bound.len();
        let axis = |bound: f64, count: usize| -> Vec<f64> {
            if count == 1 {
                vec![0.0]
            } else {
                (0..count).map(|j| bound * (2 * j as i64 - (count as i64 - 1)) as f64 / (count - 1) as f64).collect()
            }
        };
        let mut axes: Vec<Vec<f64>> = Vec::new();
        for k in 0..dim {
            axes.push(axis(support.u_bound[k], u_count));
        }
        for k in 0..dim {
            axes.push(axis(support.r_bound[k], r_count));
        }
        let mut nodes = Vec::new();
        let mut index = vec![0usize; axes.len()];
        loop {
            let coords: Vec<f64> = index.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
            nodes.push(FrequencyPoint::new(&coords[..dim], &coords[dim..])?);
            let mut k = axes.len();
            loop {
                if k == 0 {
                    let w = 1.0 / nodes.len() as f64;
                    let weights = vec![w; nodes.len()];
                    let mut grid = FrequencyGrid::new(nodes, weights, mode)?;
                    grid.support = support.clone();
                    return Ok(grid);
                }
                k -= 1;
                index[k] += 1;
                if index[k] < axes[k].len() {
                    break;
                }
                index[k] = 0;
            }
        }
    }

    pub fn nodes(&self) -> &[FrequencyPoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn mode(&self) -> InstrumentMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            nodes: self.nodes.len(),
            mode: self.mode,
            u_bound: self.support.u_bound.clone(),
            r_bound: self.support.r_bound.clone(),
        }
    }
}

/// Nodes per u axis and per r axis for a state dimension and mode.
fn node_counts(dim: usize, mode: InstrumentMode) -> (usize, usize) {
    let (u, r) = if dim == 1 { (21, 5) } else { (9, 3) };
    match mode {
        InstrumentMode::Estimate => (u, r),
        InstrumentMode::Test => (u, 1),
    }
}

/// Grid with a data-driven support box and uniform weights.
pub fn build_grid(data: &SamplePath, kind: ModelKind, mode: InstrumentMode) -> Result<FrequencyGrid> {
    let support = data_support(data, kind, mode)?;
    let (u_count, r_count) = node_counts(kind.dim(), mode);
    FrequencyGrid::tensor(&support, u_count, r_count, mode)
}

/// Test-mode grid whose u-support is the union of the data-driven support and
/// the support implied by the fitted null model.
pub fn build_test_grid(data: &SamplePath, null: &ModelSpec) -> Result<FrequencyGrid> {
    let mut support = data_support(data, null.kind(), InstrumentMode::Test)?;
    for k in 0..support.u_bound.len() {
        let x = data.coordinate(k);
        let cap = scan_cap(&x)?;
        let points = support_state_points(&x);
        let mut bound: f64 = 0.0;
        for xk in points {
            let mut state = vec![0.0; data.dim()];
            for (j, s) in state.iter_mut().enumerate() {
                *s = if j == k { xk } else { stats::mean(&data.coordinate(j)) };
            }
            let mut first = cap;
            for i in 1..=SUPPORT_SCAN {
                let u = cap * i as f64 / SUPPORT_SCAN as f64;
                let mut freq = vec![0.0; data.dim()];
                freq[k] = u;
                let psi = null.affine_ccf(&freq)?.eval(&state);
                if psi.norm() < SUPPORT_THRESHOLD {
                    first = u;
                    break;
                }
            }
            bound = bound.max(first);
        }
        support.u_bound[k] = support.u_bound[k].max(bound);
    }
    let (u_count, r_count) = node_counts(null.dim(), InstrumentMode::Test);
    FrequencyGrid::tensor(&support, u_count, r_count, InstrumentMode::Test)
}

fn data_support(data: &SamplePath, kind: ModelKind, mode: InstrumentMode) -> Result<Support> {
    if data.dim() != kind.dim() {
        return Err(Error::Data(format!("{kind} needs {}-dimensional data, got {}", kind.dim(), data.dim())));
    }
    if data.len() < MIN_GRID_OBS {
        return Err(Error::Data(format!(
            "need at least {MIN_GRID_OBS} observations to place a grid, got {}",
            data.len()
        )));
    }
    let mut u_bound = Vec::with_capacity(data.dim());
    for k in 0..data.dim() {
        u_bound.push(axis_support(&data.coordinate(k))?);
    }
    let r_bound = match mode {
        InstrumentMode::Estimate => u_bound.clone(),
        InstrumentMode::Test => vec![0.0; data.dim()],
    };
    Ok(Support { u_bound, r_bound })
}

fn scan_cap(x: &[f64]) -> Result<f64> {
    if stats::sd(x) == 0.0 {
        return Err(Error::Data("the path is constant".into()));
    }
    let inc_sd = stats::sd(&stats::diff(x));
    if !(inc_sd > 1e-12 * stats::sd(x)) {
        return Err(Error::Data("the path has constant increments".into()));
    }
    // The level bound only binds for near-step paths whose conditional CF
    // never decays.
    Ok(SUPPORT_CAP / inc_sd.max(stats::sd(x)))
}

fn support_state_points(x: &[f64]) -> Vec<f64> {
    let (lo, hi) = stats::min_max(x);
    (0..SUPPORT_STATE_POINTS).map(|k| lo + (k as f64 + 0.5) / SUPPORT_STATE_POINTS as f64 * (hi - lo)).collect()
}

/// Support bound for one coordinate: the median, over the state points, of
/// the first scanned frequency where the smoothed conditional CF modulus
/// falls below the threshold. The maximum is too sensitive to a single noisy
/// window. State points whose kernel window holds fewer
/// than [`MIN_WINDOW_EFFECTIVE`] effective observations are skipped.
pub(crate) fn axis_support(x: &[f64]) -> Result<f64> {
    let cap = scan_cap(x)?;
    let cond = &x[..x.len() - 1];
    // The modulus of E[e^{iuX_{t+1}} | X_t = x] is unchanged by removing a
    // drift b·X_t; removing it stops the phase of the conditional mean from
    // varying across the kernel window, which would otherwise damp the
    // smoothed modulus well before the true one decays.
    let slope = ar1_slope(x);
    let next: Vec<f64> = x[1..].iter().zip(cond).map(|(y, c)| y - slope * c).collect();
    let h = stats::rule_of_thumb_bandwidth(cond);
    let points = support_state_points(x);
    let weights: Vec<Vec<f64>> =
        points.iter().map(|&p| cond.iter().map(|&c| stats::biweight((p - c) / h)).collect()).collect();
    let totals: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();
    let mut first: Vec<Option<f64>> = weights
        .iter()
        .zip(&totals)
        .map(|(w, &t)| {
            // Kish effective sample size of the window
            let n_eff = if t > 0.0 { t * t / w.iter().map(|v| v * v).sum::<f64>() } else { 0.0 };
            if n_eff >= MIN_WINDOW_EFFECTIVE {
                None
            } else {
                Some(0.0)
            }
        })
        .collect();
    if first.iter().all(Option::is_some) {
        return Err(Error::Data("too few observations near the support state points".into()));
    }
    let mut phases = vec![Complex64::new(0.0, 0.0); next.len()];
    for i in 1..=SUPPORT_SCAN {
        if first.iter().all(Option::is_some) {
            break;
        }
        let u = cap * i as f64 / SUPPORT_SCAN as f64;
        for (p, &y) in phases.iter_mut().zip(&next) {
            *p = cis(u * y);
        }
        for k in 0..points.len() {
            if first[k].is_some() {
                continue;
            }
            let s: Complex64 = weights[k].iter().zip(&phases).map(|(w, p)| p * w).sum();
            if s.norm() / totals[k] < SUPPORT_THRESHOLD {
                first[k] = Some(u);
            }
        }
    }
    // Skipped points are marked 0 and take no part in the median.
    let mut crossings: Vec<f64> = first.into_iter().map(|f| f.unwrap_or(cap)).filter(|&u| u > 0.0).collect();
    crossings.sort_by(f64::total_cmp);
    Ok(stats::quantile_sorted(&crossings, 0.5))
}

fn ar1_slope(x: &[f64]) -> f64 {
    let a = &x[..x.len() - 1];
    let b = &x[1..];
    let (ma, mb) = (stats::mean(a), stats::mean(b));
    let sxx: f64 = a.iter().map(|v| (v - ma) * (v - ma)).sum();
    let sxy: f64 = a.iter().zip(b).map(|(u, v)| (u - ma) * (v - mb)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate_seeded;

    #[test]
    fn constant_increments_are_rejected() {
        let x: Vec<f64> = (0..100).map(|t| 0.01 * t as f64).collect();
        let p = SamplePath::univariate(x, 1.0 / 12.0).unwrap();
        assert!(matches!(build_grid(&p, ModelKind::Vsk, InstrumentMode::Estimate), Err(Error::Data(_))));
        let c = SamplePath::univariate(vec![0.05; 100], 1.0 / 12.0).unwrap();
        assert!(matches!(build_grid(&c, ModelKind::Vsk, InstrumentMode::Estimate), Err(Error::Data(_))));
    }

    #[test]
    fn vsk_grid_is_symmetric_with_uniform_weights() {
        let m = ModelSpec::new(ModelKind::Vsk, vec![0.858, 0.089, 0.047], 1.0 / 12.0).unwrap();
        let p = simulate_seeded(&m, 500, 3, 0, None).unwrap();
        let g = build_grid(&p, ModelKind::Vsk, InstrumentMode::Estimate).unwrap();
        let u = g.support().u_bound[0];
        assert!(u.is_finite() && u > 0.0);
        assert_eq!(g.len(), 105);
        assert!(g.weights().iter().all(|&w| w == g.weights()[0]));
        for node in g.nodes() {
            let neg = node.negated();
            assert!(g.nodes().contains(&neg));
        }
        let t = build_grid(&p, ModelKind::Vsk, InstrumentMode::Test).unwrap();
        assert_eq!(t.len(), 21);
        assert!(t.nodes().iter().all(|q| q.r()[0] == 0.0));
    }

    #[test]
    fn explicit_grid_validates_weights() {
        let nodes = vec![FrequencyPoint::univariate(1.0, 0.0), FrequencyPoint::univariate(-1.0, 0.0)];
        assert!(FrequencyGrid::new(nodes.clone(), vec![0.5, 0.4], InstrumentMode::Test).is_err());
        assert!(FrequencyGrid::new(nodes, vec![0.5, 0.5], InstrumentMode::Test).is_ok());
    }
}
