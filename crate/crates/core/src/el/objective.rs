//! The integrated log-EL ratio `ℓ_n(θ) = Σ_g π_g ℓ_n(τ_g; θ)`.
//!
//! Nodes `τ` and `−τ` have conjugate residuals and therefore identical local
//! ratios, so each ± pair is evaluated once with the pair's combined weight.
//! Quantities that do not depend on θ (`e^{iu'X_{t+1}}` and the instrument)
//! are computed once per data set and grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dual::{solve_lambda, LambdaSolve};
use super::grid::FrequencyGrid;
use crate::error::{Error, Result};
use crate::model::{cis, dot, FrequencyPoint, InstrumentMode, ModelKind, ModelSpec};
use crate::simulate::SamplePath;

/// Maximum share of grid weight that may be infeasible before the objective
/// is declared degenerate.
pub const MAX_INFEASIBLE_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratedEl {
    pub value: f64,
    /// Grid nodes (counted with multiplicity) whose dual had no solution.
    pub infeasible: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct CanonNode {
    pub u_idx: usize,
    pub r_idx: usize,
    pub weight: f64,
    pub count: usize,
}

/// Per-node outcome of one objective evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) enum NodeOutcome {
    Zero,
    Solved { lambda: [f64; 2], ratio: f64 },
    Infeasible,
}

/// Data- and grid-dependent state for repeated evaluation of `ℓ_n(θ)`.
#[derive(Debug, Clone)]
pub struct ElProblem {
    kind: ModelKind,
    delta: f64,
    dim: usize,
    /// conditioning states `X_1..X_{n−1}`
    states: Vec<[f64; 2]>,
    pub(crate) nodes: Vec<CanonNode>,
    u_list: Vec<[f64; 2]>,
    u_zero: Vec<bool>,
    /// `e^{iu'X_{t+1}}` per distinct u
    next_phase: Vec<Vec<Complex64>>,
    /// instrument per distinct r; `None` when identically one
    instrument: Vec<Option<Vec<Complex64>>>,
    total: usize,
}

impl ElProblem {
    pub fn new(kind: ModelKind, data: &SamplePath, grid: &FrequencyGrid) -> Result<Self> {
        let dim = kind.dim();
        if data.dim() != dim || grid.dim() != dim {
            return Err(Error::Data(format!("{kind} needs {dim}-dimensional data and grid")));
        }
        if data.len() < 4 {
            return Err(Error::Data("need at least 4 observations".into()));
        }
        if kind.positive_state() {
            if let Some(t) = (0..data.len()).find(|&t| data.row(t)[0] <= 0.0) {
                return Err(Error::Domain(format!(
                    "{kind} requires positive data; observation {} is {}",
                    t + 1,
                    data.row(t)[0]
                )));
            }
        }
        let row = |t: usize| -> [f64; 2] {
            let r = data.row(t);
            [r[0], if dim == 2 { r[1] } else { 0.0 }]
        };
        let m = data.len() - 1;
        let states: Vec<[f64; 2]> = (0..m).map(row).collect();
        let next: Vec<[f64; 2]> = (1..=m).map(row).collect();

        let mut nodes: Vec<CanonNode> = Vec::new();
        let mut keys: Vec<[u64; 4]> = Vec::new();
        let mut u_list: Vec<[f64; 2]> = Vec::new();
        let mut r_list: Vec<[f64; 2]> = Vec::new();
        for (p, &w) in grid.nodes().iter().zip(grid.weights()) {
            let c = if p.is_canonical() { *p } else { p.negated() };
            let u = pad(c.u());
            let r = pad(c.r());
            // -0.0 and 0.0 are the same frequency
            let key = [u[0] + 0.0, u[1] + 0.0, r[0] + 0.0, r[1] + 0.0].map(f64::to_bits);
            if let Some(i) = keys.iter().position(|k| *k == key) {
                nodes[i].weight += w;
                nodes[i].count += 1;
                continue;
            }
            let u_idx = index_of(&mut u_list, u);
            let r_idx = index_of(&mut r_list, r);
            keys.push(key);
            nodes.push(CanonNode { u_idx, r_idx, weight: w, count: 1 });
        }
        let u_zero: Vec<bool> = u_list.iter().map(|u| u[0] == 0.0 && u[1] == 0.0).collect();
        let next_phase = u_list
            .iter()
            .zip(&u_zero)
            .map(|(u, &z)| if z { Vec::new() } else { next.iter().map(|x| cis(dot(&u[..dim], &x[..dim]))).collect() })
            .collect();
        let instrument = r_list
            .iter()
            .map(|r| {
                if grid.mode() == InstrumentMode::Test || (r[0] == 0.0 && r[1] == 0.0) {
                    None
                } else {
                    Some(states.iter().map(|x| cis(dot(&r[..dim], &x[..dim]))).collect())
                }
            })
            .collect();
        Ok(ElProblem {
            kind,
            delta: data.delta(),
            dim,
            states,
            nodes,
            u_list,
            u_zero,
            next_phase,
            instrument,
            total: grid.len(),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of transitions `n − 1`.
    pub fn transitions(&self) -> usize {
        self.states.len()
    }

    pub(crate) fn model(&self, theta: &[f64]) -> Result<ModelSpec> {
        ModelSpec::new(self.kind, theta.to_vec(), self.delta)
    }

    /// `e^{iu'X_{t+1}} − ψ(u; θ, X_t)` for every distinct u.
    fn ccf_gaps(&self, model: &ModelSpec) -> Result<Vec<Vec<Complex64>>> {
        let mut out = Vec::with_capacity(self.u_list.len());
        for (i, u) in self.u_list.iter().enumerate() {
            if self.u_zero[i] {
                out.push(Vec::new());
                continue;
            }
            let aff = model.affine_ccf(&u[..self.dim])?;
            let gaps = self.states.iter().zip(&self.next_phase[i]).map(|(x, e)| e - aff.eval(&x[..self.dim])).collect();
            out.push(gaps);
        }
        Ok(out)
    }

    /// Complex residuals `ε_t(τ_g; θ)` for every canonical node; empty for
    /// nodes with `u = 0`, whose residuals vanish.
    pub(crate) fn residuals(&self, model: &ModelSpec) -> Result<Vec<Vec<Complex64>>> {
        let gaps = self.ccf_gaps(model)?;
        Ok(self
            .nodes
            .iter()
            .map(|node| {
                if self.u_zero[node.u_idx] {
                    return Vec::new();
                }
                let gap = &gaps[node.u_idx];
                match &self.instrument[node.r_idx] {
                    None => gap.clone(),
                    Some(w) => gap.iter().zip(w).map(|(g, w)| g * w).collect(),
                }
            })
            .collect())
    }

    pub(crate) fn outcomes(&self, model: &ModelSpec) -> Result<Vec<NodeOutcome>> {
        let residuals = self.residuals(model)?;
        let mut z = Vec::with_capacity(self.states.len());
        let mut out = Vec::with_capacity(self.nodes.len());
        for eps in &residuals {
            if eps.is_empty() {
                out.push(NodeOutcome::Zero);
                continue;
            }
            z.clear();
            z.extend(eps.iter().map(|e| [e.re, e.im]));
            out.push(match solve_lambda(&z) {
                Ok(LambdaSolve { lambda, .. }) => {
                    let mut total = 0.0;
                    for v in &z {
                        total += (lambda[0] * v[0] + lambda[1] * v[1]).ln_1p();
                    }
                    NodeOutcome::Solved { lambda, ratio: (2.0 * total).max(0.0) }
                }
                Err(Error::ConvexHull) | Err(Error::MaxIter(_)) | Err(Error::Numerical(_)) => NodeOutcome::Infeasible,
                Err(e) => return Err(e),
            });
        }
        Ok(out)
    }

    /// `ℓ_n(θ)` with infeasible nodes dropped and the weights renormalized.
    pub fn evaluate(&self, theta: &[f64]) -> Result<IntegratedEl> {
        let model = self.model(theta)?;
        self.evaluate_model(&model)
    }

    pub(crate) fn evaluate_model(&self, model: &ModelSpec) -> Result<IntegratedEl> {
        let outcomes = self.outcomes(model)?;
        self.integrate(&outcomes)
    }

    pub(crate) fn integrate(&self, outcomes: &[NodeOutcome]) -> Result<IntegratedEl> {
        let mut value = 0.0;
        let mut feasible_weight = 0.0;
        let mut infeasible_weight = 0.0;
        let mut infeasible = 0;
        for (node, out) in self.nodes.iter().zip(outcomes) {
            match out {
                NodeOutcome::Zero => feasible_weight += node.weight,
                NodeOutcome::Solved { ratio, .. } => {
                    value += node.weight * ratio;
                    feasible_weight += node.weight;
                }
                NodeOutcome::Infeasible => {
                    infeasible_weight += node.weight;
                    infeasible += node.count;
                }
            }
        }
        if infeasible_weight > MAX_INFEASIBLE_SHARE * (feasible_weight + infeasible_weight) {
            return Err(Error::Degenerate { infeasible, total: self.total });
        }
        Ok(IntegratedEl { value: value / feasible_weight, infeasible, total: self.total })
    }
}

fn pad(v: &[f64]) -> [f64; 2] {
    [v[0], if v.len() > 1 { v[1] } else { 0.0 }]
}

fn index_of(list: &mut Vec<[f64; 2]>, v: [f64; 2]) -> usize {
    let same = |a: &[f64; 2]| a[0] == v[0] && a[1] == v[1];
    match list.iter().position(same) {
        Some(i) => i,
        None => {
            list.push(v);
            list.len() - 1
        }
    }
}

/// `ℓ_n(θ)` for a model family, parameter vector, data set and grid.
pub fn integrated_el_ratio(
    kind: ModelKind,
    theta: &[f64],
    data: &SamplePath,
    grid: &FrequencyGrid,
) -> Result<IntegratedEl> {
    ElProblem::new(kind, data, grid)?.evaluate(theta)
}

/// Complex residuals `ε_t(τ_g; θ)`: row t, column g, for every grid node as
/// given (no pairing).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPanel {
    rows: usize,
    cols: usize,
    eps: Vec<Complex64>,
}

impl ResidualPanel {
    pub fn compute(
        model: &ModelSpec,
        data: &SamplePath,
        nodes: &[FrequencyPoint],
        mode: InstrumentMode,
    ) -> Result<Self> {
        let rows = data.len() - 1;
        let mut eps = Vec::with_capacity(rows * nodes.len());
        for t in 0..rows {
            for tau in nodes {
                eps.push(crate::model::residual(model, tau, data.row(t), data.row(t + 1), mode)?);
            }
        }
        Ok(ResidualPanel { rows, cols: nodes.len(), eps })
    }

    /// Wraps an explicit `rows × cols` matrix stored row-major.
    pub fn from_matrix(rows: usize, cols: usize, eps: Vec<Complex64>) -> Result<Self> {
        if eps.len() != rows * cols {
            return Err(Error::Parameter("panel size does not match its shape".into()));
        }
        Ok(ResidualPanel { rows, cols, eps })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, t: usize, g: usize) -> Complex64 {
        self.eps[t * self.cols + g]
    }

    /// Real/imaginary 2-vectors of column g.
    pub fn vectors(&self, g: usize) -> Vec<[f64; 2]> {
        (0..self.rows)
            .map(|t| {
                let e = self.get(t, g);
                [e.re, e.im]
            })
            .collect()
    }

    /// `Σ_g π_g ℓ_n(τ_g)` over the feasible columns, weights renormalized.
    pub fn integrated_ratio(&self, weights: &[f64]) -> Result<IntegratedEl> {
        if weights.len() != self.cols {
            return Err(Error::Parameter("one weight per panel column required".into()));
        }
        let mut value = 0.0;
        let mut feasible = 0.0;
        let mut bad = 0.0;
        let mut infeasible = 0;
        for (g, &w) in weights.iter().enumerate() {
            let z = self.vectors(g);
            match solve_lambda(&z) {
                Ok(sol) => {
                    value += w * super::dual::local_el_ratio(&z, sol.lambda)?.max(0.0);
                    feasible += w;
                }
                Err(Error::ConvexHull) | Err(Error::MaxIter(_)) | Err(Error::Numerical(_)) => {
                    bad += w;
                    infeasible += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if bad > MAX_INFEASIBLE_SHARE * (feasible + bad) {
            return Err(Error::Degenerate { infeasible, total: self.cols });
        }
        Ok(IntegratedEl { value: value / feasible, infeasible, total: self.cols })
    }
}
