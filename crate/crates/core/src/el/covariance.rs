//! Plug-in sandwich covariance `Γ⁻¹VΓ⁻¹/n` of the EL estimator and the
//! first-order optimality diagnostic `‖∫Q2n π dτ‖`.
//!
//! With `ε̃_t = (ε_t, ε̄_t)'`, `D_g = E ∂ε̃/∂θ'` and `A_g = Var ε̃` at node g,
//! `Γ = Σ_g π_g D_g* A_g⁻¹ D_g` and `V` is the long-run covariance of the
//! score `s_t = Σ_g π_g D_g* A_g⁻¹ (ε̃_{tg} − E ε̃_g)`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::grid::FrequencyGrid;
use super::objective::{ElProblem, NodeOutcome};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};
use crate::simulate::SamplePath;

/// Relative step of the central differences in θ.
pub const FD_REL_STEP: f64 = 1e-5;
const MAX_CONDITION: f64 = 1e12;
const RIDGE: f64 = 1e-10;
const RIDGE_TRIGGER: f64 = 1e-12;

fn fd_step(theta_j: f64, rel: f64) -> f64 {
    rel * theta_j.abs().max(1e-3)
}

impl ElProblem {
    /// Per-observation central-difference derivatives `∂ε_t(τ_g)/∂θ_j`,
    /// indexed `[j][g][t]`.
    pub(crate) fn residual_derivatives(&self, theta: &[f64], rel_step: f64) -> Result<Vec<Vec<Vec<Complex64>>>> {
        let mut out = Vec::with_capacity(theta.len());
        for j in 0..theta.len() {
            let h = fd_step(theta[j], rel_step);
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[j] += h;
            down[j] -= h;
            let hi = self.residuals(&self.model(&up)?)?;
            let lo = self.residuals(&self.model(&down)?)?;
            let width = up[j] - down[j];
            out.push(
                hi.iter().zip(&lo).map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) / width).collect()).collect(),
            );
        }
        Ok(out)
    }

    /// Sample means `E ∂ε(τ_g)/∂θ_j` by central differences with step
    /// `rel_step·max(|θ_j|, 1e-3)`, indexed `[g][j]` over the paired nodes
    /// (nodes with `u = 0` give zeros).
    pub fn mean_jacobian(&self, theta: &[f64], rel_step: f64) -> Result<Vec<Vec<Complex64>>> {
        let d = self.residual_derivatives(theta, rel_step)?;
        let m = self.transitions() as f64;
        Ok((0..self.nodes.len())
            .map(|g| (0..theta.len()).map(|j| d[j][g].iter().sum::<Complex64>() / m).collect())
            .collect())
    }

    /// `‖Σ_g π_g Q2n(τ_g)‖` over the feasible nodes, weights renormalized.
    pub fn q2n_norm(&self, theta: &[f64]) -> Result<f64> {
        let model = self.model(theta)?;
        let outcomes = self.outcomes(&model)?;
        let resid = self.residuals(&model)?;
        let deriv = self.residual_derivatives(theta, FD_REL_STEP)?;
        let p = theta.len();
        let mut total = vec![0.0; p];
        let mut weight = 0.0;
        for (g, node) in self.nodes.iter().enumerate() {
            match outcomes[g] {
                NodeOutcome::Zero => weight += node.weight,
                NodeOutcome::Solved { lambda, .. } => {
                    weight += node.weight;
                    let m = resid[g].len() as f64;
                    for j in 0..p {
                        let mut q = 0.0;
                        for (e, de) in resid[g].iter().zip(&deriv[j][g]) {
                            let w = 1.0 + lambda[0] * e.re + lambda[1] * e.im;
                            q += (lambda[0] * de.re + lambda[1] * de.im) / w;
                        }
                        total[j] += node.weight * q / m;
                    }
                }
                NodeOutcome::Infeasible => {}
            }
        }
        Ok(total.iter().map(|v| (v / weight).powi(2)).sum::<f64>().sqrt())
    }

    /// `Γ̂⁻¹V̂Γ̂⁻¹/n`, symmetrized.
    pub fn covariance(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let model: ModelSpec = self.model(theta)?;
        let resid = self.residuals(&model)?;
        let deriv = self.residual_derivatives(theta, FD_REL_STEP)?;
        let p = theta.len();
        let m = self.transitions();
        let mf = m as f64;
        let mut gamma = DMatrix::<f64>::zeros(p, p);
        let mut scores = DMatrix::<f64>::zeros(m, p);
        for (g, node) in self.nodes.iter().enumerate() {
            if resid[g].is_empty() {
                continue;
            }
            let eps = &resid[g];
            let mu: Complex64 = eps.iter().sum::<Complex64>() / mf;
            let mut a = 0.0;
            let mut b = Complex64::new(0.0, 0.0);
            for e in eps {
                let c = e - mu;
                a += c.norm_sqr();
                b += c * c;
            }
            a /= mf;
            b /= mf;
            // A = [[a, b], [b̄, a]] has eigenvalues a ± |b|
            if a - b.norm() < RIDGE_TRIGGER {
                a += RIDGE;
            }
            let det = a * a - b.norm_sqr();
            if !(det > 0.0) {
                continue;
            }
            let d: Vec<Complex64> = (0..p).map(|j| deriv[j][g].iter().sum::<Complex64>() / mf).collect();
            let pw = node.weight;
            for j in 0..p {
                for k in 0..p {
                    // D*A⁻¹D = (2/det)·(a Re(d̄_j d_k) − Re(b d̄_j d̄_k))
                    let v = 2.0 / det * (a * (d[j].conj() * d[k]).re - (b * d[j].conj() * d[k].conj()).re);
                    gamma[(j, k)] += pw * v;
                }
            }
            for (t, e) in eps.iter().enumerate() {
                let c = e - mu;
                let inner = a * c - b * c.conj();
                for j in 0..p {
                    scores[(t, j)] += pw * 2.0 / det * (d[j].conj() * inner).re;
                }
            }
        }
        let gamma = 0.5 * (&gamma + gamma.transpose());
        let eig = SymmetricEigen::new(gamma.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > 0.0) || max / min > MAX_CONDITION {
            return Err(Error::Singular(format!("Gamma has eigenvalues in [{min:e}, {max:e}]")));
        }
        let inv = gamma.try_inverse().ok_or_else(|| Error::Singular("Gamma is not invertible".into()))?;
        let v = scores.transpose() * &scores / mf;
        let cov = &inv * v * &inv / mf;
        Ok(0.5 * (&cov + cov.transpose()))
    }
}

/// Plug-in asymptotic covariance of the EL estimator at `theta_hat`, already
/// divided by the number of transitions.
pub fn asymptotic_covariance(
    kind: ModelKind,
    theta_hat: &[f64],
    data: &SamplePath,
    grid: &FrequencyGrid,
) -> Result<Vec<Vec<f64>>> {
    let cov = ElProblem::new(kind, data, grid)?.covariance(theta_hat)?;
    Ok(to_rows(&cov))
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}
