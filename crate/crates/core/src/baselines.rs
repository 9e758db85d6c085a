//! Likelihood-based comparison estimators: exact MLE for the Vasicek, CIR
//! and bivariate OU models and the normal-mixture approximate MLE for the
//! jump diffusion.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{biou_moments, ModelKind, ModelSpec};
use crate::optim::{minimize, NelderMeadOptions};
use crate::simulate::SamplePath;
use crate::special::ln_bessel_i;

/// Relative step of the finite-difference Hessian.
const HESSIAN_REL_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodMethod {
    /// Exact transition density.
    Mle,
    /// First-order normal-mixture approximation (jump diffusion only).
    Amle,
}

impl LikelihoodMethod {
    pub fn for_model(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::Vsk | ModelKind::Cir | ModelKind::BiOu => Ok(LikelihoodMethod::Mle),
            ModelKind::VskMj => Ok(LikelihoodMethod::Amle),
            ModelKind::IgOu => {
                Err(Error::Parameter("IG-OU has no closed-form transition density; use the EL estimator".into()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLikResult {
    pub method: LikelihoodMethod,
    pub model: ModelKind,
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    /// Standard errors from the inverse observed information; absent when the
    /// finite-difference Hessian is not negative definite.
    pub hessian_se: Option<Vec<f64>>,
    pub se_error: Option<String>,
    pub iterations: usize,
    pub evaluations: usize,
    pub n: usize,
    pub seed: Option<u64>,
}

fn ln_normal(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * ((2.0 * PI * var).ln() + d * d / var)
}

fn vsk_moments(theta: &[f64], delta: f64) -> (f64, f64) {
    let (kappa, sigma) = (theta[0], theta[2]);
    let phi = (-kappa * delta).exp();
    // σ²(1 − e^{−2κδ})/(2κ) without cancellation at small κδ
    let var = sigma * sigma * -(-2.0 * kappa * delta).exp_m1() / (2.0 * kappa);
    (phi, var)
}

/// Log transition density `log p(y | x)` of the exact model (VSK, CIR,
/// BI-OU) or of the normal-mixture approximation (VSK-MJ).
///
/// The jump intensity and jump scale may be zero.
pub fn transition_log_density(model: &ModelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    model.check_eval()?;
    model.check_state(x)?;
    if y.len() != x.len() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("transition target must be a finite state".into()));
    }
    let t = model.theta();
    let delta = model.delta();
    match model.kind() {
        ModelKind::Vsk => {
            let (phi, var) = vsk_moments(t, delta);
            Ok(ln_normal(y[0], t[1] + (x[0] - t[1]) * phi, var))
        }
        ModelKind::VskMj => {
            let (phi, var) = vsk_moments(t, delta);
            let p = t[3] * delta;
            if p >= 1.0 {
                return Err(Error::Parameter(format!("lambda*delta = {p} must be below 1")));
            }
            let mean = t[1] + (x[0] - t[1]) * phi;
            let a = (1.0 - p).ln() + ln_normal(y[0], mean, var);
            let b = p.ln() + ln_normal(y[0], mean, var + t[4] * t[4]);
            let hi = a.max(b);
            Ok(hi + ((a - hi).exp() + (b - hi).exp()).ln())
        }
        ModelKind::Cir => {
            if !(y[0] > 0.0) {
                return Ok(f64::NEG_INFINITY);
            }
            let (kappa, alpha, sigma) = (t[0], t[1], t[2]);
            // c·X_{t+1} is noncentral χ² with k degrees of freedom
            let c = 4.0 * kappa / (sigma * sigma * -(-kappa * delta).exp_m1());
            let k = 4.0 * kappa * alpha / (sigma * sigma);
            let nc = c * x[0] * (-kappa * delta).exp();
            let z = c * y[0];
            let nu = 0.5 * k - 1.0;
            let ln_f =
                -std::f64::consts::LN_2 - 0.5 * (z + nc) + 0.5 * nu * (z / nc).ln() + ln_bessel_i(nu, (nc * z).sqrt());
            Ok(c.ln() + ln_f)
        }
        ModelKind::BiOu => {
            let m = biou_moments(t, delta);
            let alpha = [t[3], t[4]];
            let dx = [x[0] - alpha[0], x[1] - alpha[1]];
            let mean = [
                alpha[0] + m.phi[0][0] * dx[0] + m.phi[0][1] * dx[1],
                alpha[1] + m.phi[1][0] * dx[0] + m.phi[1][1] * dx[1],
            ];
            let o = m.omega;
            let det = o[0][0] * o[1][1] - o[0][1] * o[1][0];
            if !(det > 1e-14 * (o[0][0] * o[1][1]).abs()) || !(o[0][0] > 0.0) {
                return Err(Error::Singular(format!("transition covariance has determinant {det:e}")));
            }
            let e = [y[0] - mean[0], y[1] - mean[1]];
            let quad = (o[1][1] * e[0] * e[0] - 2.0 * o[0][1] * e[0] * e[1] + o[0][0] * e[1] * e[1]) / det;
            Ok(-(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * quad)
        }
        ModelKind::IgOu => Err(Error::Parameter("IG-OU has no closed-form transition density".into())),
    }
}

fn path_loglik(kind: ModelKind, theta: &[f64], data: &SamplePath) -> Result<f64> {
    if data.dim() != kind.dim() {
        return Err(Error::Data(format!("{kind} needs {}-dimensional data", kind.dim())));
    }
    if data.len() < 2 {
        return Err(Error::Data("need at least two observations".into()));
    }
    let model = ModelSpec::new_unchecked(kind, theta.to_vec(), data.delta());
    model.check_eval()?;
    let mut total = 0.0;
    for t in 0..data.len() - 1 {
        let y = data.row(t + 1);
        model.check_state(y)?;
        total += transition_log_density(&model, data.row(t), y)?;
    }
    Ok(total)
}

/// Exact Vasicek log-likelihood `Σ log φ(X_{t+1}; μ_δ(X_t), σ_δ²)`.
pub fn vsk_loglik(theta: &[f64], data: &SamplePath) -> Result<f64> {
    path_loglik(ModelKind::Vsk, theta, data)
}

/// Exact CIR log-likelihood from the scaled noncentral χ² transition.
pub fn cir_loglik(theta: &[f64], data: &SamplePath) -> Result<f64> {
    path_loglik(ModelKind::Cir, theta, data)
}

/// Log-likelihood of the mixture `(1−λδ)N(μ_δ, σ_δ²) + λδ N(μ_δ, σ_δ² + η²)`.
pub fn vskmj_approx_loglik(theta: &[f64], data: &SamplePath) -> Result<f64> {
    path_loglik(ModelKind::VskMj, theta, data)
}

/// Exact bivariate OU log-likelihood.
pub fn biou_loglik(theta: &[f64], data: &SamplePath) -> Result<f64> {
    path_loglik(ModelKind::BiOu, theta, data)
}

/// Log-likelihood used by [`mle_fit`] for `kind`.
pub fn loglik(kind: ModelKind, theta: &[f64], data: &SamplePath) -> Result<f64> {
    LikelihoodMethod::for_model(kind)?;
    path_loglik(kind, theta, data)
}

/// Maximizes the (approximate) log-likelihood by Nelder–Mead from
/// `theta_init`, with standard errors from a central-difference Hessian.
pub fn mle_fit(kind: ModelKind, data: &SamplePath, theta_init: &[f64]) -> Result<LogLikResult> {
    mle_fit_with(kind, data, theta_init, &NelderMeadOptions::default())
}

pub fn mle_fit_with(
    kind: ModelKind,
    data: &SamplePath,
    theta_init: &[f64],
    opts: &NelderMeadOptions,
) -> Result<LogLikResult> {
    let method = LikelihoodMethod::for_model(kind)?;
    let objective = |theta: &[f64]| match path_loglik(kind, theta, data) {
        Ok(v) if v.is_finite() => -v,
        _ => f64::INFINITY,
    };
    let fit = minimize(objective, theta_init, opts)?;
    let value = path_loglik(kind, &fit.x, data)?;
    let (hessian_se, se_error) = match hessian_se(kind, &fit.x, data) {
        Ok(se) => (Some(se), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(LogLikResult {
        method,
        model: kind,
        theta_hat: fit.x,
        loglik: value,
        hessian_se,
        se_error,
        iterations: fit.iterations,
        evaluations: fit.evaluations,
        n: data.len(),
        seed: data.seed(),
    })
}

fn hessian_se(kind: ModelKind, theta: &[f64], data: &SamplePath) -> Result<Vec<f64>> {
    let p = theta.len();
    let h: Vec<f64> = theta.iter().map(|v| HESSIAN_REL_STEP * v.abs().max(1e-3)).collect();
    let f = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut t = theta.to_vec();
        for &(j, s) in shift {
            t[j] += s;
        }
        path_loglik(kind, &t, data)
    };
    let f0 = f(&[])?;
    let mut hess = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let up = f(&[(i, h[i])])?;
        let down = f(&[(i, -h[i])])?;
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let pp = f(&[(i, h[i]), (j, h[j])])?;
            let pm = f(&[(i, h[i]), (j, -h[j])])?;
            let mp = f(&[(i, -h[i]), (j, h[j])])?;
            let mm = f(&[(i, -h[i]), (j, -h[j])])?;
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let info = -hess;
    let chol =
        info.cholesky().ok_or_else(|| Error::Singular("observed information is not positive definite".into()))?;
    let inv = chol.inverse();
    Ok((0..p).map(|i| inv[(i, i)].sqrt()).collect())
}
