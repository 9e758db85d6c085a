//! Moment-based starting values for the optimizers.
//!
//! All start values come from an AR(1) (VAR(1) for the bivariate model)
//! regression of `X_{t+1}` on `X_t` plus marginal moments; the result is
//! always moved inside the parameter space.

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};
use crate::simulate::SamplePath;
use crate::stats;

struct Ar1 {
    intercept: f64,
    slope: f64,
    resid: Vec<f64>,
}

fn ar1(x: &[f64]) -> Result<Ar1> {
    let a = &x[..x.len() - 1];
    let b = &x[1..];
    let ma = stats::mean(a);
    let mb = stats::mean(b);
    let sxx: f64 = a.iter().map(|v| (v - ma) * (v - ma)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Data("the path is constant".into()));
    }
    let sxy: f64 = a.iter().zip(b).map(|(u, v)| (u - ma) * (v - mb)).sum();
    let slope = sxy / sxx;
    let intercept = mb - slope * ma;
    let resid = a.iter().zip(b).map(|(u, v)| v - intercept - slope * u).collect();
    Ok(Ar1 { intercept, slope, resid })
}

/// Persistence clamped into (0, 1) so that a positive mean-reversion rate exists.
fn clamp_slope(phi: f64) -> f64 {
    phi.clamp(0.05, 0.995)
}

/// Starting values for `kind` estimated on `data`.
pub fn start_values(kind: ModelKind, data: &SamplePath) -> Result<Vec<f64>> {
    if data.dim() != kind.dim() {
        return Err(Error::Data(format!("{kind} needs {}-dimensional data", kind.dim())));
    }
    let delta = data.delta();
    let theta = match kind {
        ModelKind::Vsk | ModelKind::Cir | ModelKind::VskMj | ModelKind::IgOu => {
            let x = data.coordinate(0);
            let fit = ar1(&x)?;
            let phi = clamp_slope(fit.slope);
            let kappa = -phi.ln() / delta;
            let mean_x = stats::mean(&x);
            let alpha = if fit.slope == phi { fit.intercept / (1.0 - phi) } else { mean_x };
            let v = stats::variance(&fit.resid).max(1e-300);
            // one-step variance σ²(1 − φ²)/(2κ) for the Gaussian models
            let scale = 2.0 * kappa / (1.0 - phi * phi);
            match kind {
                ModelKind::Vsk => vec![kappa, alpha, (v * scale).sqrt()],
                ModelKind::Cir => {
                    let alpha = if alpha > 0.0 { alpha } else { mean_x.abs().max(1e-6) };
                    let mut sigma = (v * scale / alpha).sqrt();
                    // keep 2κα/σ² comfortably above one
                    let max_sigma = (2.0 * kappa * alpha / 1.5).sqrt();
                    sigma = sigma.min(max_sigma);
                    vec![kappa, alpha, sigma]
                }
                ModelKind::VskMj => {
                    let m4 = fit.resid.iter().map(|r| r.powi(4)).sum::<f64>() / fit.resid.len() as f64;
                    let excess = (m4 / (v * v) - 3.0).max(0.3);
                    // half the one-step variance from jumps: λδη² = v/2, 3λδη⁴ = excess·v²
                    let lambda = (0.75 / (excess * delta)).clamp(0.2, 0.5 / delta);
                    let eta = (0.5 * v / (lambda * delta)).sqrt();
                    let sigma = (0.5 * v * scale).sqrt();
                    vec![kappa, alpha, sigma, lambda, eta]
                }
                _ => {
                    if !(mean_x > 0.0) {
                        return Err(Error::Domain("IG-OU needs positive data".into()));
                    }
                    let var = stats::variance(&x);
                    let b = (mean_x / var).sqrt();
                    vec![kappa, mean_x * b, b]
                }
            }
        }
        ModelKind::BiOu => biou_start(data)?,
    };
    ModelSpec::new(kind, theta.clone(), delta)?;
    Ok(theta)
}

fn biou_start(data: &SamplePath) -> Result<Vec<f64>> {
    let delta = data.delta();
    let n = data.len() - 1;
    // regress each coordinate of X_{t+1} on (1, X_t)
    let mut xtx = nalgebra::Matrix3::<f64>::zeros();
    let mut xty = nalgebra::Matrix3x2::<f64>::zeros();
    for t in 0..n {
        let x = data.row(t);
        let y = data.row(t + 1);
        let r = nalgebra::Vector3::new(1.0, x[0], x[1]);
        xtx += r * r.transpose();
        for k in 0..2 {
            for j in 0..3 {
                xty[(j, k)] += r[j] * y[k];
            }
        }
    }
    let beta = xtx.try_inverse().ok_or_else(|| Error::Data("bivariate regression is singular".into()))? * xty;
    let phi11 = clamp_slope(beta[(1, 0)]);
    let phi22 = clamp_slope(beta[(2, 1)]);
    let phi21 = beta[(1, 1)];
    let k11 = -phi11.ln() / delta;
    let k22 = -phi22.ln() / delta;
    let a = -k11 * delta;
    let d = -k22 * delta;
    let divided = if (a - d).abs() < 1e-12 { a.exp() } else { (a.exp() - d.exp()) / (a - d) };
    let k21 = -phi21 / (delta * divided);
    let mean0 = stats::mean(&data.coordinate(0));
    let mean1 = stats::mean(&data.coordinate(1));
    let mut ss = [0.0f64; 2];
    for t in 0..n {
        let x = data.row(t);
        let y = data.row(t + 1);
        for k in 0..2 {
            let fitted = beta[(0, k)] + beta[(1, k)] * x[0] + beta[(2, k)] * x[1];
            ss[k] += (y[k] - fitted).powi(2);
        }
    }
    let v = [ss[0] / (n as f64 - 3.0), ss[1] / (n as f64 - 3.0)];
    let s11 = (v[0] * 2.0 * k11 / (1.0 - phi11 * phi11)).sqrt();
    let s22 = (v[1] * 2.0 * k22 / (1.0 - phi22 * phi22)).sqrt();
    Ok(vec![k11, k21, k22, mean0, mean1, s11.max(1e-8), s22.max(1e-8)])
}
