//! Discretely sampled paths from each model.
//!
//! VSK, CIR, IG-OU and BI-OU transitions are sampled exactly; VSK-MJ uses an
//! Euler scheme with [`VSKMJ_SUBSTEPS`] sub-steps per sampling interval.

use rand::Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{biou_moments, ModelKind, ModelSpec};
use crate::rng::{stream_rng, SimRng};

/// Euler sub-steps per sampling interval for the jump-diffusion.
pub const VSKMJ_SUBSTEPS: usize = 32;

const VSKMJ_BURN_IN: usize = 1000;
const VSKMJ_BURN_IN_SPACING: f64 = 10.0;

/// Observations `X_1..X_n` at a fixed spacing `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    dim: usize,
    data: Vec<f64>,
    delta: f64,
    seed: Option<u64>,
}

impl SamplePath {
    /// Builds a path from row-major observations (`n * dim` values).
    pub fn new(dim: usize, data: Vec<f64>, delta: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Data(format!("unsupported state dimension {dim}")));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Data("observation count is not a multiple of the dimension".into()));
        }
        if data.len() / dim < 2 {
            return Err(Error::Data("a path needs at least 2 observations".into()));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Data(format!("sampling interval must be positive, got {delta}")));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite observation at index {}", i / dim)));
        }
        Ok(SamplePath { dim, data, delta, seed: None })
    }

    pub fn univariate(values: Vec<f64>, delta: f64) -> Result<Self> {
        SamplePath::new(1, values, delta)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Observation `t` (zero-based).
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    /// All observations, row-major.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Values of coordinate `k`.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.data.iter().skip(k).step_by(self.dim).copied().collect()
    }

    /// Scales every observation by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        SamplePath::new(self.dim, self.data.iter().map(|v| v * factor).collect(), self.delta)
    }
}

/// Draws `X_0` from the stationary law (VSK-MJ: long burn-in from α).
pub fn stationary_init<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R) -> Result<Vec<f64>> {
    model.validate()?;
    let t = model.theta();
    let x = match model.kind() {
        ModelKind::Vsk => {
            let sd = t[2] / (2.0 * t[0]).sqrt();
            vec![t[1] + sd * rng.sample::<f64, _>(StandardNormal)]
        }
        ModelKind::Cir => {
            let shape = 2.0 * t[0] * t[1] / (t[2] * t[2]);
            let scale = t[2] * t[2] / (2.0 * t[0]);
            let gamma = Gamma::new(shape, scale).map_err(|e| Error::Parameter(e.to_string()))?;
            vec![positive_draw(|| gamma.sample(rng))?]
        }
        ModelKind::VskMj => {
            let mut x = t[1];
            let h = VSKMJ_BURN_IN_SPACING * model.delta();
            for _ in 0..VSKMJ_BURN_IN {
                x = vskmj_step(t, h, x, rng).0;
            }
            vec![x]
        }
        ModelKind::IgOu => {
            let (a, b) = (t[1], t[2]);
            let ig = InverseGaussian::new(a / b, a * a).map_err(|e| Error::Parameter(e.to_string()))?;
            vec![positive_draw(|| ig.sample(rng))?]
        }
        ModelKind::BiOu => {
            let m = biou_moments(t, model.delta());
            let l = cholesky2(&m.stationary)?;
            let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            vec![t[3] + l[0][0] * z[0], t[4] + l[1][0] * z[0] + l[1][1] * z[1]]
        }
    };
    Ok(x)
}

/// Simulates `n` observations. `x0` is the first observation; when absent it
/// is drawn from the stationary law.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &ModelSpec,
    n: usize,
    rng: &mut R,
    x0: Option<&[f64]>,
) -> Result<SamplePath> {
    Ok(simulate_path_traced(model, n, rng, x0)?.0)
}

/// [`simulate_path`] with a reproducible seed recorded on the path.
pub fn simulate_seeded(model: &ModelSpec, n: usize, seed: u64, stream: u64, x0: Option<&[f64]>) -> Result<SamplePath> {
    let mut rng: SimRng = stream_rng(seed, stream);
    Ok(simulate_path(model, n, &mut rng, x0)?.with_seed(seed))
}

/// Like [`simulate_path`], also returning the number of jumps in each
/// transition (always zero for models without jumps).
pub fn simulate_path_traced<R: Rng + ?Sized>(
    model: &ModelSpec,
    n: usize,
    rng: &mut R,
    x0: Option<&[f64]>,
) -> Result<(SamplePath, Vec<u64>)> {
    model.validate()?;
    if n < 2 {
        return Err(Error::Parameter(format!("path length must be at least 2, got {n}")));
    }
    let dim = model.dim();
    let first = match x0 {
        Some(x) => {
            model.check_state(x)?;
            x.to_vec()
        }
        None => stationary_init(model, rng)?,
    };
    let mut data = Vec::with_capacity(n * dim);
    data.extend_from_slice(&first);
    let mut jumps = Vec::with_capacity(n - 1);
    let mut stepper = Stepper::new(model)?;
    for t in 1..n {
        let prev = [data[(t - 1) * dim], if dim == 2 { data[(t - 1) * dim + 1] } else { 0.0 }];
        let (next, count) = stepper.step(&prev, rng)?;
        data.extend_from_slice(&next[..dim]);
        jumps.push(count);
    }
    Ok((SamplePath::new(dim, data, model.delta())?, jumps))
}

/// Per-model transition sampler with the parameter-dependent constants
/// precomputed.
enum Stepper {
    Vsk { mean_rev: f64, alpha: f64, sd: f64 },
    Cir { rho: f64, c: f64, half_q: f64 },
    VskMj { theta: Vec<f64>, delta: f64 },
    IgOu { rho: f64, rate: f64, b: f64, inv_sqrt_rho: f64, base: InverseGaussian<f64> },
    BiOu { phi: [[f64; 2]; 2], alpha: [f64; 2], chol: [[f64; 2]; 2] },
}

impl Stepper {
    fn new(model: &ModelSpec) -> Result<Self> {
        let t = model.theta();
        let delta = model.delta();
        Ok(match model.kind() {
            ModelKind::Vsk => Stepper::Vsk {
                mean_rev: (-t[0] * delta).exp(),
                alpha: t[1],
                sd: t[2] * (-(-2.0 * t[0] * delta).exp_m1() / (2.0 * t[0])).sqrt(),
            },
            ModelKind::Cir => Stepper::Cir {
                rho: (-t[0] * delta).exp(),
                c: 4.0 * t[0] / (t[2] * t[2] * -(-t[0] * delta).exp_m1()),
                half_q: 2.0 * t[0] * t[1] / (t[2] * t[2]),
            },
            ModelKind::VskMj => Stepper::VskMj { theta: t.to_vec(), delta },
            ModelKind::IgOu => {
                let (lambda, a, b) = (t[0], t[1], t[2]);
                // 1 − √ρ
                let gap = -(-0.5 * lambda * delta).exp_m1();
                let a0 = a * gap;
                Stepper::IgOu {
                    rho: (-lambda * delta).exp(),
                    rate: a * b * gap,
                    b,
                    inv_sqrt_rho: (0.5 * lambda * delta).exp(),
                    base: InverseGaussian::new(a0 / b, a0 * a0).map_err(|e| Error::Parameter(e.to_string()))?,
                }
            }
            ModelKind::BiOu => {
                let m = biou_moments(t, delta);
                Stepper::BiOu { phi: m.phi, alpha: [t[3], t[4]], chol: cholesky2(&m.omega)? }
            }
        })
    }

    fn step<R: Rng + ?Sized>(&mut self, x: &[f64; 2], rng: &mut R) -> Result<([f64; 2], u64)> {
        match self {
            Stepper::Vsk { mean_rev, alpha, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(([*alpha + (x[0] - *alpha) * *mean_rev + *sd * z, 0.0], 0))
            }
            Stepper::Cir { rho, c, half_q } => {
                // cX' ~ noncentral χ²(q, cXρ): Poisson(nc/2) mixture of Gamma(q/2 + N, 2)
                let nc = *c * x[0] * *rho;
                let draw = |rng: &mut R| -> Result<f64> {
                    let k = if nc > 0.0 {
                        Poisson::new(0.5 * nc).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng)
                    } else {
                        0.0
                    };
                    let g = Gamma::new(*half_q + k, 2.0).map_err(|e| Error::Numerical(e.to_string()))?;
                    Ok(g.sample(rng) / *c)
                };
                let mut y = draw(rng)?;
                if y <= 0.0 {
                    y = draw(rng)?;
                }
                if !(y > 0.0) {
                    return Err(Error::Numerical("non-positive CIR draw".into()));
                }
                Ok(([y, 0.0], 0))
            }
            Stepper::VskMj { theta, delta } => {
                let (y, count) = vskmj_step(theta, *delta, x[0], rng);
                Ok(([y, 0.0], count))
            }
            Stepper::IgOu { rho, rate, b, inv_sqrt_rho, base } => {
                // X' = ρX + W + Σ J_i with W ~ IG(a(1−√ρ), b), N ~ Poisson(ab(1−√ρ)),
                // J = Z²/v and √v uniform on [b, b/√ρ].
                let draw = |rng: &mut R| -> Result<f64> {
                    let mut y = *rho * x[0] + base.sample(rng);
                    let count = Poisson::new(*rate).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng) as u64;
                    for _ in 0..count {
                        let s = *b * (1.0 + (*inv_sqrt_rho - 1.0) * rng.random::<f64>());
                        let z: f64 = rng.sample(StandardNormal);
                        y += z * z / (s * s);
                    }
                    Ok(y)
                };
                let mut y = draw(rng)?;
                if y <= 0.0 {
                    y = draw(rng)?;
                }
                if !(y > 0.0) {
                    return Err(Error::Numerical("non-positive IG-OU draw".into()));
                }
                Ok(([y, 0.0], 0))
            }
            Stepper::BiOu { phi, alpha, chol } => {
                let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let d = [x[0] - alpha[0], x[1] - alpha[1]];
                let y0 = alpha[0] + phi[0][0] * d[0] + phi[0][1] * d[1] + chol[0][0] * z[0];
                let y1 = alpha[1] + phi[1][0] * d[0] + phi[1][1] * d[1] + chol[1][0] * z[0] + chol[1][1] * z[1];
                Ok(([y0, y1], 0))
            }
        }
    }
}

/// One sampling interval of the jump-diffusion by Euler sub-stepping.
fn vskmj_step<R: Rng + ?Sized>(theta: &[f64], delta: f64, x: f64, rng: &mut R) -> (f64, u64) {
    let (kappa, alpha, sigma, lambda, eta) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
    let h = delta / VSKMJ_SUBSTEPS as f64;
    let diff_sd = sigma * h.sqrt();
    let poisson = Poisson::new(lambda * h).ok();
    let mut y = x;
    let mut total = 0u64;
    for _ in 0..VSKMJ_SUBSTEPS {
        let z: f64 = rng.sample(StandardNormal);
        let mut next = y + kappa * (alpha - y) * h + diff_sd * z;
        if let Some(p) = &poisson {
            let count = p.sample(rng) as u64;
            if count > 0 {
                let jz: f64 = rng.sample(StandardNormal);
                next += eta * (count as f64).sqrt() * jz;
                total += count;
            }
        }
        y = next;
    }
    (y, total)
}

fn positive_draw(mut draw: impl FnMut() -> f64) -> Result<f64> {
    let x = draw();
    if x > 0.0 {
        return Ok(x);
    }
    let x = draw();
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Numerical("non-positive draw from a positive law".into()))
    }
}

pub(crate) fn cholesky2(m: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    if !(m[0][0] > 0.0) {
        return Err(Error::Singular("covariance is not positive definite".into()));
    }
    let l00 = m[0][0].sqrt();
    let l10 = m[1][0] / l00;
    let rest = m[1][1] - l10 * l10;
    if !(rest > 0.0) {
        return Err(Error::Singular("covariance is not positive definite".into()));
    }
    Ok([[l00, 0.0], [l10, rest.sqrt()]])
}
