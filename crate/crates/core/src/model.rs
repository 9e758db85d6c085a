//! The five parametric models, their transition characteristic functions,
//! the instrument weight and the CCF residuals.
//!
//! Every model here is affine in the conditioning state: the one-step CCF has
//! the form `exp(c0(u) + c1(u)' x)`. [`AffineCcf`] holds those coefficients
//! for a fixed frequency so that a whole sample can be evaluated with one
//! complex exponential per observation.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Vasicek: `dX = κ(α − X)dt + σ dB`.
    Vsk,
    /// Cox–Ingersoll–Ross: `dX = κ(α − X)dt + σ√X dB`.
    Cir,
    /// Vasicek with Merton jumps, N(0, η²) sizes at rate λ.
    VskMj,
    /// Inverse-Gaussian OU: `dX = −λX dt + dL(λt)`, stationary law IG(a, b).
    IgOu,
    /// Bivariate OU with lower-triangular mean reversion.
    BiOu,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Vsk, ModelKind::Cir, ModelKind::VskMj, ModelKind::IgOu, ModelKind::BiOu];

    pub const UNIVARIATE: [ModelKind; 4] = [ModelKind::Vsk, ModelKind::Cir, ModelKind::VskMj, ModelKind::IgOu];

    pub fn dim(self) -> usize {
        match self {
            ModelKind::BiOu => 2,
            _ => 1,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Vsk | ModelKind::Cir => &["kappa", "alpha", "sigma"],
            ModelKind::VskMj => &["kappa", "alpha", "sigma", "lambda", "eta"],
            ModelKind::IgOu => &["lambda", "a", "b"],
            ModelKind::BiOu => &["kappa11", "kappa21", "kappa22", "alpha1", "alpha2", "sigma11", "sigma22"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    /// Whether observations must be strictly positive.
    pub fn positive_state(self) -> bool {
        matches!(self, ModelKind::Cir | ModelKind::IgOu)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Vsk => "VSK",
            ModelKind::Cir => "CIR",
            ModelKind::VskMj => "VSK-MJ",
            ModelKind::IgOu => "IG-OU",
            ModelKind::BiOu => "BI-OU",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Vsk => "vsk",
            ModelKind::Cir => "cir",
            ModelKind::VskMj => "vsk-mj",
            ModelKind::IgOu => "ig-ou",
            ModelKind::BiOu => "bi-ou",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect();
        match key.as_str() {
            "vsk" | "vasicek" => Ok(ModelKind::Vsk),
            "cir" => Ok(ModelKind::Cir),
            "vskmj" => Ok(ModelKind::VskMj),
            "igou" => Ok(ModelKind::IgOu),
            "biou" => Ok(ModelKind::BiOu),
            _ => Err(Error::Config(format!("unknown model '{s}'"))),
        }
    }
}

/// A model family with a parameter vector and a sampling interval (years).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    kind: ModelKind,
    theta: Vec<f64>,
    delta: f64,
}

impl ModelSpec {
    /// Builds a spec, enforcing the strict parameter-space invariants.
    pub fn new(kind: ModelKind, theta: Vec<f64>, delta: f64) -> Result<Self> {
        let spec = ModelSpec { kind, theta, delta };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec without validation. Evaluation routines still check the
    /// closed parameter space, so this is only useful for boundary points such
    /// as a jump model with zero intensity.
    pub fn new_unchecked(kind: ModelKind, theta: Vec<f64>, delta: f64) -> Self {
        ModelSpec { kind, theta, delta }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        ModelSpec::new(self.kind, theta, self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        self.check(true)
    }

    /// Closed-set check used by the evaluation routines: jump intensity and
    /// jump scale may be zero.
    pub(crate) fn check_eval(&self) -> Result<()> {
        self.check(false)
    }

    fn check(&self, strict: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(format!("{}: {msg}", self.kind)));
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.theta.len() != self.kind.n_params() {
            return bad(format!("expected {} parameters, got {}", self.kind.n_params(), self.theta.len()));
        }
        if let Some(v) = self.theta.iter().find(|v| !v.is_finite()) {
            return bad(format!("non-finite parameter {v}"));
        }
        let t = &self.theta;
        match self.kind {
            ModelKind::Vsk => {
                if t[0] <= 0.0 || t[2] <= 0.0 {
                    return bad("kappa and sigma must be positive".into());
                }
            }
            ModelKind::Cir => {
                if t[0] <= 0.0 || t[1] <= 0.0 || t[2] <= 0.0 {
                    return bad("kappa, alpha and sigma must be positive".into());
                }
                let feller = 2.0 * t[0] * t[1] / (t[2] * t[2]);
                if feller <= 1.0 {
                    return bad(format!("2*kappa*alpha/sigma^2 = {feller} must exceed 1"));
                }
            }
            ModelKind::VskMj => {
                if t[0] <= 0.0 || t[2] <= 0.0 {
                    return bad("kappa and sigma must be positive".into());
                }
                let jumps_ok = if strict { t[3] > 0.0 && t[4] > 0.0 } else { t[3] >= 0.0 && t[4] >= 0.0 };
                if !jumps_ok {
                    return bad("lambda and eta must be positive".into());
                }
            }
            ModelKind::IgOu => {
                if t.iter().any(|&v| v <= 0.0) {
                    return bad("lambda, a and b must be positive".into());
                }
            }
            ModelKind::BiOu => {
                if t[0] <= 0.0 || t[2] <= 0.0 || t[5] <= 0.0 || t[6] <= 0.0 {
                    return bad("kappa11, kappa22, sigma11, sigma22 must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Checks that `x` lies in the state space.
    pub fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!("state has dimension {}, model needs {}", x.len(), self.dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite state".into()));
        }
        if self.kind.positive_state() && x[0] <= 0.0 {
            return Err(Error::Domain(format!("{} requires x > 0, got {}", self.kind, x[0])));
        }
        Ok(())
    }

    /// Coefficients of the transition CCF at frequency `u`.
    ///
    /// Negative frequencies are evaluated as the conjugate of the positive
    /// one, so `ψ(−u) = conj ψ(u)` holds bit-exactly.
    pub fn affine_ccf(&self, u: &[f64]) -> Result<AffineCcf> {
        self.check_eval()?;
        if u.len() != self.dim() {
            return Err(Error::Parameter(format!("frequency has dimension {}, model needs {}", u.len(), self.dim())));
        }
        if is_negative(u) {
            let flipped: Vec<f64> = u.iter().map(|v| -v).collect();
            return Ok(self.affine_ccf_canonical(&flipped)?.conj());
        }
        self.affine_ccf_canonical(u)
    }

    fn affine_ccf_canonical(&self, u: &[f64]) -> Result<AffineCcf> {
        let t = &self.theta;
        let delta = self.delta;
        let i = Complex64::i();
        let zero = Complex64::new(0.0, 0.0);
        if u.iter().all(|&v| v == 0.0) {
            return Ok(AffineCcf { c0: zero, c1: [zero; 2] });
        }
        let coeffs = match self.kind {
            ModelKind::Vsk => {
                let (kappa, alpha, sigma) = (t[0], t[1], t[2]);
                let u = u[0];
                let rho = (-kappa * delta).exp();
                let one_minus_rho = -(-kappa * delta).exp_m1();
                let var = sigma * sigma * -(-2.0 * kappa * delta).exp_m1() / (2.0 * kappa);
                AffineCcf {
                    c0: Complex64::new(-0.5 * u * u * var, u * alpha * one_minus_rho),
                    c1: [i * (u * rho), zero],
                }
            }
            ModelKind::Cir => {
                let (kappa, alpha, sigma) = (t[0], t[1], t[2]);
                let u = u[0];
                let rho = (-kappa * delta).exp();
                let c = 4.0 * kappa / (sigma * sigma * -(-kappa * delta).exp_m1());
                let q = 4.0 * kappa * alpha / (sigma * sigma);
                let z = Complex64::new(1.0, -2.0 * u / c);
                AffineCcf { c0: -0.5 * q * z.ln(), c1: [i * (u * rho) / z, zero] }
            }
            ModelKind::VskMj => {
                let (kappa, alpha, sigma, lambda, eta) = (t[0], t[1], t[2], t[3], t[4]);
                let u = u[0];
                let rho = (-kappa * delta).exp();
                let one_minus_rho = -(-kappa * delta).exp_m1();
                let diffusion = sigma * sigma * u * u / (4.0 * kappa) * (-2.0 * kappa * delta).exp_m1();
                // −λδ + γ(u), evaluated without the cancelling λδ terms.
                let jump = lambda / (2.0 * kappa) * jump_integral(kappa, eta, delta, u)?;
                AffineCcf { c0: Complex64::new(diffusion + jump, alpha * u * one_minus_rho), c1: [i * (u * rho), zero] }
            }
            ModelKind::IgOu => {
                let (lambda, a, b) = (t[0], t[1], t[2]);
                let u = u[0];
                let rho = (-lambda * delta).exp();
                let b2 = b * b;
                let s1 = Complex64::new(b2, -2.0 * u).sqrt();
                let s2 = Complex64::new(b2, -2.0 * u * rho).sqrt();
                AffineCcf { c0: -a * (s1 - s2), c1: [i * (u * rho), zero] }
            }
            ModelKind::BiOu => {
                let m = biou_moments(t, delta);
                let alpha = [t[3], t[4]];
                let phi = m.phi;
                // u'(I − Φ)α and u'Ωu
                let mut drift = 0.0;
                for r in 0..2 {
                    let mut row = alpha[r];
                    for c in 0..2 {
                        row -= phi[r][c] * alpha[c];
                    }
                    drift += u[r] * row;
                }
                let mut quad = 0.0;
                for r in 0..2 {
                    for c in 0..2 {
                        quad += u[r] * m.omega[r][c] * u[c];
                    }
                }
                let phit_u = [phi[0][0] * u[0] + phi[1][0] * u[1], phi[0][1] * u[0] + phi[1][1] * u[1]];
                AffineCcf { c0: Complex64::new(-0.5 * quad, drift), c1: [i * phit_u[0], i * phit_u[1]] }
            }
        };
        Ok(coeffs)
    }
}

/// `exp(c0 + c1'x)`: the transition CCF at one frequency as a function of the
/// conditioning state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCcf {
    pub c0: Complex64,
    pub c1: [Complex64; 2],
}

impl AffineCcf {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let mut e = self.c0;
        for (c, xi) in self.c1.iter().zip(x) {
            e += c * xi;
        }
        e.exp()
    }

    fn conj(self) -> Self {
        AffineCcf { c0: self.c0.conj(), c1: [self.c1[0].conj(), self.c1[1].conj()] }
    }
}

/// Lexicographic sign of a frequency vector.
pub(crate) fn is_negative(u: &[f64]) -> bool {
    for &v in u {
        if v < 0.0 {
            return true;
        }
        if v > 0.0 {
            return false;
        }
    }
    false
}

/// `e^{is}` with the sine taken on `|s|`, so `cis(−s) = conj(cis(s))` exactly.
#[inline]
pub(crate) fn cis(s: f64) -> Complex64 {
    if s < 0.0 {
        let (sn, cs) = (-s).sin_cos();
        Complex64::new(cs, -sn)
    } else {
        let (sn, cs) = s.sin_cos();
        Complex64::new(cs, sn)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value of a transition characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcfValue(pub Complex64);

impl CcfValue {
    pub fn value(self) -> Complex64 {
        self.0
    }
}

/// `ψ(u; θ) = E[e^{iu'X_{t+1}} | X_t = x]`.
pub fn ccf(model: &ModelSpec, u: &[f64], x: &[f64]) -> Result<CcfValue> {
    model.check_eval()?;
    model.check_state(x)?;
    Ok(CcfValue(model.affine_ccf(u)?.eval(x)))
}

/// `∫_{e^{−2κδ}}^1 (e^{−η²u²y/2} − 1)/y dy`, so that `γ = λδ + λ/(2κ)·I`.
fn jump_integral(kappa: f64, eta: f64, delta: f64, u: f64) -> Result<f64> {
    let c = 0.5 * eta * eta * u * u;
    if c == 0.0 {
        return Ok(0.0);
    }
    let lower = (-2.0 * kappa * delta).exp();
    let q = quad::integrate(|y| (-c * y).exp_m1() / y, lower, 1.0, 1e-10, 1e-300)?;
    Ok(q.value)
}

/// The γ term of the jump-diffusion CCF,
/// `λ/(2κ) ∫_{e^{−2κδ}}^1 exp(−η²u²y/2)/y dy`.
pub fn vskmj_gamma(kappa: f64, lambda: f64, eta: f64, delta: f64, u: f64) -> Result<f64> {
    if !(kappa > 0.0 && lambda >= 0.0 && eta >= 0.0 && delta > 0.0 && u.is_finite()) {
        return Err(Error::Parameter(format!(
            "gamma needs kappa > 0, lambda >= 0, eta >= 0, delta > 0 (got {kappa}, {lambda}, {eta}, {delta})"
        )));
    }
    Ok(lambda * delta + lambda / (2.0 * kappa) * jump_integral(kappa, eta, delta, u)?)
}

/// Conditional moments of the bivariate OU transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiOuMoments {
    /// `exp(−κδ)`
    pub phi: [[f64; 2]; 2],
    /// Stationary covariance Σ.
    pub stationary: [[f64; 2]; 2],
    /// One-step covariance `Ω(δ) = Σ − ΦΣΦ'`.
    pub omega: [[f64; 2]; 2],
}

/// `exp(−κδ)`, stationary covariance and `Ω(δ)` for the lower-triangular
/// bivariate OU with parameters `(κ11, κ21, κ22, α1, α2, σ11, σ22)`.
pub fn biou_moments(theta: &[f64], delta: f64) -> BiOuMoments {
    let (k11, k21, k22) = (theta[0], theta[1], theta[2]);
    let (s11, s22) = (theta[5], theta[6]);
    let a = -k11 * delta;
    let d = -k22 * delta;
    let divided = if (k11 - k22).abs() < 1e-8 {
        ((a + d) / 2.0).exp() * (1.0 + (a - d) * (a - d) / 24.0)
    } else {
        let h = 0.5 * (a - d);
        ((a + d) / 2.0).exp() * h.sinh() / h
    };
    let phi = [[a.exp(), 0.0], [-k21 * delta * divided, d.exp()]];

    let trace = k11 + k22;
    let det = k11 * k22;
    let ss = [[s11 * s11, 0.0], [0.0, s22 * s22]];
    let shifted = [[k11 - trace, 0.0], [k21, k22 - trace]];
    let msm = mat_mul(&mat_mul(&shifted, &ss), &transpose(&shifted));
    let mut stationary = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            stationary[r][c] = (det * ss[r][c] + msm[r][c]) / (2.0 * trace * det);
        }
    }
    let carried = mat_mul(&mat_mul(&phi, &stationary), &transpose(&phi));
    let mut omega = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            omega[r][c] = stationary[r][c] - carried[r][c];
        }
    }
    // symmetric by construction; remove rounding asymmetry
    let off = 0.5 * (omega[0][1] + omega[1][0]);
    omega[0][1] = off;
    omega[1][0] = off;
    BiOuMoments { phi, stationary, omega }
}

pub(crate) fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub(crate) fn transpose(a: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// A frequency node `τ = (u, r)`: CCF frequency `u` and instrument frequency `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    dim: usize,
    u: [f64; 2],
    r: [f64; 2],
}

impl FrequencyPoint {
    pub fn univariate(u: f64, r: f64) -> Self {
        FrequencyPoint { dim: 1, u: [u, 0.0], r: [r, 0.0] }
    }

    pub fn bivariate(u: [f64; 2], r: [f64; 2]) -> Self {
        FrequencyPoint { dim: 2, u, r }
    }

    pub fn new(u: &[f64], r: &[f64]) -> Result<Self> {
        if u.len() != r.len() || !(1..=2).contains(&u.len()) {
            return Err(Error::Parameter("frequency vectors must both have length 1 or 2".into()));
        }
        if u.iter().chain(r).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("frequency entries must be finite".into()));
        }
        let mut p = FrequencyPoint { dim: u.len(), u: [0.0; 2], r: [0.0; 2] };
        p.u[..u.len()].copy_from_slice(u);
        p.r[..r.len()].copy_from_slice(r);
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn u(&self) -> &[f64] {
        &self.u[..self.dim]
    }

    pub fn r(&self) -> &[f64] {
        &self.r[..self.dim]
    }

    pub fn negated(&self) -> Self {
        FrequencyPoint { dim: self.dim, u: [-self.u[0], -self.u[1]], r: [-self.r[0], -self.r[1]] }
    }

    /// True when this node is the canonical member of its `±τ` pair.
    pub fn is_canonical(&self) -> bool {
        let mut key = [0.0; 4];
        key[..self.dim].copy_from_slice(self.u());
        key[self.dim..2 * self.dim].copy_from_slice(self.r());
        !is_negative(&key[..2 * self.dim])
    }
}

/// Which instrument the residuals carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentMode {
    /// `w(u, r; x) = e^{ir'x}`
    Estimate,
    /// `w ≡ 1`
    Test,
}

/// Instrument weight `w(u, r; x)`.
pub fn instrument_weight(tau: &FrequencyPoint, x: &[f64], mode: InstrumentMode) -> Complex64 {
    match mode {
        InstrumentMode::Test => Complex64::new(1.0, 0.0),
        InstrumentMode::Estimate => cis(dot(tau.r(), x)),
    }
}

/// CCF residual `ε_t(τ; θ) = w(u, r; X_t)(e^{iu'X_{t+1}} − ψ(u; θ, X_t))`.
pub fn residual(
    model: &ModelSpec,
    tau: &FrequencyPoint,
    x_t: &[f64],
    x_next: &[f64],
    mode: InstrumentMode,
) -> Result<Complex64> {
    if tau.dim() != model.dim() {
        return Err(Error::Parameter("frequency dimension does not match the model".into()));
    }
    model.check_state(x_next)?;
    let psi = ccf(model, tau.u(), x_t)?.value();
    let w = instrument_weight(tau, x_t, mode);
    Ok(w * (cis(dot(tau.u(), x_next)) - psi))
}
