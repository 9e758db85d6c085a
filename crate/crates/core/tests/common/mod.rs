//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ccf_el::rng::stream_rng;
use ccf_el::simulate::simulate_path;
use ccf_el::{ModelKind, ModelSpec};
use num_complex::Complex64;

pub const DELTA: f64 = 1.0 / 12.0;

pub fn vsk() -> ModelSpec {
    ModelSpec::new(ModelKind::Vsk, vec![0.858, 0.089, 0.047], DELTA).unwrap()
}

pub fn cir() -> ModelSpec {
    ModelSpec::new(ModelKind::Cir, vec![0.892, 0.091, 0.181], DELTA).unwrap()
}

pub fn vskmj() -> ModelSpec {
    ModelSpec::new(ModelKind::VskMj, vec![0.858, 0.089, 0.047, 2.0, 0.067], DELTA).unwrap()
}

pub fn igou() -> ModelSpec {
    ModelSpec::new(ModelKind::IgOu, vec![10.0, 1.0, 20.0], DELTA).unwrap()
}

pub fn biou() -> ModelSpec {
    ModelSpec::new(ModelKind::BiOu, vec![0.22, 0.2, 0.5, 0.08, 0.09, 0.09, 0.17], DELTA).unwrap()
}

pub fn all_models() -> Vec<ModelSpec> {
    vec![vsk(), cir(), vskmj(), igou(), biou()]
}

/// A typical state for each model (near the stationary mean).
pub fn typical_state(model: &ModelSpec) -> Vec<f64> {
    match model.kind() {
        ModelKind::BiOu => vec![0.08, 0.09],
        ModelKind::IgOu => vec![0.05],
        _ => vec![0.09],
    }
}

fn g_prime(z: &[[f64; 2]], l: [f64; 2], k: usize) -> f64 {
    z.iter().map(|v| v[k] / (1.0 + l[0] * v[0] + l[1] * v[1])).sum()
}

/// Feasible interval of λ₂ for fixed λ₁ inside `[-bound, bound]`.
fn lambda2_interval(z: &[[f64; 2]], l1: f64, bound: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (-bound, bound);
    for v in z {
        let c = 1.0 + l1 * v[0];
        if v[1] == 0.0 {
            if c <= 0.0 {
                return None;
            }
        } else if v[1] > 0.0 {
            lo = lo.max(-c / v[1]);
        } else {
            hi = hi.min(-c / v[1]);
        }
    }
    (lo < hi).then_some((lo, hi))
}

fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    // Endpoints may be infeasible, so probe just inside.
    let pad = 1e-12 * (hi - lo).max(1e-300);
    lo += pad;
    hi -= pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Root of `Q1n(λ) = 0` in `[-bound, bound]²` by nested bisection on the
/// gradient of the concave dual `Σ log(1 + λ'z)`: the inner search maximizes
/// over λ₂ for fixed λ₁, the outer search uses the envelope derivative in λ₁.
/// A coarse grid scan first brackets λ₁.
pub fn lambda_oracle(z: &[[f64; 2]], bound: f64) -> [f64; 2] {
    let inner = |l1: f64| -> Option<f64> {
        let (lo, hi) = lambda2_interval(z, l1, bound)?;
        Some(bisect_decreasing(|l2| g_prime(z, [l1, l2], 1), lo, hi))
    };
    let outer = |l1: f64| -> f64 {
        match inner(l1) {
            Some(l2) => g_prime(z, [l1, l2], 0),
            None => f64::NAN,
        }
    };
    // Bracket the feasible λ₁ range on a dense grid.
    let steps = 4000;
    let feasible: Vec<f64> =
        (0..=steps).map(|i| -bound + 2.0 * bound * i as f64 / steps as f64).filter(|&l1| inner(l1).is_some()).collect();
    let (mut lo, mut hi) = (feasible[0], feasible[feasible.len() - 1]);
    for w in feasible.windows(2) {
        let (a, b) = (outer(w[0]), outer(w[1]));
        if a > 0.0 && b <= 0.0 {
            lo = w[0];
            hi = w[1];
            break;
        }
    }
    let l1 = bisect_decreasing(
        |l| {
            let v = outer(l);
            if v.is_nan() {
                if l < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                v
            }
        },
        lo,
        hi,
    );
    [l1, inner(l1).unwrap()]
}

/// Composite Simpson rule with `panels` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Monte Carlo mean of `e^{i u'X_{t+1}}` from `x`, with its standard errors
/// (real, imaginary).
pub fn mc_ccf(model: &ModelSpec, x: &[f64], u: &[f64], draws: usize, seed: u64) -> (Complex64, f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let mut re = Vec::with_capacity(draws);
    let mut im = Vec::with_capacity(draws);
    for _ in 0..draws {
        let p = simulate_path(model, 2, &mut rng, Some(x)).unwrap();
        let y = p.row(1);
        let phase: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
        re.push(phase.cos());
        im.push(phase.sin());
    }
    let (mr, sr) = mean_se(&re);
    let (mi, si) = mean_se(&im);
    (Complex64::new(mr, mi), sr, si)
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `|a - b| ≤ k·se`, with a tiny absolute floor for degenerate SEs.
pub fn within_se(a: f64, b: f64, se: f64, k: f64) -> bool {
    (a - b).abs() <= k * se + 1e-12
}
