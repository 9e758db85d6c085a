//! The two-dimensional empirical-likelihood dual at a single frequency node.
//!
//! Given residual vectors `z_t ∈ R²`, find λ with
//! `Q1n(λ) = (1/n) Σ z_t / (1 + λ'z_t) = 0`. This is the stationary point of
//! the concave function `g(λ) = Σ log(1 + λ'z_t)`, which is maximized by a
//! damped Newton method starting from λ = 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `‖Q1n‖` for a converged solve.
pub const Q1N_TOL: f64 = 1e-10;

const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolve {
    pub lambda: [f64; 2],
    pub converged: bool,
    /// `‖Q1n(λ)‖` at the returned λ.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// `Q1n(λ) = (1/n) Σ z_t / (1 + λ'z_t)`.
pub fn q1n(z: &[[f64; 2]], lambda: [f64; 2]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for v in z {
        let w = 1.0 + lambda[0] * v[0] + lambda[1] * v[1];
        g[0] += v[0] / w;
        g[1] += v[1] / w;
    }
    let n = z.len() as f64;
    [g[0] / n, g[1] / n]
}

/// Log-EL ratio `2 Σ log(1 + λ'z_t)`.
pub fn local_el_ratio(z: &[[f64; 2]], lambda: [f64; 2]) -> Result<f64> {
    let mut total = 0.0;
    for v in z {
        let s = lambda[0] * v[0] + lambda[1] * v[1];
        if !(1.0 + s > 0.0) {
            return Err(Error::Feasibility);
        }
        total += s.ln_1p();
    }
    Ok(2.0 * total)
}

/// Solves `Q1n(λ) = 0`.
///
/// Errors with [`Error::ConvexHull`] when the origin is not in the interior of
/// the convex hull of the residuals (no finite root exists) and with
/// [`Error::MaxIter`] when Newton fails to reach [`Q1N_TOL`].
pub fn solve_lambda(z: &[[f64; 2]]) -> Result<LambdaSolve> {
    let n = z.len();
    if n < 3 {
        return Err(Error::Data(format!("the EL dual needs at least 3 residual vectors, got {n}")));
    }
    if z.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
        return Err(Error::Numerical("non-finite residual".into()));
    }
    let nf = n as f64;
    let mut mean = [0.0; 2];
    let mut s = [0.0; 3];
    for v in z {
        mean[0] += v[0];
        mean[1] += v[1];
        s[0] += v[0] * v[0];
        s[1] += v[0] * v[1];
        s[2] += v[1] * v[1];
    }
    mean = [mean[0] / nf, mean[1] / nf];
    let mean_norm = mean[0].hypot(mean[1]);
    if mean_norm <= Q1N_TOL {
        return Ok(LambdaSolve { lambda: [0.0; 2], converged: true, residual_norm: mean_norm, iterations: 0 });
    }
    // Every residual strictly on the mean's side: origin separated from the hull.
    if z.iter().all(|v| v[0] * mean[0] + v[1] * mean[1] > 0.0) {
        return Err(Error::ConvexHull);
    }
    let trace = s[0] + s[2];
    let det = s[0] * s[2] - s[1] * s[1];
    if det <= 1e-14 * trace * trace {
        return solve_collinear(z, s);
    }
    match newton(z) {
        Ok(sol) => Ok(sol),
        Err(e) => {
            if origin_in_interior(z) {
                Err(e)
            } else {
                Err(Error::ConvexHull)
            }
        }
    }
}

/// Convergence test. Besides `‖Q1n‖`, the implied EL weights
/// `p_t = 1/(n(1 + λ'z_t))` must sum to one (`Σ p_t = 1 − λ'Q1n`); this
/// rejects runaway multipliers when the origin sits on the hull boundary.
fn accept(norm: f64, lambda: [f64; 2], q: [f64; 2]) -> bool {
    norm <= Q1N_TOL && (lambda[0] * q[0] + lambda[1] * q[1]).abs() <= 1e-8
}

fn newton(z: &[[f64; 2]]) -> Result<LambdaSolve> {
    let n = z.len();
    let nf = n as f64;
    let floor = 1.0 / nf;
    let mut lambda = [0.0f64; 2];
    for iter in 0..=MAX_NEWTON {
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for v in z {
            let inv = 1.0 / (1.0 + lambda[0] * v[0] + lambda[1] * v[1]);
            let a = v[0] * inv;
            let b = v[1] * inv;
            g[0] += a;
            g[1] += b;
            h[0] += a * a;
            h[1] += a * b;
            h[2] += b * b;
        }
        let q = [g[0] / nf, g[1] / nf];
        let norm = q[0].hypot(q[1]);
        if accept(norm, lambda, q) {
            return Ok(LambdaSolve { lambda, converged: true, residual_norm: norm, iterations: iter });
        }
        if iter == MAX_NEWTON {
            break;
        }
        let det = h[0] * h[2] - h[1] * h[1];
        if !(det > 0.0) {
            return Err(Error::Numerical("singular EL Hessian".into()));
        }
        let step = [(h[2] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[1] * g[0]) / det];
        let decrement = (g[0] * step[0] + g[1] * step[1]).max(0.0).sqrt();
        let mut t = if decrement > 0.25 { 1.0 / (1.0 + decrement) } else { 1.0 };
        let mut halvings = 0;
        loop {
            let cand = [lambda[0] + t * step[0], lambda[1] + t * step[1]];
            if z.iter().all(|v| 1.0 + cand[0] * v[0] + cand[1] * v[1] > floor) {
                lambda = cand;
                break;
            }
            t *= 0.5;
            halvings += 1;
            if halvings > 60 {
                return Err(Error::MaxIter(iter + 1));
            }
        }
    }
    Err(Error::MaxIter(MAX_NEWTON))
}

/// All residuals on one line through the origin: solve the one-dimensional
/// dual along the principal axis.
fn solve_collinear(z: &[[f64; 2]], s: [f64; 3]) -> Result<LambdaSolve> {
    let phi = 0.5 * (2.0 * s[1]).atan2(s[0] - s[2]);
    let e = [phi.cos(), phi.sin()];
    let proj: Vec<f64> = z.iter().map(|v| e[0] * v[0] + e[1] * v[1]).collect();
    let hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(hi > 0.0 && lo < 0.0) {
        return Err(Error::ConvexHull);
    }
    let nf = z.len() as f64;
    // feasible multipliers keep 1 + μ s > 1/n for every projection s
    let margin = 1.0 - 1.0 / nf;
    let mut left = -margin / hi;
    let mut right = margin / -lo;
    let score = |mu: f64| -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for &p in &proj {
            let a = p / (1.0 + mu * p);
            g += a;
            h += a * a;
        }
        (g, h)
    };
    let mut mu = 0.0;
    for iter in 0..=MAX_NEWTON {
        let (g, h) = score(mu);
        let lambda = [mu * e[0], mu * e[1]];
        let q = q1n(z, lambda);
        let norm = q[0].hypot(q[1]);
        if accept(norm, lambda, q) {
            return Ok(LambdaSolve { lambda, converged: true, residual_norm: norm, iterations: iter });
        }
        // g is decreasing in μ: keep a bracket and fall back to bisection.
        if g > 0.0 {
            left = mu;
        } else {
            right = mu;
        }
        let newton = mu + g / h;
        mu = if newton > left && newton < right { newton } else { 0.5 * (left + right) };
    }
    Err(Error::MaxIter(MAX_NEWTON))
}

/// True when the origin lies strictly inside the convex hull of the nonzero
/// residuals, i.e. the largest angular gap between them is below π.
pub(crate) fn origin_in_interior(z: &[[f64; 2]]) -> bool {
    let mut angles: Vec<f64> = z.iter().filter(|v| v[0] != 0.0 || v[1] != 0.0).map(|v| v[1].atan2(v[0])).collect();
    if angles.len() < 3 {
        return false;
    }
    angles.sort_by(f64::total_cmp);
    let mut gap = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap < std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_gives_zero() {
        let v = [0.3, -0.7];
        let z = [v, [-v[0], -v[1]], v, [-v[0], -v[1]]];
        let sol = solve_lambda(&z).unwrap();
        assert_eq!(sol.lambda, [0.0, 0.0]);
        assert_eq!(local_el_ratio(&z, sol.lambda).unwrap(), 0.0);
    }

    #[test]
    fn identical_residuals_are_outside_hull() {
        let z = [[1.0, 0.0]; 5];
        assert!(matches!(solve_lambda(&z), Err(Error::ConvexHull)));
    }

    #[test]
    fn half_plane_is_outside_hull() {
        let z = [[1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.5, 0.2]];
        assert!(matches!(solve_lambda(&z), Err(Error::ConvexHull)));
    }

    #[test]
    fn root_satisfies_the_estimating_equation() {
        let z = [[0.5, 0.1], [-0.2, 0.3], [-0.1, -0.4], [0.1, 0.1]];
        let sol = solve_lambda(&z).unwrap();
        assert!(sol.converged);
        let q = q1n(&z, sol.lambda);
        assert!(q[0].hypot(q[1]) <= Q1N_TOL);
        assert!(local_el_ratio(&z, sol.lambda).unwrap() > 0.0);
    }

    #[test]
    fn collinear_panel() {
        let z = [[1.0, 2.0], [-0.5, -1.0], [-0.25, -0.5], [0.2, 0.4]];
        let sol = solve_lambda(&z).unwrap();
        let q = q1n(&z, sol.lambda);
        assert!(q[0].hypot(q[1]) <= Q1N_TOL);
    }

    #[test]
    fn mirrored_panel_gives_mirrored_multiplier() {
        let z = [[0.5, 0.1], [-0.2, 0.3], [-0.1, -0.4], [0.1, 0.1], [0.05, -0.2]];
        let m: Vec<[f64; 2]> = z.iter().map(|v| [v[0], -v[1]]).collect();
        let a = solve_lambda(&z).unwrap();
        let b = solve_lambda(&m).unwrap();
        assert_eq!(a.lambda[0], b.lambda[0]);
        assert_eq!(a.lambda[1], -b.lambda[1]);
        assert_eq!(local_el_ratio(&z, a.lambda).unwrap(), local_el_ratio(&m, b.lambda).unwrap());
    }

    #[test]
    fn infeasible_multiplier_is_rejected() {
        let z = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(local_el_ratio(&z, [2.0, 0.0]), Err(Error::Feasibility)));
    }

    #[test]
    fn too_few_vectors() {
        assert!(solve_lambda(&[[1.0, 0.0], [-1.0, 0.0]]).is_err());
    }
}
