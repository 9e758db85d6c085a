//! Nelder–Mead simplex minimization with a restart.
//!
//! Objectives return `f64::INFINITY` outside the parameter space; the simplex
//! treats such points as worse than any finite value, which acts as a barrier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Convergence when every vertex is within this relative distance of the
    /// best one, coordinate by coordinate.
    pub rel_tol: f64,
    /// Initial simplex edge as a fraction of each starting coordinate.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_iter: 2000, rel_tol: 1e-6, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

/// Coordinates with magnitude below this use an absolute scale in the
/// convergence test.
const SCALE_FLOOR: f64 = 1e-3;

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// One Nelder–Mead run (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let p = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        sanitize(f(x))
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..p {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 { v[i] * (1.0 + opts.initial_step) } else { 2.5e-4 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=p).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        history.push(values[0]);

        let best = &simplex[0];
        let spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs() / b.abs().max(SCALE_FLOOR)))
            .fold(0.0, f64::max);
        if spread < opts.rel_tol && values[0].is_finite() {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; p];
        for v in &simplex[..p] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / p as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[p]).map(|(c, w)| c + t * (c - w)).collect() };
        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                simplex[p] = expanded;
                values[p] = fe;
            } else {
                simplex[p] = reflected;
                values[p] = fr;
            }
            continue;
        }
        if fr < values[p - 1] {
            simplex[p] = reflected;
            values[p] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[p] {
            let c = along(0.5);
            let fc = eval(&c, &mut evaluations);
            (c, fc)
        } else {
            let c = along(-0.5);
            let fc = eval(&c, &mut evaluations);
            (c, fc)
        };
        if fc < values[p].min(fr) {
            simplex[p] = contracted;
            values[p] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=p {
            let shrunk: Vec<f64> = best.iter().zip(&simplex[i]).map(|(b, v)| b + 0.5 * (v - b)).collect();
            values[i] = eval(&shrunk, &mut evaluations);
            simplex[i] = shrunk;
        }
    }
    let best = (0..=p).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    NelderMeadResult { x: simplex[best].clone(), value: values[best], iterations, evaluations, converged, history }
}

/// Runs Nelder–Mead, then restarts once from the best vertex with a fresh
/// simplex. Fails only when neither run converges.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<NelderMeadResult> {
    if !sanitize(f(x0)).is_finite() {
        return Err(Error::Optimizer("objective is not finite at the starting point".into()));
    }
    let first = nelder_mead(&mut f, x0, opts);
    let second = nelder_mead(&mut f, &first.x, opts);
    if !first.converged && !second.converged {
        return Err(Error::Optimizer(format!("no convergence within {} iterations after a restart", opts.max_iter)));
    }
    let mut history = first.history;
    history.extend(&second.history);
    let (x, value) = if second.value <= first.value { (second.x, second.value) } else { (first.x, first.value) };
    Ok(NelderMeadResult {
        x,
        value,
        iterations: first.iterations + second.iterations,
        evaluations: first.evaluations + second.evaluations + 1,
        converged: true,
        history,
    })
}
