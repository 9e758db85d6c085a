#![allow(clippy::needless_range_loop)]

mod common;

use approx::assert_relative_eq;
use ccf_el::baselines::{
    biou_loglik, cir_loglik, loglik, mle_fit, transition_log_density, vsk_loglik, vskmj_approx_loglik, LikelihoodMethod,
};
use ccf_el::init::start_values;
use ccf_el::model::biou_moments;
use ccf_el::{simulate_seeded, Error, ModelKind, ModelSpec, SamplePath};
use common::*;
use proptest::prelude::*;

fn vsk_log_pdf(theta: [f64; 3], x: f64, y: f64) -> f64 {
    let (k, a, s) = (theta[0], theta[1], theta[2]);
    let mean = a + (x - a) * (-k * DELTA).exp();
    let var = s * s * (1.0 - (-2.0 * k * DELTA).exp()) / (2.0 * k);
    normal_pdf(y, mean, var).ln()
}

const VSK: [f64; 3] = [0.858, 0.089, 0.047];

#[test]
fn vsk_single_transition() {
    let v = transition_log_density(&vsk(), &[0.08], &[0.085]).unwrap();
    assert_relative_eq!(v, vsk_log_pdf(VSK, 0.08, 0.085), max_relative = 1e-12);
}

#[test]
fn vsk_path_is_the_product_of_transitions() {
    let x = [0.08, 0.085, 0.079, 0.093, 0.1];
    let p = SamplePath::univariate(x.to_vec(), DELTA).unwrap();
    let oracle: f64 = x.windows(2).map(|w| vsk_log_pdf(VSK, w[0], w[1])).sum();
    assert_relative_eq!(vsk_loglik(&VSK, &p).unwrap(), oracle, max_relative = 1e-12);
}

fn density_mass(model: &ModelSpec, x: f64, lo: f64, hi: f64) -> f64 {
    simpson(|y| transition_log_density(model, &[x], &[y]).unwrap().exp(), lo, hi, 200_000)
}

#[test]
fn cir_density_integrates_to_one() {
    for x in [0.02, 0.09, 0.25] {
        let mass = density_mass(&cir(), x, 1e-9, 1.5);
        assert!((mass - 1.0).abs() < 1e-6, "x={x}: {mass}");
    }
}

#[test]
fn cir_density_matches_its_first_moment() {
    let x = 0.05;
    let m = cir();
    let mean = simpson(|y| y * transition_log_density(&m, &[x], &[y]).unwrap().exp(), 1e-9, 1.5, 200_000);
    let target = 0.091 + (x - 0.091) * (-0.892 * DELTA).exp();
    assert!((mean - target).abs() < 1e-7, "{mean} vs {target}");
}

#[test]
fn mixture_density_integrates_to_one() {
    for x in [0.0, 0.09, 0.3] {
        let mass = density_mass(&vskmj(), x, -1.0, 1.2);
        assert!((mass - 1.0).abs() < 1e-8, "x={x}: {mass}");
    }
}

#[test]
fn mixture_without_jumps_is_vsk() {
    let p = simulate_seeded(&vsk(), 200, 1, 0, None).unwrap();
    let theta = [0.858, 0.089, 0.047, 0.0, 0.067];
    let a = vskmj_approx_loglik(&theta, &p).unwrap();
    let b = vsk_loglik(&VSK, &p).unwrap();
    assert!((a - b).abs() <= 1e-10 * b.abs(), "{a} vs {b}");
}

#[test]
fn mixture_requires_small_jump_probability() {
    let p = simulate_seeded(&vsk(), 50, 1, 0, None).unwrap();
    let theta = [0.858, 0.089, 0.047, 13.0, 0.067];
    assert!(matches!(vskmj_approx_loglik(&theta, &p), Err(Error::Parameter(_))));
}

#[test]
fn decoupled_biou_is_two_vasiceks() {
    let theta = [0.3, 0.0, 0.6, 0.08, 0.09, 0.05, 0.12];
    let m = ModelSpec::new(ModelKind::BiOu, theta.to_vec(), DELTA).unwrap();
    let p = simulate_seeded(&m, 300, 2, 0, None).unwrap();
    let x1 = SamplePath::univariate(p.coordinate(0), DELTA).unwrap();
    let x2 = SamplePath::univariate(p.coordinate(1), DELTA).unwrap();
    let sum = vsk_loglik(&[0.3, 0.08, 0.05], &x1).unwrap() + vsk_loglik(&[0.6, 0.09, 0.12], &x2).unwrap();
    let joint = biou_loglik(&theta, &p).unwrap();
    assert!((joint - sum).abs() <= 1e-10 * sum.abs(), "{joint} vs {sum}");
}

#[test]
fn biou_stationary_covariance_solves_the_lyapunov_equation() {
    let t = [0.22, 0.2, 0.5, 0.08, 0.09, 0.09, 0.17];
    let m = biou_moments(&t, DELTA);
    let k = [[t[0], 0.0], [t[1], t[2]]];
    let s = m.stationary;
    // κΣ + Σκ' = diag(σ11², σ22²)
    for r in 0..2 {
        for c in 0..2 {
            let lhs: f64 = (0..2).map(|j| k[r][j] * s[j][c] + s[r][j] * k[c][j]).sum();
            let rhs = if r == c { t[5 + r].powi(2) } else { 0.0 };
            assert!((lhs - rhs).abs() < 1e-14, "({r},{c}) {lhs} vs {rhs}");
        }
    }
    let far = biou_moments(&t, 1000.0);
    for r in 0..2 {
        for c in 0..2 {
            assert!((far.omega[r][c] - s[r][c]).abs() < 1e-14);
            assert!(far.phi[r][c].abs() < 1e-50);
        }
    }
}

#[test]
fn ig_ou_has_no_likelihood() {
    assert!(matches!(LikelihoodMethod::for_model(ModelKind::IgOu), Err(Error::Parameter(_))));
    let p = simulate_seeded(&igou(), 50, 1, 0, None).unwrap();
    assert!(loglik(ModelKind::IgOu, &[10.0, 1.0, 20.0], &p).is_err());
}

#[test]
fn large_sample_mle_recovers_the_truth() {
    for (m, seed) in [(vsk(), 11), (cir(), 12), (biou(), 13)] {
        // κ̂ has sd about √(2κ/T); T ≈ 8300 years keeps 5% beyond 3 sd.
        let p = simulate_seeded(&m, 100_000, seed, 0, None).unwrap();
        let init = start_values(m.kind(), &p).unwrap();
        let fit = mle_fit(m.kind(), &p, &init).unwrap();
        for (i, (&hat, &truth)) in fit.theta_hat.iter().zip(m.theta()).enumerate() {
            // κ21 is the only parameter whose truth could be near zero
            let tol = 0.05 * truth.abs().max(0.1);
            assert!((hat - truth).abs() <= tol, "{} parameter {i}: {hat} vs {truth}", m.kind());
        }
        let at_truth = loglik(m.kind(), m.theta(), &p).unwrap();
        assert!(fit.loglik >= at_truth, "{}: {} < {at_truth}", m.kind(), fit.loglik);
        assert!(fit.hessian_se.is_some());
    }
}

#[test]
fn approximate_mle_beats_the_truth_on_its_own_objective() {
    let m = vskmj();
    let p = simulate_seeded(&m, 500, 14, 0, None).unwrap();
    let init = start_values(ModelKind::VskMj, &p).unwrap();
    let fit = mle_fit(ModelKind::VskMj, &p, &init).unwrap();
    assert_eq!(fit.method, LikelihoodMethod::Amle);
    assert!(fit.loglik >= loglik(ModelKind::VskMj, m.theta(), &p).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cir_path_likelihood_is_finite(seed in any::<u64>()) {
        let p = simulate_seeded(&cir(), 60, seed, 0, None).unwrap();
        prop_assert!(cir_loglik(&[0.892, 0.091, 0.181], &p).unwrap().is_finite());
    }

    #[test]
    fn vsk_density_is_symmetric_about_the_conditional_mean(x in -0.1f64..0.3, d in 0.0f64..0.05) {
        let mean = 0.089 + (x - 0.089) * (-0.858f64 * DELTA).exp();
        let a = transition_log_density(&vsk(), &[x], &[mean + d]).unwrap();
        let b = transition_log_density(&vsk(), &[x], &[mean - d]).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}
