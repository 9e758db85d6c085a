mod common;

use ccf_el::el::grid::build_test_grid;
use ccf_el::el::{local_el_ratio, solve_lambda};
use ccf_el::spectest::{
    bootstrap_p_value, bootstrap_test, cv_bandwidth, integrated_smoothed_el, local_smoothed_el, max_standardized,
    multi_bandwidth_stat, order_statistic_reject, reference_bandwidth, standardize, state_grid, window_floor,
    KernelForm, KernelSpec, TestOptions, MIN_WINDOW_OBS, STATE_NODES,
};
use ccf_el::{residual, simulate_seeded, Error, FrequencyPoint, InstrumentMode, ModelKind, SamplePath};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn biweight_kernel_values() {
    let k = KernelSpec::biweight(0.5).unwrap();
    assert_eq!(k.kernel(0.0), 15.0 / 16.0);
    assert_eq!(k.kernel(1.0), 0.0);
    assert_eq!(k.kernel(-1.5), 0.0);
    assert!((k.kernel(0.5) - 15.0 / 16.0 * 0.75f64.powi(2)).abs() < 1e-15);
    assert!((k.weight(0.25) - k.kernel(0.5) / 0.5).abs() < 1e-15);
    let mass = simpson(|d| k.weight(d), -0.5, 0.5, 2000);
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(KernelSpec::biweight(0.0).is_err());
}

#[test]
fn uniform_window_with_coincident_states_is_the_plain_el_ratio() {
    let m = vsk();
    let p = simulate_seeded(&m, 120, 3, 0, None).unwrap();
    // Every conditioning state is inside a window this wide, so all weights
    // are equal and the kernel drops out of the ratio.
    let kernel = KernelSpec::new(KernelForm::Uniform, 10.0).unwrap();
    let tau = FrequencyPoint::univariate(20.0, 0.0);
    let raw: Vec<[f64; 2]> = (0..p.len() - 1)
        .map(|t| {
            let e = residual(&m, &tau, p.row(t), p.row(t + 1), InstrumentMode::Test).unwrap();
            [e.re, e.im]
        })
        .collect();
    let plain = local_el_ratio(&raw, solve_lambda(&raw).unwrap().lambda).unwrap();
    let smoothed = local_smoothed_el(&tau, 0.09, &m, &p, &kernel).unwrap();
    assert!((plain - smoothed).abs() < 1e-9 * plain.max(1.0), "{plain} vs {smoothed}");
}

/// Closed-form Vasicek CCF, written out independently of the library.
fn vsk_cf(u: f64, x: f64) -> Complex64 {
    let (k, a, s) = (0.858f64, 0.089, 0.047);
    let mean = a + (x - a) * (-k * DELTA).exp();
    let var = s * s * (1.0 - (-2.0 * k * DELTA).exp()) / (2.0 * k);
    Complex64::new(-0.5 * u * u * var, u * mean).exp()
}

#[test]
fn five_point_toy_matches_oracle() {
    // chosen so the four residuals surround the origin
    let x = [0.079, 0.07, 0.093, 0.11, 0.081];
    let p = SamplePath::univariate(x.to_vec(), DELTA).unwrap();
    let (u, state, h) = (60.0, 0.09, 0.05);
    let kernel = KernelSpec::biweight(h).unwrap();
    let z: Vec<[f64; 2]> = x
        .windows(2)
        .map(|w| {
            let d = (state - w[0]) / h;
            let k = 15.0 / 16.0 * (1.0 - d * d).powi(2) / h;
            let e = Complex64::new(0.0, u * w[1]).exp() - vsk_cf(u, w[0]);
            [k * e.re, k * e.im]
        })
        .collect();
    let lambda = lambda_oracle(&z, 5.0);
    let oracle = 2.0 * z.iter().map(|v| (1.0 + lambda[0] * v[0] + lambda[1] * v[1]).ln()).sum::<f64>();
    let tau = FrequencyPoint::univariate(u, 0.0);
    let value = local_smoothed_el(&tau, state, &vsk(), &p, &kernel).unwrap();
    assert!((value - oracle).abs() < 1e-6, "{value} vs {oracle}");
}

#[test]
fn sparse_window_is_reported() {
    let p = simulate_seeded(&vsk(), 100, 4, 0, None).unwrap();
    let kernel = KernelSpec::biweight(1e-6).unwrap();
    let tau = FrequencyPoint::univariate(10.0, 0.0);
    assert!(matches!(local_smoothed_el(&tau, 0.5, &vsk(), &p, &kernel), Err(Error::SparseNeighborhood(_))));
}

#[test]
fn state_grid_spans_the_central_quantiles() {
    let p = simulate_seeded(&vsk(), 500, 5, 0, None).unwrap();
    let g = state_grid(&p);
    assert_eq!(g.len(), STATE_NODES);
    let mut x = p.coordinate(0);
    x.sort_by(f64::total_cmp);
    assert!(g[0] > x[0] && g[STATE_NODES - 1] < x[x.len() - 1]);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn cv_bandwidth_is_scale_equivariant_and_deterministic() {
    let p = simulate_seeded(&vsk(), 300, 6, 0, None).unwrap();
    let h = cv_bandwidth(&p).unwrap();
    assert_eq!(h, cv_bandwidth(&p).unwrap());
    for c in [0.1, 3.0, 100.0] {
        let hs = cv_bandwidth(&p.scaled(c).unwrap()).unwrap();
        assert!((hs - c * h).abs() <= 1e-9 * c * h, "c={c}: {hs} vs {}", c * h);
    }
    let sd = ccf_el::stats::sd(p.data());
    assert!(h >= 0.02 * sd * (1.0 - 1e-12) && h <= sd * (1.0 + 1e-12));
    let short = simulate_seeded(&vsk(), 40, 6, 0, None).unwrap();
    assert!(matches!(cv_bandwidth(&short), Err(Error::Data(_))));
}

#[test]
fn reference_bandwidth_fills_every_window() {
    let p = simulate_seeded(&igou(), 300, 7, 0, None).unwrap();
    let floor = window_floor(&p, 0.7).unwrap();
    let h = reference_bandwidth(&p).unwrap();
    assert!(h >= floor);
    let x = p.coordinate(0);
    let cond = &x[..x.len() - 1];
    let narrowest = KernelSpec::biweight(0.7 * h).unwrap();
    for s in state_grid(&p) {
        let inside = cond.iter().filter(|&&c| narrowest.weight(s - c) > 0.0).count();
        assert!(inside >= MIN_WINDOW_OBS, "state {s}: {inside}");
    }
}

#[test]
fn statistic_is_zero_free_and_finite_under_the_null() {
    let m = vsk();
    let p = simulate_seeded(&m, 250, 8, 0, None).unwrap();
    let grid = build_test_grid(&p, &m).unwrap();
    let h = reference_bandwidth(&p).unwrap();
    let stat = multi_bandwidth_stat(&m, &p, &[h, 1.2 * h], &grid, KernelForm::Biweight).unwrap();
    assert_eq!(stat.statistics.len(), 2);
    assert!(stat.statistics.iter().all(|s| s.is_finite() && *s >= 0.0));
    assert_eq!(stat.t_n, max_standardized(&stat.bandwidths, &stat.statistics));
    let single = integrated_smoothed_el(&m, &p, &KernelSpec::biweight(h).unwrap(), &grid, &state_grid(&p)).unwrap();
    assert!((single.value - stat.statistics[0]).abs() < 1e-12);
}

#[test]
fn bootstrap_test_is_reproducible_across_thread_counts() {
    let p = simulate_seeded(&vsk(), 150, 9, 0, None).unwrap();
    let opts = TestOptions::new(9, 0.05, 17);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| bootstrap_test(ModelKind::Vsk, &p, &opts).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.p_value >= 0.1 && a.p_value <= 1.0);
    assert_eq!(a.bootstrap.len() + a.failed, 9);
    let other = bootstrap_test(ModelKind::Vsk, &p, &TestOptions::new(9, 0.05, 18)).unwrap();
    assert_ne!(a.bootstrap, other.bootstrap);
}

#[test]
fn test_options_are_validated() {
    let p = simulate_seeded(&vsk(), 150, 9, 0, None).unwrap();
    assert!(matches!(bootstrap_test(ModelKind::Vsk, &p, &TestOptions::new(0, 0.05, 1)), Err(Error::Config(_))));
    assert!(matches!(bootstrap_test(ModelKind::Vsk, &p, &TestOptions::new(9, 1.5, 1)), Err(Error::Config(_))));
    let bi = simulate_seeded(&biou(), 150, 9, 0, None).unwrap();
    assert!(bootstrap_test(ModelKind::BiOu, &bi, &TestOptions::new(9, 0.05, 1)).is_err());
}

fn stats_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.001f64..1.0, 0.0f64..50.0), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn t_n_is_the_largest_standardized_value(pairs in stats_strategy(), bump in 0.0f64..10.0, pick in 0usize..8) {
        let (h, l): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
        let t = max_standardized(&h, &l);
        prop_assert!(h.iter().zip(&l).all(|(&h, &l)| standardize(l, h) <= t));
        prop_assert!(h.iter().zip(&l).any(|(&h, &l)| standardize(l, h) == t));
        // raising one statistic never lowers T_n
        let mut raised = l.clone();
        let i = pick % raised.len();
        raised[i] += bump;
        prop_assert!(max_standardized(&h, &raised) >= t);
        // the order of the bandwidths does not matter
        let (hr, lr): (Vec<f64>, Vec<f64>) = pairs.iter().rev().cloned().unzip();
        prop_assert_eq!(max_standardized(&hr, &lr), t);
    }

    #[test]
    fn p_values_are_bounded(t in -10.0f64..10.0, boot in prop::collection::vec(-10.0f64..10.0, 1..300)) {
        let p = bootstrap_p_value(t, &boot);
        let b = boot.len() as f64;
        prop_assert!(p >= 1.0 / (b + 1.0) && p <= 1.0);
        // rejection at level α implies p ≤ α + 2/(B+1)
        if order_statistic_reject(t, &boot, 0.05) {
            prop_assert!(p <= 0.05 + 2.0 / (b + 1.0));
        }
    }
}
