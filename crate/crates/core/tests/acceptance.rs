//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! `--slow` runs the full size study (n = 250, 200 replicates) instead of the
//! quick variant; `--only 1,6` restricts the run. `CCF_EL_TBILL` may point to
//! a `t,x` CSV of the genuine monthly T-bill series for the case study.

#![allow(clippy::type_complexity, clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::time::Instant;

use ccf_el::baselines::transition_log_density;
use ccf_el::el::dual::Q1N_TOL;
use ccf_el::el::grid::build_grid;
use ccf_el::el::{integrated_el_ratio, local_el_ratio, q1n, solve_lambda, ElProblem};
use ccf_el::io::{csv_string, ingest_csv, Method, DEFAULT_DELTA};
use ccf_el::rng::stream_rng;
use ccf_el::spectest::{bootstrap_p_value, bootstrap_test, max_standardized, TestOptions};
use ccf_el::study::{
    run_case_study, run_mc_study, synthetic_tbill, CaseStudyConfig, StartPoint, StudyConfig, StudyReport, TestSpec,
    SYNTHETIC_TBILL_SEED,
};
use ccf_el::{ccf, simulate_seeded, InstrumentMode, ModelKind, ModelSpec};
use common::*;
use rand::seq::SliceRandom;
use rand::Rng;

type Check = Result<String, String>;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let slow = args.iter().any(|a| a == "--slow");
    let only: Option<Vec<usize>> = args
        .iter()
        .position(|a| a == "--only")
        .and_then(|i| args.get(i + 1))
        .map(|list| list.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(usize, &str, Box<dyn Fn() -> Check>); 7] = [
        (1, "VSK estimator means (n=500, R=100)", Box::new(vsk_means)),
        (2, "VSK-MJ estimator means (n=500, R=100)", Box::new(vskmj_means)),
        (3, "IG-OU EL means (n=500, R=100)", Box::new(igou_means)),
        (
            4,
            if slow { "size, VSK null (n=250, 200 reps, B=99)" } else { "size, VSK null (n=125, 50 reps, B=99)" },
            Box::new(move || size(slow)),
        ),
        (5, "power, VSK-MJ vs VSK null (n=250, 100 reps, B=99)", Box::new(power)),
        (6, "property suite", Box::new(property_suite)),
        (7, "case study", Box::new(case_study)),
    ];
    let mut failed = 0;
    for (id, name, run) in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS  {name} [{secs:.0}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL  {name} [{secs:.0}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn study(
    model: ModelKind,
    theta: &[f64],
    n: usize,
    reps: usize,
    estimators: Vec<Method>,
    test: Option<TestSpec>,
    seed: u64,
) -> Result<StudyReport, String> {
    let config = StudyConfig {
        model,
        theta: theta.to_vec(),
        n: vec![n],
        delta: DEFAULT_DELTA,
        reps,
        estimators,
        start: StartPoint::Moments,
        test,
        seed,
    };
    run_mc_study(&config).map_err(|e| e.to_string())
}

fn mean_of(report: &StudyReport, method: Method, parameter: &str) -> f64 {
    report.rows.iter().find(|r| r.method == method && r.parameter == parameter).map(|r| r.mean).unwrap_or(f64::NAN)
}

/// Compares study means with targets; every `(method, parameter, target, band)`
/// must hold.
fn compare(report: &StudyReport, checks: &[(Method, &str, f64, f64)]) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for &(method, parameter, target, band) in checks {
        let mean = mean_of(report, method, parameter);
        let pass = (mean - target).abs() <= band;
        ok &= pass;
        parts.push(format!(
            "{method:?} {parameter} {mean:.4} (target {target} ± {band}{})",
            if pass { "" } else { " MISS" }
        ));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn vsk_means() -> Check {
    let r = study(ModelKind::Vsk, &[0.858, 0.089, 0.047], 500, 100, vec![Method::El, Method::Mle], None, 1)?;
    compare(
        &r,
        &[
            (Method::El, "kappa", 0.951, 0.10),
            (Method::El, "alpha", 0.089, 0.010),
            (Method::El, "sigma", 0.047, 0.005),
            (Method::Mle, "kappa", 0.966, 0.10),
            (Method::Mle, "alpha", 0.089, 0.010),
            (Method::Mle, "sigma", 0.047, 0.005),
        ],
    )
}

fn vskmj_means() -> Check {
    let theta = [0.858, 0.089, 0.047, 2.0, 0.067];
    let r = study(ModelKind::VskMj, &theta, 500, 100, vec![Method::El, Method::Amle], None, 2)?;
    compare(
        &r,
        &[(Method::El, "lambda", 1.801, 0.3), (Method::El, "eta", 0.068, 0.02), (Method::Amle, "lambda", 1.620, 0.3)],
    )
}

fn igou_means() -> Check {
    let r = study(ModelKind::IgOu, &[10.0, 1.0, 20.0], 500, 100, vec![Method::El], None, 3)?;
    compare(&r, &[(Method::El, "lambda", 11.489, 2.0), (Method::El, "a", 1.031, 0.05), (Method::El, "b", 20.846, 1.0)])
}

fn rejection_rate(model: ModelKind, theta: &[f64], n: usize, reps: usize, seed: u64) -> Result<(f64, usize), String> {
    let test = TestSpec { null_model: ModelKind::Vsk, bootstrap: 99, alpha: 0.05, bandwidths: None, reestimate: true };
    let r = study(model, theta, n, reps, Vec::new(), Some(test), seed)?;
    let t = &r.tests[0];
    Ok((t.rejection_rate, t.failed))
}

fn size(slow: bool) -> Check {
    let (n, reps, band) = if slow { (250, 200, (0.02, 0.09)) } else { (125, 50, (0.0, 0.14)) };
    let (rate, failed) = rejection_rate(ModelKind::Vsk, &[0.858, 0.089, 0.047], n, reps, 11)?;
    let detail = format!("rejection rate {rate:.3} in [{}, {}], {failed} failed replicates", band.0, band.1);
    if rate >= band.0 && rate <= band.1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn power() -> Check {
    let (rate, failed) = rejection_rate(ModelKind::VskMj, &[0.858, 0.089, 0.047, 2.0, 0.067], 250, 100, 12)?;
    let detail = format!("power {rate:.3} (need >= 0.60), {failed} failed replicates");
    if rate >= 0.60 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn case_study() -> Check {
    let genuine = std::env::var("CCF_EL_TBILL").ok();
    let data = match &genuine {
        Some(path) => ingest_csv(std::path::Path::new(path), DEFAULT_DELTA).map_err(|e| e.to_string())?,
        None => synthetic_tbill(SYNTHETIC_TBILL_SEED).map_err(|e| e.to_string())?,
    };
    let report = run_case_study(&data, &CaseStudyConfig::default()).map_err(|e| e.to_string())?;
    let test = |kind: ModelKind| report.tests.iter().find(|t| t.null_model == kind).unwrap();
    let (vsk, igou) = (test(ModelKind::Vsk), test(ModelKind::IgOu));
    let mut detail = format!(
        "{} data: VSK p={:.3} reject={}, IG-OU p={:.3} reject={}",
        if genuine.is_some() { "genuine" } else { "synthetic" },
        vsk.p_value,
        vsk.reject,
        igou.p_value,
        igou.reject
    );
    let mut ok = vsk.reject && !igou.reject;
    if genuine.is_some() {
        let el = report
            .estimates
            .iter()
            .find(|e| e.model == ModelKind::Vsk && e.method == Method::El)
            .ok_or("no VSK EL estimate")?;
        let targets = [0.274, 0.059, 0.018];
        let within = el.theta_hat.iter().zip(targets).all(|(h, t)| (h - t).abs() <= 0.2 * t);
        ok &= within;
        detail.push_str(&format!("; VSK EL {:?} within 20% of {targets:?}: {within}", el.theta_hat));
    }
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// The condensed invariant checks; each sub-check reports the first violation.
fn property_suite() -> Check {
    let start = Instant::now();
    let checks: [(&str, fn() -> Result<(), String>); 11] = [
        ("ccf axioms", ccf_axioms),
        ("jump-free reduction", jump_free_reduction),
        ("multiplier oracle", multiplier_oracle),
        ("dual residual", dual_residuals),
        ("ratios non-negative", ratios_non_negative),
        ("densities normalize", densities_normalize),
        ("sampler vs ccf", sampler_vs_ccf),
        ("richardson", richardson),
        ("t_n invariants", t_n_invariants),
        ("p-value bounds", p_value_bounds),
        ("reruns identical", reruns_identical),
    ];
    let mut failures = Vec::new();
    for (name, check) in checks {
        if let Err(e) = check() {
            failures.push(format!("{name}: {e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 120.0 {
        failures.push(format!("took {secs:.0}s, limit 120s"));
    }
    if failures.is_empty() {
        Ok(format!("{} checks in {secs:.0}s", checks.len()))
    } else {
        Err(failures.join("; "))
    }
}

fn random_model(rng: &mut impl Rng) -> ModelSpec {
    let d = DELTA;
    match rng.random_range(0..5) {
        0 => ModelSpec::new(
            ModelKind::Vsk,
            vec![rng.random_range(0.1..3.0), rng.random_range(0.01..0.2), rng.random_range(0.01..0.2)],
            d,
        ),
        1 => {
            let (k, a) = (rng.random_range(0.5..3.0), rng.random_range(0.05..0.2));
            let s = rng.random_range(0.02..(2.0f64 * k * a).sqrt() * 0.99);
            ModelSpec::new(ModelKind::Cir, vec![k, a, s], d)
        }
        2 => ModelSpec::new(
            ModelKind::VskMj,
            vec![
                rng.random_range(0.1..3.0),
                rng.random_range(0.01..0.2),
                rng.random_range(0.01..0.2),
                rng.random_range(0.1..5.0),
                rng.random_range(0.01..0.2),
            ],
            d,
        ),
        3 => ModelSpec::new(
            ModelKind::IgOu,
            vec![rng.random_range(1.0..20.0), rng.random_range(0.5..2.0), rng.random_range(5.0..40.0)],
            d,
        ),
        _ => ModelSpec::new(
            ModelKind::BiOu,
            vec![
                rng.random_range(0.1..2.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.1..2.0),
                rng.random_range(0.0..0.2),
                rng.random_range(0.0..0.2),
                rng.random_range(0.01..0.3),
                rng.random_range(0.01..0.3),
            ],
            d,
        ),
    }
    .unwrap()
}

fn ccf_axioms() -> Result<(), String> {
    let mut rng = stream_rng(601, 0);
    for _ in 0..1000 {
        let m = random_model(&mut rng);
        let x: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(0.001..0.3)).collect();
        let u: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-200.0..200.0)).collect();
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let zero = vec![0.0; m.dim()];
        let v = ccf(&m, &u, &x).map_err(|e| e.to_string())?.value();
        let c = ccf(&m, &neg, &x).map_err(|e| e.to_string())?.value();
        let one = ccf(&m, &zero, &x).map_err(|e| e.to_string())?.value();
        if one.re != 1.0 || one.im != 0.0 || v.norm() > 1.0 + 1e-12 || c != v.conj() {
            return Err(format!("{} θ={:?} u={u:?} x={x:?}: ψ={v}, ψ(−u)={c}, ψ(0)={one}", m.kind(), m.theta()));
        }
    }
    Ok(())
}

fn jump_free_reduction() -> Result<(), String> {
    let jump = ModelSpec::new_unchecked(ModelKind::VskMj, vec![0.858, 0.089, 0.047, 0.0, 0.067], DELTA);
    let plain = vsk();
    for i in 0..200 {
        let u = -100.0 + i as f64;
        let x = 0.001 * i as f64;
        let a = ccf(&jump, &[u], &[x]).map_err(|e| e.to_string())?.value();
        let b = ccf(&plain, &[u], &[x]).map_err(|e| e.to_string())?.value();
        if (a - b).norm() > 1e-12 {
            return Err(format!("u={u} x={x}: {a} vs {b}"));
        }
    }
    Ok(())
}

fn random_panel(rng: &mut impl Rng, n: usize, shift: f64) -> Vec<[f64; 2]> {
    let mut z: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let mean = [z.iter().map(|v| v[0]).sum::<f64>() / n as f64, z.iter().map(|v| v[1]).sum::<f64>() / n as f64];
    let s = [rng.random_range(-shift..shift), rng.random_range(-shift..shift)];
    for v in &mut z {
        v[0] += s[0] - mean[0];
        v[1] += s[1] - mean[1];
    }
    z
}

fn multiplier_oracle() -> Result<(), String> {
    let mut rng = stream_rng(602, 0);
    let mut checked = 0;
    for _ in 0..500 {
        if checked == 50 {
            return Ok(());
        }
        let n = rng.random_range(4..=6);
        let z = random_panel(&mut rng, n, 0.15);
        let Ok(sol) = solve_lambda(&z) else { continue };
        if sol.lambda.iter().any(|l| l.abs() > 4.0) {
            continue;
        }
        let oracle = lambda_oracle(&z, 5.0);
        if (0..2).any(|k| (sol.lambda[k] - oracle[k]).abs() > 1e-6) {
            return Err(format!("{z:?}: {:?} vs {oracle:?}", sol.lambda));
        }
        checked += 1;
    }
    Err(format!("only {checked} panels had an interior origin"))
}

fn dual_residuals() -> Result<(), String> {
    let mut rng = stream_rng(603, 0);
    for _ in 0..2000 {
        let n = rng.random_range(3..60);
        let z = random_panel(&mut rng, n, 0.6);
        if let Ok(sol) = solve_lambda(&z) {
            let q = q1n(&z, sol.lambda);
            let norm = q[0].hypot(q[1]);
            if !sol.converged
                || norm > Q1N_TOL
                || z.iter().any(|v| 1.0 + sol.lambda[0] * v[0] + sol.lambda[1] * v[1] <= 0.0)
            {
                return Err(format!("‖Q1n‖ = {norm:e} on {z:?}"));
            }
        }
    }
    Ok(())
}

fn ratios_non_negative() -> Result<(), String> {
    let mut rng = stream_rng(604, 0);
    for _ in 0..2000 {
        let n = rng.random_range(3..60);
        let z = random_panel(&mut rng, n, 0.6);
        if let Ok(sol) = solve_lambda(&z) {
            let r = local_el_ratio(&z, sol.lambda).map_err(|e| e.to_string())?;
            if !(r >= 0.0) {
                return Err(format!("ratio {r} on {z:?}"));
            }
        }
    }
    for (i, m) in [vsk(), cir(), vskmj(), igou(), biou()].into_iter().enumerate() {
        let p = simulate_seeded(&m, 200, 604, i as u64, None).map_err(|e| e.to_string())?;
        let g = build_grid(&p, m.kind(), InstrumentMode::Estimate).map_err(|e| e.to_string())?;
        for f in [0.7, 1.0, 1.3] {
            let theta: Vec<f64> = m.theta().iter().map(|t| t * f).collect();
            if let Ok(v) = integrated_el_ratio(m.kind(), &theta, &p, &g) {
                if !(v.value >= 0.0) {
                    return Err(format!("{} ℓ = {}", m.kind(), v.value));
                }
            }
        }
    }
    Ok(())
}

fn densities_normalize() -> Result<(), String> {
    for m in [vsk(), cir(), vskmj()] {
        for x in [0.03, 0.09, 0.2] {
            let lo = if m.kind() == ModelKind::Cir { 1e-9 } else { -1.0 };
            let mass =
                simpson(|y| transition_log_density(&m, &[x], &[y]).map(f64::exp).unwrap_or(f64::NAN), lo, 1.5, 200_000);
            if (mass - 1.0).abs() > 1e-6 {
                return Err(format!("{} from x={x}: mass {mass}", m.kind()));
            }
        }
    }
    // bivariate: iterated Simpson over a box covering ±12 conditional sd
    let m = biou();
    let x = [0.08, 0.09];
    let mass = simpson(
        |y1| simpson(|y2| transition_log_density(&m, &x, &[y1, y2]).map(f64::exp).unwrap_or(f64::NAN), -0.5, 0.7, 800),
        -0.5,
        0.7,
        800,
    );
    if (mass - 1.0).abs() > 1e-6 {
        return Err(format!("BI-OU mass {mass}"));
    }
    Ok(())
}

fn sampler_vs_ccf() -> Result<(), String> {
    for (i, m) in all_models().into_iter().enumerate() {
        let x = typical_state(&m);
        let freqs: [Vec<f64>; 3] = if m.dim() == 2 {
            [vec![5.0, 0.0], vec![0.0, 10.0], vec![8.0, -6.0]]
        } else {
            [vec![2.0], vec![10.0], vec![25.0]]
        };
        for (j, u) in freqs.iter().enumerate() {
            let v = ccf(&m, u, &x).map_err(|e| e.to_string())?.value();
            let (mc, se_re, se_im) = mc_ccf(&m, &x, u, 20_000, 605 + 10 * i as u64 + j as u64);
            if !within_se(v.re, mc.re, se_re, 3.0) || !within_se(v.im, mc.im, se_im, 3.0) {
                return Err(format!("{} u={u:?}: ψ={v} MC={mc} se=({se_re:.1e},{se_im:.1e})", m.kind()));
            }
        }
    }
    Ok(())
}

fn richardson() -> Result<(), String> {
    for (m, seed) in [(vsk(), 606), (igou(), 607)] {
        let p = simulate_seeded(&m, 300, seed, 0, None).map_err(|e| e.to_string())?;
        let g = build_grid(&p, m.kind(), InstrumentMode::Estimate).map_err(|e| e.to_string())?;
        let problem = ElProblem::new(m.kind(), &p, &g).map_err(|e| e.to_string())?;
        let j: Vec<_> = [0.4, 0.2, 0.1]
            .iter()
            .map(|&h| problem.mean_jacobian(m.theta(), h))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let gap = |a: &Vec<Vec<num_complex::Complex64>>, b: &Vec<Vec<num_complex::Complex64>>| {
            a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
        };
        let ratio = gap(&j[0], &j[1]) / gap(&j[1], &j[2]);
        if !(3.5..=4.5).contains(&ratio) {
            return Err(format!("{} ratio {ratio}", m.kind()));
        }
    }
    Ok(())
}

fn t_n_invariants() -> Result<(), String> {
    let mut rng = stream_rng(608, 0);
    for _ in 0..1000 {
        let k = rng.random_range(1..8);
        let mut pairs: Vec<(f64, f64)> =
            (0..k).map(|_| (rng.random_range(0.001..1.0), rng.random_range(0.0..50.0))).collect();
        let (h, l): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
        let t = max_standardized(&h, &l);
        let mut raised = l.clone();
        let i = rng.random_range(0..k);
        raised[i] += rng.random_range(0.0..10.0);
        if max_standardized(&h, &raised) < t {
            return Err(format!("raising a statistic lowered T_n on {pairs:?}"));
        }
        pairs.shuffle(&mut rng);
        let (hs, ls): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
        if max_standardized(&hs, &ls) != t {
            return Err(format!("permutation changed T_n on {pairs:?}"));
        }
    }
    Ok(())
}

fn p_value_bounds() -> Result<(), String> {
    let mut rng = stream_rng(609, 0);
    for _ in 0..1000 {
        let b = rng.random_range(1..300);
        let boot: Vec<f64> = (0..b).map(|_| rng.random_range(-5.0..5.0)).collect();
        let t = rng.random_range(-6.0..6.0);
        let p = bootstrap_p_value(t, &boot);
        if p < 1.0 / (b as f64 + 1.0) || p > 1.0 {
            return Err(format!("p = {p} with B = {b}"));
        }
    }
    Ok(())
}

fn reruns_identical() -> Result<(), String> {
    for m in all_models() {
        let a = csv_string(&simulate_seeded(&m, 500, 610, 0, None).unwrap()).unwrap();
        let b = csv_string(&simulate_seeded(&m, 500, 610, 0, None).unwrap()).unwrap();
        if a != b {
            return Err(format!("{} path differs", m.kind()));
        }
    }
    let p = simulate_seeded(&vsk(), 150, 611, 0, None).unwrap();
    let opts = TestOptions::new(9, 0.05, 611);
    let a = bootstrap_test(ModelKind::Vsk, &p, &opts).map_err(|e| e.to_string())?;
    let b = bootstrap_test(ModelKind::Vsk, &p, &opts).map_err(|e| e.to_string())?;
    if serde_json::to_string(&a).unwrap() != serde_json::to_string(&b).unwrap() {
        return Err("bootstrap test differs".into());
    }
    Ok(())
}
