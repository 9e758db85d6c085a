//! Log-space modified Bessel function of the first kind.

use statrs::function::gamma::ln_gamma;

/// `ln I_ν(z)` for `ν ≥ 0`, `z ≥ 0`.
///
/// Sums the power series outward from its largest term in log space, so large
/// arguments (the CIR transition at small σ) neither overflow nor lose the
/// leading digits.
pub fn ln_bessel_i(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let half = 0.5 * z;
    let quarter_sq = half * half;
    // index of the largest term: (k+1)(k+ν+1) = z²/4
    let peak = 0.5 * (-(nu + 2.0) + (nu * nu + z * z).sqrt());
    let k0 = peak.max(0.0).round();
    let ln_peak = (2.0 * k0 + nu) * half.ln() - ln_gamma(k0 + 1.0) - ln_gamma(k0 + nu + 1.0);

    let mut sum = 1.0;
    let mut comp = 0.0;
    let add = |v: f64, sum: &mut f64, comp: &mut f64| {
        let y = v - *comp;
        let t = *sum + y;
        *comp = (t - *sum) - y;
        *sum = t;
    };

    let mut term = 1.0;
    let mut k = k0;
    loop {
        term *= quarter_sq / ((k + 1.0) * (k + nu + 1.0));
        k += 1.0;
        add(term, &mut sum, &mut comp);
        if term < 1e-17 * sum {
            break;
        }
    }
    let mut term = 1.0;
    let mut k = k0;
    while k > 0.0 {
        term *= k * (k + nu) / quarter_sq;
        k -= 1.0;
        add(term, &mut sum, &mut comp);
        if term < 1e-17 * sum {
            break;
        }
    }
    ln_peak + sum.ln()
}
