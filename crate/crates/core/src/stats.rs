//! Small descriptive-statistics helpers and the biweight kernel.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the `n − 1` divisor.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn sd(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Linear-interpolation quantile of sorted data, `p ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Biweight kernel `15/16 (1 − u²)² 1{|u| ≤ 1}`.
#[inline]
pub fn biweight(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - u * u;
        0.9375 * s * s
    }
}

/// Rule-of-thumb bandwidth for the biweight kernel: Silverman's normal
/// reference rule rescaled by the biweight/Gaussian canonical-bandwidth ratio.
pub fn rule_of_thumb_bandwidth(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let s = sd(x);
    let spread = if iqr > 0.0 { s.min(iqr / 1.349) } else { s };
    2.623 * 1.06 * spread * (x.len() as f64).powf(-0.2)
}
