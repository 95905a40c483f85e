//! Small numeric helpers shared across modules.

use alloc::vec::Vec;

/// Pairwise summation; the reduction order depends only on the length.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `ln sum_k w_k e^{x_k}` for nonnegative weights, ignoring zero weights.
/// Returns `-inf` when every weight vanishes.
pub(crate) fn log_sum_exp_weighted(terms: &[(f64, f64)]) -> f64 {
    let peak = terms
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let scaled: Vec<f64> = terms
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, x)| w * libm::exp(x - peak))
        .collect();
    peak + libm::log(pairwise_sum(&scaled))
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}
