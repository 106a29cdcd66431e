//! Inclusive linear-interpolation quantiles (Hyndman-Fan type 7).
//!
//! Probabilities are given as exact rationals `num / den` so that the
//! interpolation position `(n - 1) * num / den` is computed in integers. The
//! interpolation weights are formed from integers too, which makes
//! `q(-x, 1 - p) == -q(x, p)` hold bit-for-bit.

/// Quantile of already-sorted data at probability `num / den`.
///
/// Panics on empty input or `num > den`.
pub fn quantile_sorted(sorted: &[f64], num: usize, den: usize) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    assert!(den > 0 && num <= den, "probability {num}/{den} outside [0, 1]");
    let h = (sorted.len() - 1) * num;
    let lo = h / den;
    let rem = h % den;
    if rem == 0 {
        return sorted[lo];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if a == b {
        return a;
    }
    let w_hi = rem as f64 / den as f64;
    let w_lo = (den - rem) as f64 / den as f64;
    (w_lo * a + w_hi * b).clamp(a, b)
}

/// Quantile at a floating probability; used where `p` is user supplied.
pub fn quantile_sorted_f64(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = h - lo as f64;
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if frac == 0.0 || a == b {
        return a;
    }
    (a + frac * (b - a)).clamp(a, b)
}

/// Sorts a copy of `values` ascending (NaN-free input assumed).
pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}
