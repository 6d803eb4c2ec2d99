//! χ² distribution with one degree of freedom.

use libm::{erf, erfc};

use crate::Real;

/// `F(x) = erf(√(x/2))`; zero for `x ≤ 0`.
pub fn chi2_cdf<T: Real>(x: T) -> T {
    T::lit(cdf(x.as_f64()))
}

/// Inverse of [`chi2_cdf`]. Returns `+∞` for `p = 1` (the distribution is
/// unbounded), zero for `p = 0`, and NaN outside `[0, 1]`.
pub fn chi2_quantile<T: Real>(p: T) -> T {
    T::lit(quantile(p.as_f64()))
}

fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    let y = (x / 2.0).sqrt();
    if y < 1.0 {
        erf(y)
    } else {
        1.0 - erfc(y)
    }
}

fn quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let mut hi = 1.0;
    while cdf(hi) < p {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (cdf(lo) - p).abs() < (cdf(hi) - p).abs() {
        lo
    } else {
        hi
    }
}
