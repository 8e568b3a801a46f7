//! Gamma-function differences used by the negative binomial likelihood.
//!
//! For a count `y` and dispersion `a` (with `m = 1/a`) the likelihood needs
//! `lnΓ(m+y) − lnΓ(m)`, `ψ(m+y) − ψ(m)` and `ψ₁(m) − ψ₁(m+y)`. For small
//! counts, or when `m` is huge, the finite sums over `k < y` are both exact
//! and free of the cancellation that the closed forms suffer as `a → 0`.

use statrs::function::gamma::{digamma, ln_gamma};

/// Counts below this use the finite sums.
const SUM_LIMIT: u64 = 256;
/// Above this `m` the closed forms lose too many digits; sum instead.
const LARGE_SHAPE: f64 = 1e5;

fn use_sum(y: u64, m: f64) -> bool {
    y < SUM_LIMIT || m > LARGE_SHAPE
}

/// Trigamma function ψ₁(x) for x > 0.
pub(crate) fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // asymptotic series in 1/x with Bernoulli-number coefficients
    let tail = inv2
        * (1.0 / 6.0
            + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))));
    acc + inv + 0.5 * inv2 + inv * tail
}

/// `lnΓ(m+y) − lnΓ(m) + y ln a`, equal to `Σ_{k<y} ln(1 + a k)`.
pub(crate) fn log_rising_scaled(y: u64, a: f64) -> f64 {
    let m = 1.0 / a;
    if use_sum(y, m) {
        (0..y).map(|k| (a * k as f64).ln_1p()).sum()
    } else {
        ln_gamma(m + y as f64) - ln_gamma(m) + y as f64 * a.ln()
    }
}

/// `(ψ(m+y) − ψ(m)) / a`, equal to `Σ_{k<y} 1 / (1 + a k)`.
pub(crate) fn digamma_diff_scaled(y: u64, a: f64) -> f64 {
    let m = 1.0 / a;
    if use_sum(y, m) {
        (0..y).map(|k| 1.0 / (1.0 + a * k as f64)).sum()
    } else {
        (digamma(m + y as f64) - digamma(m)) / a
    }
}

/// `(ψ₁(m) − ψ₁(m+y)) / a²`, equal to `Σ_{k<y} 1 / (1 + a k)²`.
pub(crate) fn trigamma_diff_scaled(y: u64, a: f64) -> f64 {
    let m = 1.0 / a;
    if use_sum(y, m) {
        (0..y)
            .map(|k| {
                let d = 1.0 + a * k as f64;
                1.0 / (d * d)
            })
            .sum()
    } else {
        (trigamma(m) - trigamma(m + y as f64)) / (a * a)
    }
}
