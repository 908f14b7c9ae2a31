//! Scalar special functions shared by every analytic path.
//!
//! All Gaussian tail probabilities in the crate go through [`q_function`];
//! no module calls `erfc` directly, so the `Q(x) = erfc(x/√2)/2` mapping is
//! applied in exactly one place.

use std::f64::consts::SQRT_2;

/// Gaussian tail probability `Q(x) = P(Z > x)` for a standard normal `Z`.
///
/// Backed by the musl `erfc`, which holds relative error near 1 ulp on the
/// whole real line, including the deep tail used at high SNR.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `n!` as a float. Exact for every `n` used here (n ≤ 20).
pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * f64::from(k))
}

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Order-statistic normalizer `L! / ((l-1)! (L-l)!)` for the `l`-th smallest
/// of `L` draws (1-based `l`). Caller guarantees `1 ≤ l ≤ L`.
pub fn order_statistic_coefficient(user: usize, num_users: usize) -> f64 {
    debug_assert!(user >= 1 && user <= num_users);
    let (l, big_l) = (user as u32, num_users as u32);
    f64::from(big_l) * binomial(big_l - 1, l - 1)
}

/// `(-1)^n` for a signed exponent.
#[inline]
pub fn alternating_sign(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Converts an SNR in dB to a linear ratio.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
