//! Legendre polynomials and the modified Bessel function I₀.

use alloc::vec::Vec;

/// `P_0(x) .. P_n(x)` by the three-term recurrence.
pub fn legendre_table(x: f64, n: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

/// `P_0(x) .. P_n(x)` and their derivatives, using
/// `P'_{k+1} = P'_{k-1} + (2k+1) P_k` (stable at `x = ±1`).
pub fn legendre_with_derivative(x: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let p = legendre_table(x, n);
    let mut dp = Vec::with_capacity(n + 1);
    dp.push(0.0);
    if n >= 1 {
        dp.push(1.0);
    }
    for k in 1..n {
        let next = dp[k - 1] + (2 * k + 1) as f64 * p[k];
        dp.push(next);
    }
    (p, dp)
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}
