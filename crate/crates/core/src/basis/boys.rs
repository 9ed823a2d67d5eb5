//! Boys function F_n(x) = ∫₀¹ t²ⁿ exp(−x t²) dt.

use std::f64::consts::PI;

/// Beyond this argument the asymptotic form is exact to within exp(−x).
const ASYMPTOTIC_CUTOFF: f64 = 50.0;

/// F_n(x) for n = 0..=n_max, written into `out`.
pub fn boys_into(n_max: usize, x: f64, out: &mut [f64]) {
    debug_assert!(out.len() > n_max);
    debug_assert!(x >= 0.0);
    if x >= ASYMPTOTIC_CUTOFF {
        // F_n(x) ≈ (2n−1)!! / 2^{n+1} · sqrt(π / x^{2n+1})
        let mut f = 0.5 * (PI / x).sqrt();
        out[0] = f;
        for n in 1..=n_max {
            f *= (2 * n - 1) as f64 / (2.0 * x);
            out[n] = f;
        }
        return;
    }
    // Series for the highest order, then stable downward recursion.
    let n = n_max as f64;
    let mut term = 1.0 / (2.0 * n + 1.0);
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= 2.0 * x / (2.0 * n + 2.0 * k + 1.0);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    let ex = (-x).exp();
    out[n_max] = ex * sum;
    for m in (0..n_max).rev() {
        out[m] = (2.0 * x * out[m + 1] + ex) / (2 * m + 1) as f64;
    }
}

pub fn boys(n: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    boys_into(n, x, &mut buf);
    buf[n]
}
