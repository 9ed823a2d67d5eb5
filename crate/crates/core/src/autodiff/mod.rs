//! Scalar abstraction so a single generic evaluation of the wavefunction can
//! run on plain floats, on second-order forward jets, or on a reverse-mode tape.

mod jet;
mod tape;

use std::ops::{Add, Div, Mul, Neg, Sub};

pub use jet::Jet;
pub use tape::{Tape, Var};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lift a constant.
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }

    fn square(self) -> Self {
        self * self
    }

    /// |x| with derivative sign(x).
    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Σ a_i b_i.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

/// Euclidean norm; the derivative is taken as zero at the origin.
#[inline]
pub fn norm3<S: Scalar>(v: [S; 3]) -> S {
    let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if r2.value() == 0.0 {
        S::zero()
    } else {
        r2.sqrt()
    }
}

/// Sign and log|det| of a square row-major matrix via LU with partial pivoting.
/// A singular matrix yields `(0.0, -inf)`. An empty matrix has determinant 1.
pub fn signed_log_det<S: Scalar>(mut a: Vec<S>, n: usize) -> (f64, S) {
    debug_assert_eq!(a.len(), n * n);
    let mut sign = 1.0;
    let mut log_abs = S::zero();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .value()
                    .abs()
                    .total_cmp(&a[j * n + col].value().abs())
            })
            .unwrap();
        let pv = a[pivot * n + col];
        if pv.value() == 0.0 {
            return (0.0, S::cst(f64::NEG_INFINITY));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            sign = -sign;
        }
        if pv.value() < 0.0 {
            sign = -sign;
        }
        log_abs = log_abs + pv.abs().ln();
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pv;
            for k in (col + 1)..n {
                a[row * n + k] = a[row * n + k] - factor * a[col * n + k];
            }
        }
    }
    (sign, log_abs)
}

/// Signed log of Σ_k s_k exp(l_k). The shift is treated as a constant, which
/// leaves all derivatives exact.
pub fn signed_log_sum_exp<S: Scalar>(terms: &[(f64, S)]) -> (f64, S) {
    let shift = terms
        .iter()
        .filter(|(s, _)| *s != 0.0)
        .map(|(_, l)| l.value())
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return (0.0, S::cst(f64::NEG_INFINITY));
    }
    let mut acc = S::zero();
    for (s, l) in terms {
        if *s != 0.0 {
            acc = acc + (*l - S::cst(shift)).exp().scale(*s);
        }
    }
    let v = acc.value();
    if v == 0.0 {
        return (0.0, S::cst(f64::NEG_INFINITY));
    }
    (v.signum(), acc.abs().ln() + S::cst(shift))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_brute(a: &[f64], n: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        // Laplace expansion along the first row.
        let mut total = 0.0;
        for c in 0..n {
            let minor: Vec<f64> = (1..n)
                .flat_map(|r| (0..n).filter(move |&k| k != c).map(move |k| (r, k)))
                .map(|(r, k)| a[r * n + k])
                .collect();
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * a[c] * det_brute(&minor, n - 1);
        }
        total
    }

    #[test]
    fn log_det_matches_laplace_expansion() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for n in 0..=5 {
            for _ in 0..20 {
                let a: Vec<f64> = (0..n * n).map(|_| next()).collect();
                let d = det_brute(&a, n);
                let (s, l) = signed_log_det(a, n);
                assert!((s * l.exp() - d).abs() < 1e-12 * d.abs().max(1.0));
            }
        }
    }

    #[test]
    fn singular_matrix() {
        let (s, l) = signed_log_det(vec![1.0, 2.0, 2.0, 4.0], 2);
        assert_eq!(s, 0.0);
        assert_eq!(l, f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_signs() {
        let (s, l) = signed_log_sum_exp(&[(1.0, 2.0f64.ln()), (-1.0, 5.0f64.ln())]);
        assert_eq!(s, -1.0);
        assert!((l - 3.0f64.ln()).abs() < 1e-15);
        let (s, l) = signed_log_sum_exp(&[(1.0, -800.0), (1.0, -800.0)]);
        assert_eq!(s, 1.0);
        assert!((l - (-800.0 + 2.0f64.ln())).abs() < 1e-12);
    }
}
