use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

/// Second-order forward jet: value plus first and second derivative along one
/// seeded direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn new(v: f64, d1: f64, d2: f64) -> Self {
        Self { v, d1, d2 }
    }

    /// Independent variable along the seeded direction.
    pub fn variable(v: f64) -> Self {
        Self {
            v,
            d1: 1.0,
            d2: 0.0,
        }
    }

    /// Chain rule for a unary function with derivatives `f1`, `f2` at `self.v`.
    #[inline]
    fn chain(self, f: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f,
            d1: f1 * self.d1,
            d2: f2 * self.d1 * self.d1 + f1 * self.d2,
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        )
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, o: Jet) -> Jet {
        let r = 1.0 / o.v;
        let inv = o.chain(r, -r * r, 2.0 * r * r * r);
        self * inv
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        Jet::new(-self.v, -self.d1, -self.d2)
    }
}

impl Scalar for Jet {
    #[inline]
    fn cst(v: f64) -> Self {
        Jet::new(v, 0.0, 0.0)
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(self.v.ln(), r, -r * r)
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        let s = 1.0 - t * t;
        self.chain(t, s, -2.0 * t * s)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        Jet::new(self.v * k, self.d1 * k, self.d2 * k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_second_derivative() {
        // f(x) = tanh(x) * exp(-sqrt(x)) / ln(x)
        let f = |x: Jet| x.tanh() * (-x.sqrt()).exp() / x.ln();
        let x0: f64 = 2.3;
        let j = f(Jet::variable(x0));
        let g = |x: f64| x.tanh() * (-x.sqrt()).exp() / x.ln();
        let h = 1e-4;
        let d1 = (g(x0 + h) - g(x0 - h)) / (2.0 * h);
        let d2 = (g(x0 + h) - 2.0 * g(x0) + g(x0 - h)) / (h * h);
        assert!((j.v - g(x0)).abs() < 1e-15);
        assert!((j.d1 - d1).abs() < 1e-8);
        assert!((j.d2 - d2).abs() < 1e-6);
    }
}
