use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [(u32, f64); 2],
}

/// Reverse-mode Wengert list. One tape per thread of evaluation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// New independent variable.
    pub fn var(&self, v: f64) -> Var<'_> {
        let idx = self.push([(NONE, 0.0), (NONE, 0.0)]);
        Var {
            tape: Some(self),
            idx,
            val: v,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, parents: [(u32, f64); 2]) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents });
        (nodes.len() - 1) as u32
    }

    /// d output / d leaf for each of `leaves`.
    pub fn gradient(&self, output: Var<'_>, leaves: &[Var<'_>]) -> Vec<f64> {
        if output.idx == NONE {
            return vec![0.0; leaves.len()];
        }
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; output.idx as usize + 1];
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            for &(p, w) in &nodes[i].parents {
                if p != NONE {
                    adj[p as usize] += a * w;
                }
            }
        }
        leaves
            .iter()
            .map(|l| adj.get(l.idx as usize).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Scalar recorded on a [`Tape`]. Constants carry no tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl<'t> Var<'t> {
    #[inline]
    fn unary(self, val: f64, d: f64) -> Self {
        match self.tape {
            Some(t) if self.idx != NONE => Var {
                tape: Some(t),
                idx: t.push([(self.idx, d), (NONE, 0.0)]),
                val,
            },
            _ => Var {
                tape: None,
                idx: NONE,
                val,
            },
        }
    }

    #[inline]
    fn binary(self, o: Self, val: f64, da: f64, db: f64) -> Self {
        let tape = self.tape.or(o.tape);
        match tape {
            Some(t) if self.idx != NONE || o.idx != NONE => Var {
                tape: Some(t),
                idx: t.push([(self.idx, da), (o.idx, db)]),
                val,
            },
            _ => Var {
                tape: None,
                idx: NONE,
                val,
            },
        }
    }
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({}, #{})", self.val, self.idx)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, o: Self) -> Self {
        let r = 1.0 / o.val;
        self.binary(o, self.val * r, r, -self.val * r * r)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Scalar for Var<'t> {
    #[inline]
    fn cst(v: f64) -> Self {
        Var {
            tape: None,
            idx: NONE,
            val: v,
        }
    }
    #[inline]
    fn value(self) -> f64 {
        self.val
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self.unary(self.val * k, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_polynomial_and_transcendentals() {
        let tape = Tape::new();
        let x = tape.var(1.3);
        let y = tape.var(-0.4);
        let c = Var::cst(2.0);
        let f = x * y * c + (x / y).tanh() - (x * x).sqrt() * y.exp() + x.ln();
        let g = tape.gradient(f, &[x, y]);
        let fx = |x: f64, y: f64| x * y * 2.0 + (x / y).tanh() - (x * x).sqrt() * y.exp() + x.ln();
        let h = 1e-6;
        let gx = (fx(1.3 + h, -0.4) - fx(1.3 - h, -0.4)) / (2.0 * h);
        let gy = (fx(1.3, -0.4 + h) - fx(1.3, -0.4 - h)) / (2.0 * h);
        assert!((g[0] - gx).abs() < 1e-8);
        assert!((g[1] - gy).abs() < 1e-8);
    }

    #[test]
    fn constants_are_not_recorded() {
        let tape = Tape::new();
        let x = tape.var(1.0);
        let before = tape.len();
        let k = Var::cst(3.0) * Var::cst(4.0);
        assert_eq!(tape.len(), before);
        let f = x * k;
        assert_eq!(tape.gradient(f, &[x]), vec![12.0]);
        assert_eq!(tape.gradient(k, &[x]), vec![0.0]);
    }
}
