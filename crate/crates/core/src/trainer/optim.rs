//! First-order optimizers and gradient conditioning.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Config(format!(
                "unknown optimizer `{other}` (expected adam or sgd)"
            ))),
        }
    }

    fn code(self) -> u32 {
        match self {
            OptimizerKind::Adam => 0,
            OptimizerKind::Sgd => 1,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        match c {
            0 => Ok(OptimizerKind::Adam),
            1 => Ok(OptimizerKind::Sgd),
            _ => Err(Error::Checkpoint(format!("unknown optimizer code {c}"))),
        }
    }
}

/// Optimizer with its running state. Adam uses β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        let n = if kind == OptimizerKind::Adam {
            n_params
        } else {
            0
        };
        Self {
            kind,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One descent step in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), grad.len());
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - BETA1.powi(self.t as i32);
                let c2 = 1.0 - BETA2.powi(self.t as i32);
                for i in 0..params.len() {
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * grad[i];
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
                }
            }
        }
    }

    pub(crate) fn write(&self, w: &mut crate::ansatz::ByteWriter) {
        w.u32(self.kind.code());
        w.u64(self.t);
        w.f64s(&self.m);
        w.f64s(&self.v);
    }

    pub(crate) fn read(r: &mut crate::ansatz::ByteReader<'_>, n_params: usize) -> Result<Self> {
        let kind = OptimizerKind::from_code(r.u32()?)?;
        let t = r.u64()?;
        let m = r.f64s()?;
        let v = r.f64s()?;
        let want = if kind == OptimizerKind::Adam {
            n_params
        } else {
            0
        };
        if m.len() != want || v.len() != want {
            return Err(Error::Checkpoint(
                "optimizer state does not match the parameter count".into(),
            ));
        }
        Ok(Self { kind, m, v, t })
    }
}

/// Rescale `grad` so its Euclidean norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Clamp values to median ± `width`·IQR. Returns the clamped copy and how many
/// values moved.
pub fn winsorize(values: &[f64], width: f64) -> (Vec<f64>, usize) {
    if values.len() < 4 {
        return (values.to_vec(), 0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile(&sorted, 0.5);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let (lo, hi) = (median - width * iqr, median + width * iqr);
    let mut moved = 0;
    let out = values
        .iter()
        .map(|&v| {
            let c = v.clamp(lo, hi);
            if c != v {
                moved += 1;
            }
            c
        })
        .collect();
    (out, moved)
}
