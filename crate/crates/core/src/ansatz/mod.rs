//! Permutation-equivariant neural wavefunction with determinant output.
//!
//! Each electron carries a one-electron stream built from its displacements to
//! every nucleus and each electron pair carries a two-electron stream built
//! from the pair displacement. Interaction layers mix every electron's state
//! with spin-resolved means over the other electrons. Orbitals are affine
//! projections of the final one-electron state multiplied by an anisotropic
//! exponential envelope, and the wavefunction is a sum over `k` products of
//! spin-up and spin-down determinants.

mod checkpoint;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{dot, norm3, signed_log_det, signed_log_sum_exp, Jet, Scalar, Tape};
use crate::error::{Error, Result};
use crate::molecule::Molecule;

pub use checkpoint::{read_params, write_params, ByteReader, ByteWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnsatzConfig {
    pub n_determinants: usize,
    pub hidden_one: usize,
    pub hidden_two: usize,
    pub n_layers: usize,
    pub n_up: usize,
    pub n_down: usize,
}

impl AnsatzConfig {
    /// Default widths for the given spin populations.
    pub fn new(n_up: usize, n_down: usize) -> Self {
        Self {
            n_determinants: 4,
            hidden_one: 32,
            hidden_two: 8,
            n_layers: 2,
            n_up,
            n_down,
        }
    }

    pub fn n_electrons(&self) -> usize {
        self.n_up + self.n_down
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_determinants == 0 || self.hidden_one == 0 || self.hidden_two == 0 {
            return Err(Error::Config(
                "determinant count and layer widths must be at least 1".into(),
            ));
        }
        if self.n_electrons() == 0 {
            return Err(Error::Config("ansatz needs at least one electron".into()));
        }
        Ok(())
    }

    pub fn n_spin(&self, spin: usize) -> usize {
        [self.n_up, self.n_down][spin]
    }
}

/// Sign and log magnitude of ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPsi {
    pub sign: f64,
    pub log_magnitude: f64,
}

impl LogPsi {
    pub fn is_finite(&self) -> bool {
        self.log_magnitude.is_finite()
    }
}

/// Contiguous slice of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Dense {
    w: Block,
    b: Block,
}

/// Where every tensor lives inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    one: Vec<Dense>,
    two: Vec<Dense>,
    /// Per spin: projection weights (k·n_α × latent) and biases.
    orbital: [Dense; 2],
    /// Per spin: σ as (k·n_α·M) × 9 and π as (k·n_α·M).
    sigma: [Block; 2],
    pi: [Block; 2],
    total: usize,
}

impl ParamLayout {
    fn new(cfg: &AnsatzConfig, n_atoms: usize) -> Self {
        let mut offset = 0;
        let mut alloc = |rows: usize, cols: usize| {
            let b = Block { offset, rows, cols };
            offset += rows * cols;
            b
        };
        let one_in = |l: usize| if l == 0 { 4 * n_atoms } else { cfg.hidden_one };
        let two_in = |l: usize| if l == 0 { 4 } else { cfg.hidden_two };
        let mut one = Vec::new();
        let mut two = Vec::new();
        for l in 0..cfg.n_layers {
            let fan_in = 3 * one_in(l) + two_in(l);
            one.push(Dense {
                w: alloc(cfg.hidden_one, fan_in),
                b: alloc(cfg.hidden_one, 1),
            });
        }
        for l in 0..cfg.n_layers.saturating_sub(1) {
            two.push(Dense {
                w: alloc(cfg.hidden_two, two_in(l)),
                b: alloc(cfg.hidden_two, 1),
            });
        }
        let latent = one_in(cfg.n_layers);
        let k = cfg.n_determinants;
        let mut orbital_blocks = Vec::new();
        let mut sigma_blocks = Vec::new();
        let mut pi_blocks = Vec::new();
        for spin in 0..2 {
            let n = cfg.n_spin(spin);
            orbital_blocks.push(Dense {
                w: alloc(k * n, latent),
                b: alloc(k * n, 1),
            });
            sigma_blocks.push(alloc(k * n * n_atoms, 9));
            pi_blocks.push(alloc(k * n * n_atoms, 1));
        }
        let [o0, o1]: [Dense; 2] = orbital_blocks.try_into().unwrap();
        Self {
            one,
            two,
            orbital: [o0, o1],
            sigma: [sigma_blocks[0], sigma_blocks[1]],
            pi: [pi_blocks[0], pi_blocks[1]],
            total: offset,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Named tensor groups in storage order.
    pub fn groups(&self) -> Vec<(String, Block)> {
        let mut out = Vec::new();
        for (l, d) in self.one.iter().enumerate() {
            out.push((format!("one.{l}.w"), d.w));
            out.push((format!("one.{l}.b"), d.b));
        }
        for (l, d) in self.two.iter().enumerate() {
            out.push((format!("two.{l}.w"), d.w));
            out.push((format!("two.{l}.b"), d.b));
        }
        for (spin, tag) in ["up", "down"].iter().enumerate() {
            out.push((format!("orbital.{tag}.w"), self.orbital[spin].w));
            out.push((format!("orbital.{tag}.b"), self.orbital[spin].b));
            out.push((format!("sigma.{tag}"), self.sigma[spin]));
            out.push((format!("pi.{tag}"), self.pi[spin]));
        }
        out
    }

    pub fn group(&self, name: &str) -> Option<Block> {
        self.groups()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b)
    }
}

/// Flat vector of every learnable parameter. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzParams(pub Vec<f64>);

impl AnsatzParams {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// One- and two-electron input features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<S> {
    /// Per electron: (r_j − R_m, |r_j − R_m|) for each nucleus m.
    pub one_electron: Vec<Vec<S>>,
    /// Row-major N×N: (r_i − r_j, |r_i − r_j|); diagonal entries are zero.
    pub two_electron: Vec<[S; 4]>,
}

/// Anything that can produce log|ψ| on a generic scalar. Derivative
/// operations are provided on top of that single evaluation.
pub trait Wavefunction: Sync {
    fn n_electrons(&self) -> usize;

    /// Sign of ψ and log|ψ| for flattened N×3 positions.
    fn log_psi_scalar<S: Scalar>(&self, positions: &[S]) -> (f64, S);

    fn log_psi(&self, positions: &[f64]) -> LogPsi {
        let (sign, l) = self.log_psi_scalar(positions);
        LogPsi {
            sign,
            log_magnitude: l,
        }
    }

    /// ∂ log|ψ| / ∂r by reverse accumulation.
    fn grad_log_psi(&self, positions: &[f64]) -> Vec<f64> {
        let tape = Tape::new();
        let x = tape.vars(positions);
        let (_, out) = self.log_psi_scalar(&x);
        tape.gradient(out, &x)
    }

    /// log ψ, its gradient and its Laplacian over all 3N coordinates, using one
    /// second-order forward pass per coordinate.
    fn derivatives(&self, positions: &[f64]) -> (LogPsi, Vec<f64>, f64) {
        let mut grad = vec![0.0; positions.len()];
        let mut lap = 0.0;
        let mut value = LogPsi {
            sign: 0.0,
            log_magnitude: f64::NEG_INFINITY,
        };
        let mut x: Vec<Jet> = positions.iter().map(|&p| Jet::cst(p)).collect();
        for d in 0..positions.len() {
            x[d] = Jet::variable(positions[d]);
            let (sign, out) = self.log_psi_scalar(&x);
            x[d] = Jet::cst(positions[d]);
            value = LogPsi {
                sign,
                log_magnitude: out.v,
            };
            grad[d] = out.d1;
            lap += out.d2;
        }
        (value, grad, lap)
    }

    fn laplacian_log_psi(&self, positions: &[f64]) -> f64 {
        self.derivatives(positions).2
    }
}

/// Network architecture bound to a nuclear framework.
#[derive(Debug, Clone)]
pub struct Ansatz {
    config: AnsatzConfig,
    nuclei: Vec<[f64; 3]>,
    layout: ParamLayout,
}

impl Ansatz {
    pub fn new(config: AnsatzConfig, mol: &Molecule) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            layout: ParamLayout::new(&config, mol.n_atoms()),
            nuclei: mol.positions(),
            config,
        })
    }

    pub fn config(&self) -> &AnsatzConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    pub fn n_atoms(&self) -> usize {
        self.nuclei.len()
    }

    pub fn n_electrons(&self) -> usize {
        self.config.n_electrons()
    }

    /// Variance-scaled normal weights, zero hidden biases, unit orbital
    /// biases, σ = identity and π = 1.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> AnsatzParams {
        let mut p = vec![0.0; self.layout.total];
        let mut fill_weights = |b: Block, p: &mut [f64]| {
            if b.cols == 0 {
                return;
            }
            let dist = Normal::new(0.0, (1.0 / b.cols as f64).sqrt()).unwrap();
            for v in &mut p[b.range()] {
                *v = dist.sample(rng);
            }
        };
        for d in self.layout.one.iter().chain(&self.layout.two) {
            fill_weights(d.w, &mut p);
        }
        for spin in 0..2 {
            fill_weights(self.layout.orbital[spin].w, &mut p);
            for v in &mut p[self.layout.orbital[spin].b.range()] {
                *v = 1.0;
            }
            for chunk in p[self.layout.sigma[spin].range()].chunks_mut(9) {
                chunk.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
            }
            for v in &mut p[self.layout.pi[spin].range()] {
                *v = 1.0;
            }
        }
        AnsatzParams(p)
    }

    fn check_params(&self, params: &AnsatzParams) {
        assert_eq!(
            params.len(),
            self.layout.total,
            "parameter vector does not match the ansatz layout"
        );
    }

    /// Electron and pair features.
    pub fn features<S: Scalar>(&self, positions: &[S]) -> FeatureSet<S> {
        let n = self.n_electrons();
        assert_eq!(positions.len(), 3 * n);
        let r = |j: usize| [positions[3 * j], positions[3 * j + 1], positions[3 * j + 2]];
        let one_electron = (0..n)
            .map(|j| {
                let rj = r(j);
                let mut f = Vec::with_capacity(4 * self.nuclei.len());
                for nuc in &self.nuclei {
                    let d = [
                        rj[0] - S::cst(nuc[0]),
                        rj[1] - S::cst(nuc[1]),
                        rj[2] - S::cst(nuc[2]),
                    ];
                    f.extend_from_slice(&d);
                    f.push(norm3(d));
                }
                f
            })
            .collect();
        let mut two_electron = vec![[S::zero(); 4]; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let (ri, rj) = (r(i), r(j));
                    let d = [ri[0] - rj[0], ri[1] - rj[1], ri[2] - rj[2]];
                    two_electron[i * n + j] = [d[0], d[1], d[2], norm3(d)];
                }
            }
        }
        FeatureSet {
            one_electron,
            two_electron,
        }
    }

    fn spin_of(&self, j: usize) -> usize {
        usize::from(j >= self.config.n_up)
    }

    /// Interaction layers; returns the per-electron latent vectors.
    pub fn forward_layers<S: Scalar>(&self, params: &[S], features: &FeatureSet<S>) -> Vec<Vec<S>> {
        let n = self.n_electrons();
        let spin_range = [0..self.config.n_up, self.config.n_up..n];
        let mut h: Vec<Vec<S>> = features.one_electron.clone();
        let mut pair: Vec<Vec<S>> = features.two_electron.iter().map(|f| f.to_vec()).collect();

        for (l, dense) in self.layout.one.iter().enumerate() {
            let dim = h[0].len();
            let pair_dim = pair[0].len();
            let spin_mean: Vec<Vec<S>> = spin_range
                .iter()
                .map(|range| mean_rows(range.clone().map(|j| &h[j][..]), dim))
                .collect();
            let next: Vec<Vec<S>> = (0..n)
                .map(|j| {
                    let own = self.spin_of(j);
                    let pair_mean = mean_rows(
                        (0..n).filter(|&i| i != j).map(|i| &pair[j * n + i][..]),
                        pair_dim,
                    );
                    let mut input = Vec::with_capacity(3 * dim + pair_dim);
                    input.extend_from_slice(&h[j]);
                    input.extend_from_slice(&spin_mean[own]);
                    input.extend_from_slice(&spin_mean[1 - own]);
                    input.extend_from_slice(&pair_mean);
                    let mut out = affine_tanh(params, dense, &input);
                    if out.len() == h[j].len() {
                        for (o, x) in out.iter_mut().zip(&h[j]) {
                            *o = *o + *x;
                        }
                    }
                    out
                })
                .collect();
            h = next;
            if let Some(pd) = self.layout.two.get(l) {
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let cur = &pair[i * n + j];
                        let mut out = affine_tanh(params, pd, cur);
                        if out.len() == cur.len() {
                            for (o, x) in out.iter_mut().zip(cur) {
                                *o = *o + *x;
                            }
                        }
                        pair[i * n + j] = out;
                    }
                }
                let width = pd.w.rows;
                for i in 0..n {
                    pair[i * n + i] = vec![S::zero(); width];
                }
            }
        }
        h
    }

    /// Σ_m π · exp(−|σ (r − R_m)|) for spin `spin`, determinant `k`, orbital `i`.
    pub fn envelope<S: Scalar>(
        &self,
        params: &[S],
        r: [S; 3],
        spin: usize,
        k: usize,
        i: usize,
    ) -> S {
        let n_spin = self.config.n_spin(spin);
        let m_count = self.nuclei.len();
        let mut total = S::zero();
        for (m, nuc) in self.nuclei.iter().enumerate() {
            let idx = (k * n_spin + i) * m_count + m;
            let sigma = &params[self.layout.sigma[spin].offset + 9 * idx..][..9];
            let pi = params[self.layout.pi[spin].offset + idx];
            let d = [
                r[0] - S::cst(nuc[0]),
                r[1] - S::cst(nuc[1]),
                r[2] - S::cst(nuc[2]),
            ];
            let t = [
                dot(&sigma[0..3], &d),
                dot(&sigma[3..6], &d),
                dot(&sigma[6..9], &d),
            ];
            total = total + pi * (-norm3(t)).exp();
        }
        total
    }

    /// Orbital matrices per spin and determinant, each row-major n_α × n_α with
    /// rows indexing orbitals and columns indexing electrons.
    pub fn orbitals<S: Scalar>(&self, params: &[S], positions: &[S]) -> [Vec<Vec<S>>; 2] {
        let features = self.features(positions);
        let h = self.forward_layers(params, &features);
        self.orbitals_from_latents(params, positions, &h)
    }

    fn orbitals_from_latents<S: Scalar>(
        &self,
        params: &[S],
        positions: &[S],
        h: &[Vec<S>],
    ) -> [Vec<Vec<S>>; 2] {
        let k_count = self.config.n_determinants;
        let block = |spin: usize| -> Vec<Vec<S>> {
            let n = self.config.n_spin(spin);
            let first = if spin == 0 { 0 } else { self.config.n_up };
            let dense = &self.layout.orbital[spin];
            let latent = dense.w.cols;
            (0..k_count)
                .map(|k| {
                    let mut m = Vec::with_capacity(n * n);
                    for i in 0..n {
                        let row = k * n + i;
                        let w = &params[dense.w.offset + row * latent..][..latent];
                        let b = params[dense.b.offset + row];
                        for jj in 0..n {
                            let j = first + jj;
                            let r = [positions[3 * j], positions[3 * j + 1], positions[3 * j + 2]];
                            let proj = dot(w, &h[j]) + b;
                            m.push(proj * self.envelope(params, r, spin, k, i));
                        }
                    }
                    m
                })
                .collect()
        };
        [block(0), block(1)]
    }

    /// Sign and log|ψ| with ψ = Σ_k det Φ↑_k · det Φ↓_k.
    pub fn log_psi_scalar<S: Scalar>(&self, params: &[S], positions: &[S]) -> (f64, S) {
        let orbs = self.orbitals(params, positions);
        let terms: Vec<(f64, S)> = (0..self.config.n_determinants)
            .map(|k| {
                let (su, lu) = signed_log_det(orbs[0][k].clone(), self.config.n_up);
                let (sd, ld) = signed_log_det(orbs[1][k].clone(), self.config.n_down);
                (su * sd, lu + ld)
            })
            .collect();
        signed_log_sum_exp(&terms)
    }

    pub fn bind<'a>(&'a self, params: &'a AnsatzParams) -> BoundAnsatz<'a> {
        self.check_params(params);
        BoundAnsatz {
            ansatz: self,
            params,
        }
    }

    pub fn log_psi(&self, params: &AnsatzParams, positions: &[f64]) -> LogPsi {
        self.bind(params).log_psi(positions)
    }

    pub fn grad_log_psi(&self, params: &AnsatzParams, positions: &[f64]) -> Vec<f64> {
        self.bind(params).grad_log_psi(positions)
    }

    pub fn laplacian_log_psi(&self, params: &AnsatzParams, positions: &[f64]) -> f64 {
        self.bind(params).laplacian_log_psi(positions)
    }

    /// ∇_θ log|ψ| by reverse accumulation, with log ψ itself.
    pub fn param_grad_log_psi(
        &self,
        params: &AnsatzParams,
        positions: &[f64],
    ) -> (LogPsi, AnsatzParams) {
        self.check_params(params);
        let tape = Tape::with_capacity(64 * params.len());
        let theta = tape.vars(&params.0);
        let x: Vec<_> = positions.iter().map(|&p| Scalar::cst(p)).collect();
        let (sign, out) = self.log_psi_scalar(&theta, &x);
        let grad = tape.gradient(out, &theta);
        (
            LogPsi {
                sign,
                log_magnitude: out.value(),
            },
            AnsatzParams(grad),
        )
    }
}

/// An ansatz together with a parameter vector.
#[derive(Clone, Copy)]
pub struct BoundAnsatz<'a> {
    ansatz: &'a Ansatz,
    params: &'a AnsatzParams,
}

impl Wavefunction for BoundAnsatz<'_> {
    fn n_electrons(&self) -> usize {
        self.ansatz.n_electrons()
    }

    fn log_psi_scalar<S: Scalar>(&self, positions: &[S]) -> (f64, S) {
        let theta: Vec<S> = self.params.0.iter().map(|&p| S::cst(p)).collect();
        self.ansatz.log_psi_scalar(&theta, positions)
    }

    fn log_psi(&self, positions: &[f64]) -> LogPsi {
        let (sign, l) = self.ansatz.log_psi_scalar(&self.params.0, positions);
        LogPsi {
            sign,
            log_magnitude: l,
        }
    }
}

fn mean_rows<'a, S: Scalar + 'a>(rows: impl Iterator<Item = &'a [S]>, dim: usize) -> Vec<S> {
    let mut acc = vec![S::zero(); dim];
    let mut count = 0usize;
    for row in rows {
        for (a, x) in acc.iter_mut().zip(row) {
            *a = *a + *x;
        }
        count += 1;
    }
    if count > 1 {
        let inv = 1.0 / count as f64;
        for a in &mut acc {
            *a = a.scale(inv);
        }
    }
    acc
}

fn affine_tanh<S: Scalar>(params: &[S], dense: &Dense, input: &[S]) -> Vec<S> {
    let cols = dense.w.cols;
    debug_assert_eq!(cols, input.len());
    (0..dense.w.rows)
        .map(|o| {
            let w = &params[dense.w.offset + o * cols..][..cols];
            (dot(w, input) + params[dense.b.offset + o]).tanh()
        })
        .collect()
}
