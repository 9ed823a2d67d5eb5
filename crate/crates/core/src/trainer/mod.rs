//! Supervised pretraining against Hartree–Fock orbitals followed by energy
//! minimization with the score-function gradient.

mod checkpoint;
mod optim;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ansatz::{Ansatz, AnsatzParams, Wavefunction};
use crate::autodiff::{Scalar, Tape, Var};
use crate::basis::BasisSet;
use crate::charge_init::ElectronAssignment;
use crate::energy::{batch_local_energies, estimate, expected_energy, EnergyEstimate};
use crate::error::{Error, Result};
use crate::molecule::Molecule;
use crate::sampler::{init_walkers, run_chain, SamplerConfig, WalkerBatch};
use crate::scf::{hf_orbital_values, ScfSolution};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use optim::{clip_global_norm, winsorize, Optimizer, OptimizerKind};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub pretrain_epochs: usize,
    pub train_iterations: usize,
    pub learning_rate_pretrain: f64,
    pub learning_rate_train: f64,
    pub optimizer: OptimizerKind,
    pub gradient_clip_norm: Option<f64>,
    /// Winsorizing width in interquartile ranges; `None` disables it.
    pub winsorize_iqr: Option<f64>,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
    pub seed: u64,
    /// Record wall-clock time per iteration. Off by default because it makes
    /// traces differ between otherwise identical runs.
    pub wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pretrain_epochs: 100,
            train_iterations: 2000,
            learning_rate_pretrain: 1e-3,
            learning_rate_train: 3e-4,
            optimizer: OptimizerKind::Adam,
            gradient_clip_norm: Some(1.0),
            winsorize_iqr: Some(10.0),
            checkpoint_every: 0,
            seed: 0,
            wall_clock: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate_pretrain) || !positive(self.learning_rate_train) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.gradient_clip_norm.is_some_and(|c| !positive(c)) {
            return Err(Error::Config("gradient_clip_norm must be positive".into()));
        }
        if self.winsorize_iqr.is_some_and(|c| !positive(c)) {
            return Err(Error::Config("winsorize_iqr must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the training trace. Energy columns are empty during
/// pretraining and the loss column is empty afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub energy_mean: Option<f64>,
    pub energy_stderr: Option<f64>,
    pub accept_rate: f64,
    pub pretrain_loss: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
}

pub const TRACE_HEADER: &str = "iter,energy_mean,energy_stderr,accept_rate,pretrain_loss,wall_ms";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration,
            cell(self.energy_mean),
            cell(self.energy_stderr),
            self.accept_rate,
            cell(self.pretrain_loss),
            cell(self.wall_ms)
        )
    }
}

impl TrainTrace {
    pub fn push(&mut self, record: TrainRecord) {
        if let Some(last) = self.records.last() {
            assert!(
                record.iteration > last.iteration,
                "trace iterations must increase"
            );
        }
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// Per-iteration energy means of the last `window` training records.
    pub fn energy_window(&self, window: usize) -> Vec<f64> {
        let energies: Vec<f64> = self.records.iter().filter_map(|r| r.energy_mean).collect();
        energies[energies.len().saturating_sub(window)..].to_vec()
    }
}

/// Score-function gradient 2·mean[(E_p − Ē)·∇_θ log|ψ_p|].
pub fn energy_gradient(local_energies: &[f64], param_grads: &[Vec<f64>]) -> Result<Vec<f64>> {
    if local_energies.len() != param_grads.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} energies for {} gradients",
            local_energies.len(),
            param_grads.len()
        )));
    }
    let n = local_energies.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = local_energies.iter().sum::<f64>() / n as f64;
    let dim = param_grads[0].len();
    let mut out = vec![0.0; dim];
    for (e, g) in local_energies.iter().zip(param_grads) {
        if g.len() != dim {
            return Err(Error::ShapeMismatch(
                "parameter gradients differ in length".into(),
            ));
        }
        let w = 2.0 * (e - mean) / n as f64;
        for (o, gi) in out.iter_mut().zip(g) {
            *o += w * gi;
        }
    }
    Ok(out)
}

/// HF orbitals used as pretraining labels.
pub struct HfReference<'a> {
    pub scf: &'a ScfSolution,
    pub basis: &'a BasisSet,
}

impl HfReference<'_> {
    /// Per-spin label matrices, (i, j) = φ_i(r_j), for each walker.
    pub fn labels(&self, batch: &WalkerBatch) -> Result<Vec<[DMatrix<f64>; 2]>> {
        batch
            .walkers()
            .map(|w| {
                let r: Vec<[f64; 3]> = w.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
                hf_orbital_values(self.scf, self.basis, &r)
            })
            .collect()
    }
}

/// Mean squared difference between ansatz orbitals and HF labels broadcast
/// over determinants, averaged over walkers, with its parameter gradient.
pub fn pretrain_loss_and_grad(
    ansatz: &Ansatz,
    params: &AnsatzParams,
    positions: &[f64],
    labels: &[[DMatrix<f64>; 2]],
) -> Result<(f64, Vec<f64>)> {
    let cfg = ansatz.config();
    let stride = 3 * ansatz.n_electrons();
    let n_walkers = positions.len() / stride;
    if labels.len() != n_walkers {
        return Err(Error::ShapeMismatch(format!(
            "{} label sets for {n_walkers} walkers",
            labels.len()
        )));
    }
    for l in labels {
        for spin in 0..2 {
            let n = cfg.n_spin(spin);
            if l[spin].nrows() != n || l[spin].ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "HF labels are {}x{} but the ansatz has {n} electrons of spin {spin}",
                    l[spin].nrows(),
                    l[spin].ncols()
                )));
            }
        }
    }
    let entries = cfg.n_determinants * (cfg.n_up * cfg.n_up + cfg.n_down * cfg.n_down);
    let scale = 1.0 / (entries * n_walkers) as f64;
    let per_walker: Vec<(f64, Vec<f64>)> = positions
        .par_chunks(stride)
        .zip(labels.par_iter())
        .map(|(x, label)| {
            let tape = Tape::with_capacity(64 * params.len());
            let theta = tape.vars(&params.0);
            let xs: Vec<_> = x.iter().map(|&v| Scalar::cst(v)).collect();
            let orbs = ansatz.orbitals(&theta, &xs);
            let mut loss: Var = Scalar::zero();
            for spin in 0..2 {
                let n = cfg.n_spin(spin);
                for mat in &orbs[spin] {
                    for i in 0..n {
                        for j in 0..n {
                            let d = mat[i * n + j] - Scalar::cst(label[spin][(i, j)]);
                            loss = loss + d * d;
                        }
                    }
                }
            }
            let loss = loss.scale(scale);
            (loss.value(), tape.gradient(loss, &theta))
        })
        .collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (l, g) in &per_walker {
        total += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    Ok((total, grad))
}

/// Everything that evolves during a run.
pub struct Session {
    pub mol: Molecule,
    pub ansatz: Ansatz,
    pub params: AnsatzParams,
    pub optimizer: Optimizer,
    pub batch: WalkerBatch,
    pub trace: TrainTrace,
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    pub pretrain_done: usize,
    pub train_done: usize,
    pub burned_in: bool,
    /// Count of local energies clamped for the gradient.
    pub n_winsorized: u64,
    /// Count of steps where the gradient norm exceeded the clip threshold.
    pub n_clipped: u64,
}

impl Session {
    /// Fresh parameters from `train.seed` and walkers around the assigned nuclei.
    pub fn new(
        mol: Molecule,
        ansatz: Ansatz,
        assignment: &ElectronAssignment,
        sampler: SamplerConfig,
        train: TrainConfig,
    ) -> Result<Self> {
        train.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
        rng.set_stream(u64::MAX);
        let params = ansatz.init_params(&mut rng);
        let batch = {
            let wf = ansatz.bind(&params);
            init_walkers(&mol, assignment, &sampler, &|x: &[f64]| {
                wf.log_psi(x).log_magnitude
            })?
        };
        let optimizer = Optimizer::new(train.optimizer, ansatz.n_params());
        Ok(Self {
            mol,
            ansatz,
            params,
            optimizer,
            batch,
            trace: TrainTrace::default(),
            sampler,
            train,
            pretrain_done: 0,
            train_done: 0,
            burned_in: false,
            n_winsorized: 0,
            n_clipped: 0,
        })
    }

    fn advance(&mut self, n_steps: usize) {
        let wf = self.ansatz.bind(&self.params);
        run_chain(
            &mut self.batch,
            &|x: &[f64]| wf.log_psi(x).log_magnitude,
            &self.sampler,
            n_steps,
        );
    }

    fn refresh(&mut self) {
        let wf = self.ansatz.bind(&self.params);
        self.batch.refresh(&|x: &[f64]| wf.log_psi(x).log_magnitude);
    }

    fn next_iteration(&self) -> usize {
        self.pretrain_done + self.train_done
    }

    fn apply(&mut self, mut grad: Vec<f64>, lr: f64) {
        if let Some(c) = self.train.gradient_clip_norm {
            if clip_global_norm(&mut grad, c) > c {
                self.n_clipped += 1;
            }
        }
        self.optimizer.step(&mut self.params.0, &grad, lr);
        self.refresh();
    }

    /// Advance walkers under the current ansatz, then take one step on the
    /// orbital-matching loss. Returns the loss before the step.
    pub fn pretrain_step(&mut self, hf: &HfReference<'_>) -> Result<TrainRecord> {
        let start = Instant::now();
        self.batch.reset_counters();
        self.advance(self.sampler.steps_between_updates);
        let labels = hf.labels(&self.batch)?;
        let (loss, grad) =
            pretrain_loss_and_grad(&self.ansatz, &self.params, &self.batch.positions, &labels)?;
        self.apply(grad, self.train.learning_rate_pretrain);
        let record = TrainRecord {
            iteration: self.next_iteration(),
            energy_mean: None,
            energy_stderr: None,
            accept_rate: self.batch.acceptance_rate(),
            pretrain_loss: Some(loss),
            wall_ms: self
                .train
                .wall_clock
                .then(|| start.elapsed().as_secs_f64() * 1e3),
        };
        self.pretrain_done += 1;
        self.trace.push(record);
        Ok(record)
    }

    /// Local energies and ∇_θ log|ψ| for the current walkers. Flagged walkers
    /// are dropped; the returned estimate counts them.
    pub fn sample_energies(&self) -> Result<(EnergyEstimate, Vec<f64>, Vec<Vec<f64>>)> {
        let wf = self.ansatz.bind(&self.params);
        let local = batch_local_energies(&wf, &self.batch.positions, &self.mol);
        let grads: Vec<Vec<f64>> = self
            .batch
            .walkers()
            .collect::<Vec<_>>()
            .par_iter()
            .zip(local.par_iter())
            .map(|(x, e)| {
                if e.is_flagged() {
                    Vec::new()
                } else {
                    self.ansatz.param_grad_log_psi(&self.params, x).1 .0
                }
            })
            .collect();
        let mut energies = Vec::new();
        let mut kept = Vec::new();
        for (e, g) in local.iter().zip(grads) {
            if !e.is_flagged() && g.iter().all(|v| v.is_finite()) {
                energies.push(e.total);
                kept.push(g);
            }
        }
        let mut est = estimate(&energies)?;
        est.n_flagged = local.len() - energies.len();
        Ok((est, energies, kept))
    }

    fn burn_in(&mut self) {
        if !self.burned_in {
            self.advance(self.sampler.burn_in_steps);
            self.burned_in = true;
        }
    }

    /// Metropolis steps, local energies, gradient, optimizer update.
    pub fn train_step(&mut self) -> Result<TrainRecord> {
        let start = Instant::now();
        self.burn_in();
        self.batch.reset_counters();
        self.advance(self.sampler.steps_between_updates);
        let (est, energies, grads) = self.sample_energies()?;
        let for_grad = match self.train.winsorize_iqr {
            Some(width) => {
                let (w, moved) = winsorize(&energies, width);
                self.n_winsorized += moved as u64;
                w
            }
            None => energies,
        };
        let grad = energy_gradient(&for_grad, &grads)?;
        self.apply(grad, self.train.learning_rate_train);
        let record = TrainRecord {
            iteration: self.next_iteration(),
            energy_mean: Some(est.mean),
            energy_stderr: Some(est.std_error),
            accept_rate: self.batch.acceptance_rate(),
            pretrain_loss: None,
            wall_ms: self
                .train
                .wall_clock
                .then(|| start.elapsed().as_secs_f64() * 1e3),
        };
        self.train_done += 1;
        self.trace.push(record);
        Ok(record)
    }

    /// Switch to the training optimizer once pretraining is complete.
    fn begin_training(&mut self) {
        if self.train_done == 0 && self.optimizer.steps() > 0 && self.pretrain_done > 0 {
            self.optimizer = Optimizer::new(self.train.optimizer, self.ansatz.n_params());
        }
    }

    /// Run whatever remains of pretraining and training. `after_each` sees the
    /// session after every iteration, e.g. to checkpoint.
    pub fn run<F>(&mut self, hf: Option<&HfReference<'_>>, mut after_each: F) -> Result<()>
    where
        F: FnMut(&Session) -> Result<()>,
    {
        if let Some(hf) = hf {
            while self.pretrain_done < self.train.pretrain_epochs {
                self.pretrain_step(hf)?;
                after_each(self)?;
            }
        }
        self.begin_training();
        while self.train_done < self.train.train_iterations {
            self.train_step()?;
            after_each(self)?;
        }
        Ok(())
    }

    /// Energy of the current parameters from `n_sweeps` fresh batches without
    /// updating anything but the walkers.
    pub fn evaluate(&mut self, n_sweeps: usize) -> Result<EnergyEstimate> {
        self.burn_in();
        let mut means = Vec::with_capacity(n_sweeps);
        for _ in 0..n_sweeps {
            self.advance(self.sampler.steps_between_updates);
            let wf = self.ansatz.bind(&self.params);
            let local = batch_local_energies(&wf, &self.batch.positions, &self.mol);
            means.push(expected_energy(&local)?.mean);
        }
        estimate(&means)
    }
}
