//! Metropolis–Hastings walkers targeting |ψ|².

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ansatz::{ByteReader, ByteWriter};
use crate::charge_init::ElectronAssignment;
use crate::error::{Error, Result};
use crate::molecule::Molecule;

const MAX_INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub steps_between_updates: usize,
    /// Bohr.
    pub proposal_std: f64,
    /// Bohr.
    pub init_std: f64,
    pub burn_in_steps: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            steps_between_updates: 10,
            proposal_std: 0.2,
            init_std: 1.0,
            burn_in_steps: 500,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.steps_between_updates == 0 {
            return Err(Error::Config(
                "batch_size and steps_between_updates must be positive".into(),
            ));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.proposal_std) || !positive(self.init_std) {
            return Err(Error::Config(
                "proposal_std and init_std must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Walker positions (batch × N × 3, Bohr) with cached 2·log|ψ| and one RNG
/// stream per walker.
#[derive(Debug, Clone)]
pub struct WalkerBatch {
    n_electrons: usize,
    pub positions: Vec<f64>,
    pub log_prob: Vec<f64>,
    pub accept_count: u64,
    pub proposal_count: u64,
    rngs: Vec<ChaCha8Rng>,
}

fn walker_rng(seed: u64, walker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walker as u64);
    rng
}

impl WalkerBatch {
    /// Batch from explicit positions; `log_psi` returns log|ψ|.
    pub fn from_positions<F>(
        positions: Vec<f64>,
        n_electrons: usize,
        seed: u64,
        log_psi: &F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let stride = 3 * n_electrons;
        if stride == 0 || !positions.len().is_multiple_of(stride) {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates do not split into walkers of {n_electrons} electrons",
                positions.len()
            )));
        }
        let n_walkers = positions.len() / stride;
        let log_prob = positions
            .par_chunks(stride)
            .map(|x| 2.0 * log_psi(x))
            .collect();
        Ok(Self {
            n_electrons,
            positions,
            log_prob,
            accept_count: 0,
            proposal_count: 0,
            rngs: (0..n_walkers).map(|w| walker_rng(seed, w)).collect(),
        })
    }

    pub fn n_walkers(&self) -> usize {
        self.log_prob.len()
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn walker(&self, w: usize) -> &[f64] {
        let s = 3 * self.n_electrons;
        &self.positions[w * s..(w + 1) * s]
    }

    pub fn walkers(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks(3 * self.n_electrons)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposal_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.proposal_count as f64
        }
    }

    pub fn reset_counters(&mut self) {
        self.accept_count = 0;
        self.proposal_count = 0;
    }

    /// Recompute cached log probabilities after the wavefunction changed.
    pub fn refresh<F>(&mut self, log_psi: &F)
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let stride = 3 * self.n_electrons;
        self.positions
            .par_chunks(stride)
            .zip(self.log_prob.par_iter_mut())
            .for_each(|(x, lp)| *lp = 2.0 * log_psi(x));
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u64(self.n_electrons as u64);
        w.f64s(&self.positions);
        w.f64s(&self.log_prob);
        w.u64(self.accept_count);
        w.u64(self.proposal_count);
        w.u64(self.rngs.len() as u64);
        for rng in &self.rngs {
            w.bytes(&rng.get_seed());
            w.u64(rng.get_stream());
            w.u128(rng.get_word_pos());
        }
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let n_electrons = r.u64()? as usize;
        let positions = r.f64s()?;
        let log_prob = r.f64s()?;
        let accept_count = r.u64()?;
        let proposal_count = r.u64()?;
        let n = r.u64()? as usize;
        if n != log_prob.len() || positions.len() != n * 3 * n_electrons {
            return Err(Error::Checkpoint("inconsistent walker section".into()));
        }
        let mut rngs = Vec::with_capacity(n);
        for _ in 0..n {
            let seed: [u8; 32] = r.bytes(32)?.try_into().unwrap();
            let mut rng = ChaCha8Rng::from_seed(seed);
            rng.set_stream(r.u64()?);
            rng.set_word_pos(r.u128()?);
            rngs.push(rng);
        }
        Ok(Self {
            n_electrons,
            positions,
            log_prob,
            accept_count,
            proposal_count,
            rngs,
        })
    }
}

/// Gaussian clouds around the assigned nuclei; spin-up electrons first.
/// Walkers whose initial log|ψ| is not finite are redrawn.
pub fn init_walkers<F>(
    mol: &Molecule,
    assignment: &ElectronAssignment,
    cfg: &SamplerConfig,
    log_psi: &F,
) -> Result<WalkerBatch>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if assignment.per_atom_up.len() != mol.n_atoms() {
        return Err(Error::ShapeMismatch(
            "assignment does not match the molecule".into(),
        ));
    }
    let mut centers = Vec::new();
    for per_atom in [&assignment.per_atom_up, &assignment.per_atom_down] {
        for (atom, &count) in per_atom.iter().enumerate() {
            centers.extend(std::iter::repeat_n(mol.atoms()[atom].position, count));
        }
    }
    let n = centers.len();
    if n == 0 {
        return Err(Error::ShapeMismatch("no electrons assigned".into()));
    }
    let mut batch = WalkerBatch {
        n_electrons: n,
        positions: vec![0.0; cfg.batch_size * 3 * n],
        log_prob: vec![0.0; cfg.batch_size],
        accept_count: 0,
        proposal_count: 0,
        rngs: (0..cfg.batch_size)
            .map(|w| walker_rng(cfg.seed, w))
            .collect(),
    };
    let results: Vec<Result<()>> = batch
        .positions
        .par_chunks_mut(3 * n)
        .zip(batch.log_prob.par_iter_mut())
        .zip(batch.rngs.par_iter_mut())
        .enumerate()
        .map(|(w, ((x, lp), rng))| {
            for _ in 0..MAX_INIT_ATTEMPTS {
                for (e, c) in centers.iter().enumerate() {
                    for d in 0..3 {
                        x[3 * e + d] = c[d] + cfg.init_std * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                *lp = 2.0 * log_psi(x);
                if lp.is_finite() {
                    return Ok(());
                }
            }
            Err(Error::WalkerInit {
                walker: w,
                attempts: MAX_INIT_ATTEMPTS,
            })
        })
        .collect();
    results.into_iter().collect::<Result<()>>()?;
    Ok(batch)
}

/// One joint all-electron move per walker. Returns the number accepted.
pub fn metropolis_step<F>(batch: &mut WalkerBatch, log_psi: &F, cfg: &SamplerConfig) -> u64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let stride = 3 * batch.n_electrons;
    let std = cfg.proposal_std;
    let accepted: u64 = batch
        .positions
        .par_chunks_mut(stride)
        .zip(batch.log_prob.par_iter_mut())
        .zip(batch.rngs.par_iter_mut())
        .map(|((x, lp), rng)| {
            let trial: Vec<f64> = x
                .iter()
                .map(|v| v + std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let u = rng.random::<f64>().ln();
            let lp_trial = 2.0 * log_psi(&trial);
            if !lp_trial.is_finite() {
                return 0;
            }
            let a = lp_trial - *lp;
            if u <= a {
                x.copy_from_slice(&trial);
                *lp = lp_trial;
                1
            } else {
                0
            }
        })
        .sum();
    batch.accept_count += accepted;
    batch.proposal_count += batch.n_walkers() as u64;
    accepted
}

pub fn run_chain<F>(batch: &mut WalkerBatch, log_psi: &F, cfg: &SamplerConfig, n_steps: usize)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    for _ in 0..n_steps {
        metropolis_step(batch, log_psi, cfg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge_init::split_spins;

    fn hydrogen() -> (Molecule, ElectronAssignment) {
        let m = Molecule::from_geometry_str("H 0.5 -1.0 2.0", 0, None).unwrap();
        let a = split_spins(&[1], 1, 0).unwrap();
        (m, a)
    }

    fn gaussian(x: &[f64]) -> f64 {
        // log|ψ| with 2 log|ψ| = −|r|².
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn initial_positions_center_on_nucleus() {
        let (m, a) = hydrogen();
        let cfg = SamplerConfig {
            batch_size: 100_000,
            ..Default::default()
        };
        let b = init_walkers(&m, &a, &cfg, &|_: &[f64]| 0.0).unwrap();
        let se = cfg.init_std / (cfg.batch_size as f64).sqrt();
        for d in 0..3 {
            let mean = b.walkers().map(|w| w[d]).sum::<f64>() / cfg.batch_size as f64;
            assert!((mean - m.atoms()[0].position[d]).abs() < 5.0 * se);
        }
    }

    #[test]
    fn assignment_places_electrons_per_atom() {
        let m = Molecule::from_geometry_str("Li 0 0 0\nH 0 0 100", 1, None).unwrap();
        let a = split_spins(&[2, 0], 1, 1).unwrap();
        let cfg = SamplerConfig {
            batch_size: 50,
            init_std: 0.5,
            ..Default::default()
        };
        let b = init_walkers(&m, &a, &cfg, &|_: &[f64]| 0.0).unwrap();
        assert_eq!(b.n_electrons(), 2);
        assert!(b.positions.chunks(3).all(|r| r[2].abs() < 10.0));
    }

    #[test]
    fn seeded_batches_are_identical() {
        let (m, a) = hydrogen();
        let cfg = SamplerConfig {
            seed: 42,
            ..Default::default()
        };
        let mut b1 = init_walkers(&m, &a, &cfg, &gaussian).unwrap();
        let mut b2 = init_walkers(&m, &a, &cfg, &gaussian).unwrap();
        run_chain(&mut b1, &gaussian, &cfg, 25);
        run_chain(&mut b2, &gaussian, &cfg, 25);
        assert!(b1
            .positions
            .iter()
            .zip(&b2.positions)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(b1.accept_count, b2.accept_count);
    }

    #[test]
    fn init_repair_gives_up() {
        let (m, a) = hydrogen();
        let err = init_walkers(&m, &a, &SamplerConfig::default(), &|_: &[f64]| {
            f64::NEG_INFINITY
        });
        assert!(matches!(err, Err(Error::WalkerInit { attempts: 100, .. })));
    }

    #[test]
    fn constant_target_accepts_everything() {
        let (m, a) = hydrogen();
        let cfg = SamplerConfig::default();
        let flat = |_: &[f64]| 1.5;
        let mut b = init_walkers(&m, &a, &cfg, &flat).unwrap();
        run_chain(&mut b, &flat, &cfg, 40);
        assert_eq!(b.acceptance_rate(), 1.0);
        assert_eq!(b.proposal_count, 40 * 8);
    }

    #[test]
    fn zero_steps_is_identity_and_rejections_leave_state() {
        let (m, a) = hydrogen();
        let cfg = SamplerConfig::default();
        let mut b = init_walkers(&m, &a, &cfg, &gaussian).unwrap();
        let before = b.clone();
        run_chain(&mut b, &gaussian, &cfg, 0);
        assert_eq!(b.positions, before.positions);
        // A target that is non-finite everywhere except the current points rejects all moves.
        let current: Vec<Vec<f64>> = b.walkers().map(|w| w.to_vec()).collect();
        let spiky = move |x: &[f64]| {
            if current.iter().any(|c| c.as_slice() == x) {
                0.0
            } else {
                f64::NAN
            }
        };
        b.refresh(&spiky);
        let snapshot = (b.positions.clone(), b.log_prob.clone());
        run_chain(&mut b, &spiky, &cfg, 10);
        assert_eq!(b.accept_count, 0);
        assert!(b
            .positions
            .iter()
            .zip(&snapshot.0)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(b
            .log_prob
            .iter()
            .zip(&snapshot.1)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn gaussian_target_variance() {
        let (m, a) = hydrogen();
        let m = m.translated([-0.5, 1.0, -2.0]);
        let cfg = SamplerConfig {
            batch_size: 100_000,
            proposal_std: 0.8,
            seed: 9,
            ..Default::default()
        };
        let mut b = init_walkers(&m, &a, &cfg, &gaussian).unwrap();
        run_chain(&mut b, &gaussian, &cfg, 200);
        // Independent chains: one sample per walker per coordinate.
        let n = cfg.batch_size as f64;
        for d in 0..3 {
            let xs: Vec<f64> = b.walkers().map(|w| w[d]).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            // Var of the sample variance of a normal with σ² = 0.5 is 2σ⁴/(n−1).
            let se = (2.0 * 0.25 / (n - 1.0)).sqrt();
            assert!((var - 0.5).abs() < 3.0 * se, "coordinate {d}: {var}");
        }
        let rate = b.acceptance_rate();
        assert!(rate > 0.0 && rate < 1.0);
    }

    #[test]
    fn histogram_matches_target() {
        use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
        // x-marginal of exp(−|r|²) is N(0, ½); bin 20 000 independent chains.
        let (m, a) = hydrogen();
        let m = m.translated([-0.5, 1.0, -2.0]);
        let cfg = SamplerConfig {
            batch_size: 20_000,
            proposal_std: 0.8,
            seed: 17,
            ..Default::default()
        };
        let mut b = init_walkers(&m, &a, &cfg, &gaussian).unwrap();
        run_chain(&mut b, &gaussian, &cfg, 300);
        let normal = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
        let edges: Vec<f64> = (0..=16).map(|k| -2.0 + 0.25 * k as f64).collect();
        let mut counts = vec![0usize; edges.len() + 1];
        for w in b.walkers() {
            counts[edges.partition_point(|&e| e <= w[0])] += 1;
        }
        let n = cfg.batch_size as f64;
        let mut chi2 = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let lo = if k == 0 {
                f64::NEG_INFINITY
            } else {
                edges[k - 1]
            };
            let hi = if k == edges.len() {
                f64::INFINITY
            } else {
                edges[k]
            };
            let expected = n * (normal.cdf(hi) - normal.cdf(lo));
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        let critical = ChiSquared::new((counts.len() - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    }

    #[test]
    fn checkpoint_round_trip_continues_identically() {
        let (m, a) = hydrogen();
        let cfg = SamplerConfig {
            seed: 3,
            ..Default::default()
        };
        let mut b = init_walkers(&m, &a, &cfg, &gaussian).unwrap();
        run_chain(&mut b, &gaussian, &cfg, 5);
        let mut w = ByteWriter::new();
        b.write(&mut w);
        let bytes = w.into_inner();
        let mut c = WalkerBatch::read(&mut ByteReader::new(&bytes)).unwrap();
        run_chain(&mut b, &gaussian, &cfg, 7);
        run_chain(&mut c, &gaussian, &cfg, 7);
        assert_eq!(b.positions, c.positions);
        assert_eq!(b.accept_count, c.accept_count);
    }
}
