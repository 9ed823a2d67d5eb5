//! TOML run configuration. Unknown keys are rejected so typos cannot silently
//! change a run.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vmc_core::ansatz::AnsatzConfig;
use vmc_core::molecule::{format_geometry, Molecule};
use vmc_core::sampler::SamplerConfig;
use vmc_core::trainer::{OptimizerKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub molecule: MoleculeSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub ansatz: AnsatzSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip: Option<IpSection>,
}

/// Either a geometry file or inline `SYMBOL x y z` lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<String>,
    #[serde(default)]
    pub charge: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicity: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub batch_size: usize,
    pub steps_between_updates: usize,
    pub proposal_std: f64,
    pub init_std: f64,
    pub burn_in_steps: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            batch_size: d.batch_size,
            steps_between_updates: d.steps_between_updates,
            proposal_std: d.proposal_std,
            init_std: d.init_std,
            burn_in_steps: d.burn_in_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnsatzSection {
    pub n_determinants: usize,
    pub hidden_one: usize,
    pub hidden_two: usize,
    pub n_layers: usize,
}

impl Default for AnsatzSection {
    fn default() -> Self {
        let d = AnsatzConfig::new(1, 0);
        Self {
            n_determinants: d.n_determinants,
            hidden_one: d.hidden_one,
            hidden_two: d.hidden_two,
            n_layers: d.n_layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub pretrain_epochs: usize,
    pub train_iterations: usize,
    pub learning_rate_pretrain: f64,
    pub learning_rate_train: f64,
    pub optimizer: String,
    pub clip_gradients: bool,
    pub gradient_clip_norm: f64,
    pub winsorize: bool,
    pub winsorize_iqr: f64,
    /// Write `checkpoint_NNNNNN.bin` every this many iterations; 0 disables.
    pub checkpoint_every: usize,
    pub wall_clock: bool,
    /// Number of final training iterations averaged for the reported energy.
    pub final_window: usize,
    /// Sweeps used to estimate the energy when no training iterations run.
    pub eval_sweeps: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            pretrain_epochs: d.pretrain_epochs,
            train_iterations: d.train_iterations,
            learning_rate_pretrain: d.learning_rate_pretrain,
            learning_rate_train: d.learning_rate_train,
            optimizer: d.optimizer.name().into(),
            clip_gradients: d.gradient_clip_norm.is_some(),
            gradient_clip_norm: d.gradient_clip_norm.unwrap_or(1.0),
            winsorize: d.winsorize_iqr.is_some(),
            winsorize_iqr: d.winsorize_iqr.unwrap_or(10.0),
            checkpoint_every: d.checkpoint_every,
            wall_clock: d.wall_clock,
            final_window: 200,
            eval_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// Bond lengths in Bohr: either an explicit `distances` list or `points`
/// evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Optional comparison energies, one per point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
}

impl ScanSection {
    pub fn distances(&self) -> Result<Vec<f64>> {
        let d = match (&self.distances, self.start, self.stop, self.points) {
            (Some(d), None, None, None) => d.clone(),
            (None, Some(a), Some(b), Some(n)) => match n {
                0 => Vec::new(),
                1 => vec![a],
                n => (0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
            _ => bail!("[scan] needs either `distances` or all of `start`, `stop` and `points`"),
        };
        if d.is_empty() || d.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            bail!("[scan] needs at least one positive distance");
        }
        if let Some(r) = &self.reference {
            if r.len() != d.len() {
                bail!(
                    "[scan] has {} reference energies for {} points",
                    r.len(),
                    d.len()
                );
            }
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpSection {
    /// Optional reference ionization potential in Hartree for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

impl RunConfig {
    /// Parse and resolve relative geometry paths against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).context("invalid configuration")?;
        if let Some(g) = &cfg.molecule.geometry {
            if g.is_relative() {
                cfg.molecule.geometry = Some(base_dir.join(g));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.molecule.geometry, &self.molecule.atoms) {
            (Some(p), None) => {
                if !p.is_file() {
                    bail!("geometry file {} does not exist", p.display());
                }
            }
            (None, Some(_)) => {}
            _ => bail!("[molecule] needs exactly one of `geometry` or `atoms`"),
        }
        OptimizerKind::parse(&self.train.optimizer)?;
        self.sampler_config().validate()?;
        self.train_config()?.validate()?;
        if let Some(scan) = &self.scan {
            scan.distances()?;
        }
        Ok(())
    }

    pub fn molecule(&self) -> Result<Molecule> {
        let text = match (&self.molecule.geometry, &self.molecule.atoms) {
            (Some(p), _) => {
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
            }
            (None, Some(a)) => a.clone(),
            (None, None) => bail!("no geometry given"),
        };
        Ok(Molecule::from_geometry_str(
            &text,
            self.molecule.charge,
            self.molecule.multiplicity,
        )?)
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            batch_size: s.batch_size,
            steps_between_updates: s.steps_between_updates,
            proposal_std: s.proposal_std,
            init_std: s.init_std,
            burn_in_steps: s.burn_in_steps,
            seed: self.seed,
        }
    }

    pub fn ansatz_config(&self, n_up: usize, n_down: usize) -> AnsatzConfig {
        let a = &self.ansatz;
        AnsatzConfig {
            n_determinants: a.n_determinants,
            hidden_one: a.hidden_one,
            hidden_two: a.hidden_two,
            n_layers: a.n_layers,
            n_up,
            n_down,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            pretrain_epochs: t.pretrain_epochs,
            train_iterations: t.train_iterations,
            learning_rate_pretrain: t.learning_rate_pretrain,
            learning_rate_train: t.learning_rate_train,
            optimizer: OptimizerKind::parse(&t.optimizer)?,
            gradient_clip_norm: t.clip_gradients.then_some(t.gradient_clip_norm),
            winsorize_iqr: t.winsorize.then_some(t.winsorize_iqr),
            checkpoint_every: t.checkpoint_every,
            seed: self.seed,
            wall_clock: t.wall_clock,
        })
    }

    /// Self-contained copy: the geometry is inlined so the dump reproduces the
    /// run from any directory.
    pub fn effective(&self) -> Result<Self> {
        let mol = self.molecule()?;
        let mut out = self.clone();
        out.molecule.geometry = None;
        out.molecule.atoms = Some(format_geometry(mol.atoms()));
        Ok(out)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| anyhow!("serializing configuration: {e}"))
    }

    /// SHA-256 of the effective configuration, ignoring the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.effective()?;
        c.output = OutputSection::default();
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Comment lines prefixed to every CSV output.
    pub fn provenance(&self) -> Result<String> {
        Ok(format!(
            "# vmc {}\n# seed {}\n# config_sha256 {}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.hash()?
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[molecule]\natoms = \"H 0 0 0\"\n";

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.sampler.batch_size, 8);
        assert_eq!(c.sampler.steps_between_updates, 10);
        assert_eq!(c.train.optimizer, "adam");
        assert_eq!(c.train_config().unwrap().gradient_clip_norm, Some(1.0));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}[sampler]\nbatch_sise = 4\n");
        assert!(RunConfig::parse(&text, Path::new(".")).is_err());
        assert!(RunConfig::parse(
            "sede = 3\n[molecule]\natoms = \"H 0 0 0\"\n",
            Path::new(".")
        )
        .is_err());
    }

    #[test]
    fn geometry_must_exist_and_be_unique() {
        assert!(RunConfig::parse(
            "[molecule]\ngeometry = \"missing.xyz\"\n",
            Path::new("/nonexistent")
        )
        .is_err());
        assert!(RunConfig::parse("[molecule]\n", Path::new(".")).is_err());
    }

    #[test]
    fn effective_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("lih.xyz"),
            "units angstrom\nLi 0 0 0\nH 0 0 1.5949\n",
        )
        .unwrap();
        let text = "seed = 5\n[molecule]\ngeometry = \"lih.xyz\"\ncharge = 1\n[train]\ntrain_iterations = 7\n";
        let c = RunConfig::parse(text, dir.path()).unwrap();
        let dumped = c.effective().unwrap().to_toml().unwrap();
        let back = RunConfig::parse(&dumped, Path::new("/")).unwrap();
        assert_eq!(back, c.effective().unwrap());
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        let m1 = c.molecule().unwrap();
        let m2 = back.molecule().unwrap();
        assert_eq!(m1.positions(), m2.positions());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::parse(MINIMAL, Path::new(".")).unwrap();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn scan_distances() {
        let s = ScanSection {
            distances: None,
            start: Some(1.0),
            stop: Some(2.0),
            points: Some(3),
            reference: None,
        };
        assert_eq!(s.distances().unwrap(), vec![1.0, 1.5, 2.0]);
        let s = ScanSection {
            distances: Some(vec![1.0, 1.4]),
            start: Some(1.0),
            stop: None,
            points: None,
            reference: None,
        };
        assert!(s.distances().is_err());
        let s = ScanSection {
            distances: Some(vec![1.0, 1.4]),
            start: None,
            stop: None,
            points: None,
            reference: Some(vec![0.0]),
        };
        assert!(s.distances().is_err());
    }
}
