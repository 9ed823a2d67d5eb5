//! Workflows behind the `vmc` binary: Hartree–Fock report, full training
//! runs, bond-length scans and ionization potentials.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use vmc_core::ansatz::Ansatz;
use vmc_core::basis::{build_basis, BasisSet};
use vmc_core::charge_init::{assign_electrons, split_spins, ElectronAssignment};
use vmc_core::energy::{blocked_estimate, estimate, EnergyEstimate};
use vmc_core::molecule::{format_geometry, Atom, Molecule};
use vmc_core::scf::{mulliken, run_uhf, ScfOptions, ScfSolution};
use vmc_core::trainer::{save_checkpoint, HfReference, Session, TrainTrace};

pub use config::RunConfig;

/// Blocks used for the final-window error bar.
const WINDOW_BLOCKS: usize = 10;

pub struct HfReport {
    pub molecule: Molecule,
    pub basis: BasisSet,
    pub scf: ScfSolution,
    pub partial_charges: Vec<f64>,
    pub populations: Vec<f64>,
    pub assignment: ElectronAssignment,
}

/// SCF, Mulliken analysis and per-nucleus electron assignment.
pub fn run_hf(cfg: &RunConfig) -> Result<HfReport> {
    let molecule = cfg.molecule()?;
    let basis = build_basis(&molecule)?;
    let (n_up, n_down) = molecule.electron_count();
    let scf = run_uhf(&molecule, &basis, n_up, n_down, &ScfOptions::default())?;
    let m = mulliken(&scf, &basis, &molecule)?;
    let per_atom = assign_electrons(
        &m.partial_charges,
        &molecule.atomic_numbers(),
        molecule.ionic_charge(),
    )?;
    let assignment = split_spins(&per_atom, n_up, n_down)?;
    Ok(HfReport {
        molecule,
        basis,
        scf,
        partial_charges: m.partial_charges,
        populations: m.populations,
        assignment,
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn cmd_hf(cfg: &RunConfig, out: &mut dyn Write) -> Result<HfReport> {
    let r = run_hf(cfg)?;
    writeln!(out, "total_energy {:.10}", r.scf.total_energy)?;
    writeln!(out, "scf_iterations {}", r.scf.iterations)?;
    writeln!(out, "partial_charges [{}]", join(&r.partial_charges))?;
    writeln!(
        out,
        "electron_assignment [{}]",
        join(&r.assignment.per_atom_electrons)
    )?;
    writeln!(
        out,
        "spin_up_assignment [{}]",
        join(&r.assignment.per_atom_up)
    )?;
    writeln!(
        out,
        "spin_down_assignment [{}]",
        join(&r.assignment.per_atom_down)
    )?;
    Ok(r)
}

pub struct TrainOutcome {
    pub energy: EnergyEstimate,
    pub hf_energy: f64,
    pub trace: TrainTrace,
    pub out_dir: PathBuf,
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Mean of the last `window` iteration energies with a blocked error bar.
fn final_estimate(trace: &TrainTrace, window: usize) -> Result<EnergyEstimate> {
    let values = trace.energy_window(window);
    if values.len() >= 2 * WINDOW_BLOCKS {
        Ok(blocked_estimate(&values, WINDOW_BLOCKS)?)
    } else {
        Ok(estimate(&values)?)
    }
}

/// HF, charge initialization, walker setup, pretraining and training.
/// Writes the effective config, trace, final checkpoint and summary into the
/// output directory.
pub fn cmd_train(cfg: &RunConfig, log: &mut dyn Write) -> Result<TrainOutcome> {
    let out_dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let effective = cfg.effective()?;
    write_file(
        &out_dir,
        "effective_config.toml",
        effective.to_toml()?.as_bytes(),
    )?;
    let provenance = cfg.provenance()?;

    let hf = run_hf(cfg)?;
    writeln!(log, "hf_energy {:.10}", hf.scf.total_energy)?;
    writeln!(
        log,
        "electron_assignment [{}]",
        join(&hf.assignment.per_atom_electrons)
    )?;
    let (n_up, n_down) = hf.molecule.electron_count();
    let ansatz = Ansatz::new(cfg.ansatz_config(n_up, n_down), &hf.molecule)?;
    let mut session = Session::new(
        hf.molecule.clone(),
        ansatz,
        &hf.assignment,
        cfg.sampler_config(),
        cfg.train_config()?,
    )?;
    let reference = HfReference {
        scf: &hf.scf,
        basis: &hf.basis,
    };
    let every = cfg.train.checkpoint_every;
    session.run(Some(&reference), |s| {
        let done = s.pretrain_done + s.train_done;
        if every > 0 && done % every == 0 {
            save_checkpoint(s, &out_dir.join(format!("checkpoint_{done:06}.bin")))?;
        }
        if done % 100 == 0 {
            if let Some(r) = s.trace.records.last() {
                let _ = writeln!(log, "iter {} {}", r.iteration, r.csv_row());
            }
        }
        Ok(())
    })?;

    let energy = if session.train_done > 0 {
        final_estimate(&session.trace, cfg.train.final_window)?
    } else {
        session.evaluate(cfg.train.eval_sweeps)?
    };
    save_checkpoint(&session, &out_dir.join("checkpoint.bin"))?;
    write_file(
        &out_dir,
        "trace.csv",
        format!("{provenance}{}", session.trace.to_csv()).as_bytes(),
    )?;
    let summary = format!(
        "{provenance}energy_mean,energy_stderr,samples,hf_energy,clipped_steps,winsorized_samples\n{},{},{},{},{},{}\n",
        energy.mean, energy.std_error, energy.n_samples, hf.scf.total_energy, session.n_clipped, session.n_winsorized
    );
    write_file(&out_dir, "summary.csv", summary.as_bytes())?;
    writeln!(log, "energy {:.6} +/- {:.6}", energy.mean, energy.std_error)?;
    Ok(TrainOutcome {
        energy,
        hf_energy: hf.scf.total_energy,
        trace: session.trace,
        out_dir,
    })
}

pub struct ScanPoint {
    pub distance: f64,
    pub energy: EnergyEstimate,
    pub hf_energy: f64,
    pub reference: Option<f64>,
}

/// The same diatomic with its two nuclei `distance` Bohr apart on the z axis.
pub fn diatomic_at(mol: &Molecule, distance: f64) -> Result<Vec<Atom>> {
    if mol.n_atoms() != 2 {
        bail!(
            "a bond scan needs a diatomic molecule, got {} atoms",
            mol.n_atoms()
        );
    }
    let mut atoms = mol.atoms().to_vec();
    atoms[0].position = [0.0, 0.0, -0.5 * distance];
    atoms[1].position = [0.0, 0.0, 0.5 * distance];
    Ok(atoms)
}

/// One full training run per bond length, run concurrently. Rows come out in
/// order of distance.
pub fn cmd_scan(cfg: &RunConfig, log: &mut dyn Write) -> Result<Vec<ScanPoint>> {
    let Some(scan) = cfg.scan.clone() else {
        bail!("the configuration has no [scan] section");
    };
    let mol = cfg.molecule()?;
    let distances = scan.distances()?;
    let configs: Vec<RunConfig> = distances
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut c = cfg.clone();
            c.scan = None;
            c.molecule.geometry = None;
            c.molecule.atoms = Some(format_geometry(&diatomic_at(&mol, d)?));
            c.output.dir = cfg.output.dir.join(format!("point_{i:03}"));
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let runs: Vec<(Vec<u8>, Result<TrainOutcome>)> = configs
        .par_iter()
        .map(|c| {
            let mut buf = Vec::new();
            let r = cmd_train(c, &mut buf);
            (buf, r)
        })
        .collect();
    let mut points = Vec::new();
    for (i, (buf, run)) in runs.into_iter().enumerate() {
        writeln!(log, "# point {i}: distance {}", distances[i])?;
        log.write_all(&buf)?;
        let outcome = run?;
        points.push(ScanPoint {
            distance: distances[i],
            energy: outcome.energy,
            hf_energy: outcome.hf_energy,
            reference: scan.reference.as_ref().map(|r| r[i]),
        });
    }
    points.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let mut csv = cfg.provenance()?;
    csv.push_str(if scan.reference.is_some() {
        "distance_bohr,energy,stderr,reference\n"
    } else {
        "distance_bohr,energy,stderr\n"
    });
    for p in &points {
        csv.push_str(&format!(
            "{},{},{}",
            p.distance, p.energy.mean, p.energy.std_error
        ));
        if let Some(r) = p.reference {
            csv.push_str(&format!(",{r}"));
        }
        csv.push('\n');
    }
    std::fs::create_dir_all(&cfg.output.dir)?;
    write_file(&cfg.output.dir, "scan.csv", csv.as_bytes())?;
    Ok(points)
}

pub struct IpReport {
    pub ip: f64,
    pub ip_stderr: f64,
    pub hf_ip: f64,
    pub reference: Option<f64>,
    pub neutral: TrainOutcome,
    pub cation: TrainOutcome,
}

impl IpReport {
    /// Whether the trained IP is closer to the reference than the HF IP.
    pub fn improves_on_hf(&self) -> Option<bool> {
        self.reference
            .map(|r| (self.ip - r).abs() < (self.hf_ip - r).abs())
    }
}

/// E(cation) − E(neutral) from two training runs, plus the HF-level value.
pub fn cmd_ip(neutral: &RunConfig, cation: &RunConfig, log: &mut dyn Write) -> Result<IpReport> {
    let dq = cation.molecule.charge - neutral.molecule.charge;
    if dq != 1 && !(dq == 0 && neutral == cation) {
        bail!("the cation configuration must carry exactly one more unit of charge than the neutral one");
    }
    let out = neutral.output.dir.clone();
    let mut n_cfg = neutral.clone();
    n_cfg.output.dir = out.join("neutral");
    let mut c_cfg = cation.clone();
    c_cfg.output.dir = out.join("cation");
    let (n_run, c_run) = rayon::join(
        || {
            let mut buf = Vec::new();
            (cmd_train(&n_cfg, &mut buf), buf)
        },
        || {
            let mut buf = Vec::new();
            (cmd_train(&c_cfg, &mut buf), buf)
        },
    );
    writeln!(log, "# neutral")?;
    log.write_all(&n_run.1)?;
    writeln!(log, "# cation")?;
    log.write_all(&c_run.1)?;
    let (n, c) = (n_run.0?, c_run.0?);
    let report = IpReport {
        ip: c.energy.mean - n.energy.mean,
        ip_stderr: c.energy.std_error.hypot(n.energy.std_error),
        hf_ip: c.hf_energy - n.hf_energy,
        reference: neutral.ip.as_ref().and_then(|s| s.reference),
        neutral: n,
        cation: c,
    };
    writeln!(log, "hf_ip {:.6}", report.hf_ip)?;
    writeln!(log, "ip {:.6} +/- {:.6}", report.ip, report.ip_stderr)?;
    if let (Some(r), Some(better)) = (report.reference, report.improves_on_hf()) {
        writeln!(log, "reference_ip {r:.6} trained_closer_than_hf {better}")?;
    }
    let mut csv = neutral.provenance()?;
    csv.push_str("quantity,value,stderr\n");
    csv.push_str(&format!("hf_ip,{},0\n", report.hf_ip));
    csv.push_str(&format!("ip,{},{}\n", report.ip, report.ip_stderr));
    csv.push_str(&format!(
        "energy_neutral,{},{}\n",
        report.neutral.energy.mean, report.neutral.energy.std_error
    ));
    csv.push_str(&format!(
        "energy_cation,{},{}\n",
        report.cation.energy.mean, report.cation.energy.std_error
    ));
    if let Some(r) = report.reference {
        csv.push_str(&format!("reference_ip,{r},0\n"));
    }
    std::fs::create_dir_all(&out)?;
    write_file(&out, "ip.csv", csv.as_bytes())?;
    Ok(report)
}

/// Process exit code for a failed command: 2 for numerical failures, 1 for
/// everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<vmc_core::Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}
