use std::path::{Path, PathBuf};
use std::process::Command;

use vmc_cli::{cmd_hf, cmd_ip, cmd_scan, cmd_train, exit_code, RunConfig};

fn config(text: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::parse(text, Path::new(".")).unwrap();
    c.output.dir = out.to_path_buf();
    c
}

const H_ATOM: &str = "seed = 11\n[molecule]\natoms = \"H 0 0 0\"\n[sampler]\nburn_in_steps = 50\n[train]\npretrain_epochs = 5\ntrain_iterations = 20\n";

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn hf_reports_charges_and_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    let cation = config(
        "[molecule]\natoms = \"Li 0 0 0\\nH 0 0 3.015\"\ncharge = 1\n",
        dir.path(),
    );
    let r = cmd_hf(&cation, &mut out).unwrap();
    assert_eq!(r.partial_charges.len(), 2);
    assert!((r.partial_charges.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    assert_eq!(r.assignment.per_atom_electrons, vec![2, 1]);
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("partial_charges ["));

    let h2 = config("[molecule]\natoms = \"H 0 0 0\\nH 0 0 1.4\"\n", dir.path());
    let r = cmd_hf(&h2, &mut Vec::new()).unwrap();
    assert_eq!(r.assignment.per_atom_electrons, vec![1, 1]);
    assert!((r.scf.total_energy - -1.1253243671827482).abs() < 1e-6);
}

#[test]
fn train_writes_artifacts_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_train(&config(H_ATOM, a.path()), &mut Vec::new()).unwrap();
    cmd_train(&config(H_ATOM, b.path()), &mut Vec::new()).unwrap();
    assert_eq!(ra.trace.len(), 25);
    for name in ["trace.csv", "summary.csv", "checkpoint.bin"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
    let trace = std::fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("# vmc "));
    assert!(trace.contains("# seed 11\n# config_sha256 "));
    assert!(trace.contains("iter,energy_mean,energy_stderr,accept_rate,pretrain_loss,wall_ms\n"));
}

#[test]
fn effective_config_reproduces_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_train(&config(H_ATOM, a.path()), &mut Vec::new()).unwrap();
    let dumped = std::fs::read_to_string(a.path().join("effective_config.toml")).unwrap();
    let again = config(&dumped, b.path());
    cmd_train(&again, &mut Vec::new()).unwrap();
    assert_eq!(
        std::fs::read(a.path().join("trace.csv")).unwrap(),
        std::fs::read(b.path().join("trace.csv")).unwrap()
    );
}

#[test]
fn zero_iterations_reports_pretrained_energy() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(H_ATOM, dir.path());
    c.train.train_iterations = 0;
    c.train.eval_sweeps = 5;
    let r = cmd_train(&c, &mut Vec::new()).unwrap();
    assert_eq!(r.trace.len(), 5);
    assert!(r.trace.records.iter().all(|x| x.energy_mean.is_none()));
    assert!(r.energy.mean.is_finite() && r.energy.n_samples == 5);
}

#[test]
fn scan_rows_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[molecule]\natoms = \"H 0 0 0\\nH 0 0 1.4\"\n[sampler]\nburn_in_steps = 10\n[train]\npretrain_epochs = 2\ntrain_iterations = 3\nfinal_window = 3\n[scan]\ndistances = [2.0, 1.0, 1.4]\n";
    let points = cmd_scan(&config(text, dir.path()), &mut Vec::new()).unwrap();
    let d: Vec<f64> = points.iter().map(|p| p.distance).collect();
    assert_eq!(d, vec![1.0, 1.4, 2.0]);
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "distance_bohr,energy,stderr");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("1,") && rows[2].starts_with("1.4,") && rows[3].starts_with("2,"));

    let lih = "[molecule]\natoms = \"H 0 0 0\"\n[scan]\ndistances = [1.0]\n";
    assert!(cmd_scan(&config(lih, dir.path()), &mut Vec::new()).is_err());
}

#[test]
fn ip_of_identical_configs_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(H_ATOM, dir.path());
    let r = cmd_ip(&c, &c, &mut Vec::new()).unwrap();
    assert_eq!(r.ip, 0.0);
    assert_eq!(r.hf_ip, 0.0);
    let mut cation = c.clone();
    cation.molecule.charge = 2;
    assert!(cmd_ip(&c, &cation, &mut Vec::new()).is_err());
}

#[test]
fn shipped_configs_parse() {
    for name in ["h_atom.toml", "h2_scan.toml", "lih.toml", "lih_cation.toml"] {
        let c = RunConfig::load(&configs_dir().join(name)).unwrap();
        c.molecule().unwrap();
    }
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_vmc");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(bin)
        .args(["hf", "--config"])
        .arg(configs_dir().join("lih_cation.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("electron_assignment [2, 1]"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "[molecule]\natoms = \"H 0 0 0\"\n[train]\nlearning_rat = 1\n",
    )
    .unwrap();
    let status = Command::new(bin)
        .args(["train", "--config"])
        .arg(&bad)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));
    let status = Command::new(bin)
        .args(["frobnicate"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));

    let numerical = anyhow::Error::from(vmc_core::Error::ScfNotConverged {
        iterations: 200,
        delta_energy: 1.0,
        delta_density: 1.0,
    });
    assert_eq!(exit_code(&numerical), 2);
    assert_eq!(exit_code(&anyhow::anyhow!("bad input")), 1);
}
