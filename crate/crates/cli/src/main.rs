use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use vmc_cli::{cmd_hf, cmd_ip, cmd_scan, cmd_train, exit_code, RunConfig};

#[derive(Parser)]
#[command(
    name = "vmc",
    version,
    about = "Neural-network variational Monte Carlo for small molecules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML). `ip` takes two: neutral, then cation.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Hartree–Fock energy, Mulliken charges and electron assignment.
    Hf(Common),
    /// Pretrain and train the ansatz.
    Train(Common),
    /// Train a diatomic at several bond lengths.
    Scan(Common),
    /// Ionization potential from a neutral and a cation run.
    Ip(Common),
}

fn load(common: &Common) -> Result<Vec<RunConfig>> {
    common
        .configs
        .iter()
        .map(|p| {
            let mut c = RunConfig::load(p)?;
            if let Some(s) = common.seed {
                c.seed = s;
            }
            if let Some(o) = &common.out {
                c.output.dir = o.clone();
            }
            Ok(c)
        })
        .collect()
}

fn one(common: &Common) -> Result<RunConfig> {
    let mut v = load(common)?;
    if v.len() != 1 {
        bail!("expected a single --config");
    }
    Ok(v.remove(0))
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Hf(c) => {
            cmd_hf(&one(&c)?, &mut out)?;
        }
        Command::Train(c) => {
            cmd_train(&one(&c)?, &mut out)?;
        }
        Command::Scan(c) => {
            for p in cmd_scan(&one(&c)?, &mut out)? {
                writeln!(
                    out,
                    "{} {:.6} {:.6}",
                    p.distance, p.energy.mean, p.energy.std_error
                )?;
            }
        }
        Command::Ip(c) => {
            let v = load(&c)?;
            if v.len() != 2 {
                bail!("ip needs two --config arguments: neutral, then cation");
            }
            cmd_ip(&v[0], &v[1], &mut out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
