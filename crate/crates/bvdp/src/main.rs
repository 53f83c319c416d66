use std::path::PathBuf;
use std::process::ExitCode;

use bvdp::{check, run_single, run_sweep, Overrides, RunConfig, RunError, Status};
use clap::{Args, Parser, Subcommand};

/// Viscous damage-plasticity runs and their balanced-viscosity diagnostics.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one viscosity and write its ledger.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Solve every viscosity of the sweep list and compare them.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Verify a ledger directory and re-run its diagnostics.
    Check {
        ledger_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides { eps: a.eps, tau: a.tau, out: a.out, workers: a.workers }
    }
}

fn load(path: &PathBuf, o: OverrideArgs) -> Result<RunConfig, RunError> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&o.into())?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<Status, RunError> {
    match cmd {
        Command::Run { config, overrides } => {
            let out = run_single(&load(&config, overrides)?)?;
            let m = &out.manifest;
            println!("{} {:?} hash {}", out.dir.display(), m.status, m.hash);
            for f in &m.failed_checks {
                println!("  {f}");
            }
            Ok(m.status)
        }
        Command::Sweep { config, overrides } => {
            let out = run_sweep(&load(&config, overrides)?)?;
            for m in &out.members {
                println!("{} {:?} hash {}", m.dir.display(), m.status(), m.manifest.hash);
            }
            if let Some(r) = &out.report {
                println!(
                    "decreasing differences at {} of {} points, S ratio {:.3}",
                    r.decreasing,
                    r.s.len(),
                    r.arclength_ratio
                );
            }
            Ok(out.status())
        }
        Command::Check { ledger_dir, workers } => {
            let out = check(&ledger_dir, workers)?;
            for p in &out.problems {
                println!("  {p}");
            }
            println!("{} {:?}", ledger_dir.display(), out.status);
            Ok(out.status)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
