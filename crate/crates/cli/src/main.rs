use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use swflow_cli::commands::parse_radii;
use swflow_cli::{cmd_check_grad, cmd_gauge_verify, cmd_run, cmd_scan, ScanOptions, Status};

const EXIT_CODES: &str = "\
Exit codes:
  0  completed / check passed
  1  configuration, IO or runtime error
  2  blow-up detected (curvature ceiling exceeded)
  3  time step rejected
  4  verification failed

Environment:
  SWFLOW_THREADS  cap on worker threads";

#[derive(Parser)]
#[command(name = "swflow", version, about = "Seiberg-Witten type gradient flows on flat tori", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write snapshots, diagnostics and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic gradients with finite differences for k = 0, 1, 2.
    CheckGrad {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, hide = true)]
        sabotage: bool,
    },
    /// Local curvature norms on shrinking balls for every snapshot of a run.
    Scan {
        /// Manifest written by `run`.
        manifest: PathBuf,
        /// Norm exponent; k + 2 by default.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Comma-separated, strictly descending.
        #[arg(long)]
        radii: Option<String>,
        /// CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the gauge-fixed and direct integrators and compare the end states.
    GaugeVerify {
        #[arg(long)]
        config: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("SWFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("SWFLOW_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        anyhow::bail!("SWFLOW_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Status> {
    configure_threads()?;
    let mut out = io::stdout().lock();
    let status = match cli.command {
        Command::Run { config, out: dir } => cmd_run(&config, &dir, &mut out)?,
        Command::CheckGrad { config, sabotage } => cmd_check_grad(&config, sabotage, &mut out)?,
        Command::Scan { manifest, p, epsilon, radii, out: csv } => {
            let radii = radii.as_deref().map(parse_radii).transpose()?;
            cmd_scan(&manifest, &ScanOptions { p, epsilon, radii, out: csv }, &mut out)?
        }
        Command::GaugeVerify { config } => cmd_gauge_verify(&config, &mut out)?,
    };
    out.flush()?;
    Ok(status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Error.code() as u8 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(s) => ExitCode::from(s.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Error.code() as u8)
        }
    }
}
