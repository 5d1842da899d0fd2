//! Config-driven experiment runner for the finite-difference boundary value
//! solver: single solves, refinement sweeps, norm-bound diagnostics,
//! assumption probes, and weak-forcing dependence experiments.

mod commands;
mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::commands::{cmd_bounds, cmd_converge, cmd_depend, cmd_list, cmd_probe, cmd_solve};
use crate::config::{CliError, ExperimentConfig, OutputFormat};

const AFTER_HELP: &str = "\
CONFIG DEFAULTS (JSON, all fields optional):
  {
    \"seed\": 42,
    \"problem\": {
      \"f_id\": \"linear\",
      \"g_params\": { \"g\": { \"affine\": { \"intercept\": 1.0, \"slope\": 1.0 } },
                    \"g1\": { \"bump\": { \"scale\": 4.0 } } },
      \"manufactured\": \"sin-pi\"        // or \"h_id\": \"sin-pi\" | \"bump\" | \"zero\"
    },
    \"sweep\": { \"n_list\": [16, 32, 64, 128, 256, 512] },
    \"solver\": { \"method\": \"hybrid\", \"tol_cert\": 1e-10, \"max_iterations\": 100000,
                \"initial_step\": 1.0, \"monotonicity_constant\": 1.0 },
    \"reference\": { \"kind\": \"manufactured\", \"n_ref\": 8192,
                   \"steps\": 100000, \"root_tol\": 1e-12 },
    \"dependence\": { \"amplitude\": 1.0, \"m_list\": [1, 2, 4, 8, 16, 32, 64], \"grid_n\": 2048 },
    \"probe\": { \"trials\": 10000, \"grid_n\": 32, \"radius\": 1.0,
               \"ranges\": { \"state\": [-5.0, 5.0], \"velocity\": [-50.0, 50.0] } },
    \"output\": { \"format\": \"csv\", \"path\": null }
  }
  `solve` runs at the last (finest) entry of sweep.n_list. A fine-grid
  reference requires n_ref >= 8 x that entry. `probe` always emits JSON.

EXIT CODES:
  0  success
  1  configuration or usage error
  2  solver non-convergence
  3  reference-oracle failure";

#[derive(Parser)]
#[command(
    name = "monobvp",
    version,
    about = "Finite-difference experiments for second-order two-point boundary value problems",
    after_help = AFTER_HELP
)]
struct Cli {
    /// JSON experiment config; omitted fields take the documented defaults
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Probe seed; overrides the config value
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also write the report to this file; overrides output.path
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Report format; overrides output.format
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem at the finest sweep size and print a summary
    Solve,
    /// Run the refinement sweep against the configured reference oracle
    Converge,
    /// Report norms, a-priori bounds, and inequality checks per sweep size
    Bounds,
    /// Sample the structural-assumption probes and report minima (JSON)
    Probe,
    /// Perturb the forcing with weak oscillations and report solution gaps
    Depend,
    /// List the registered nonlinearity and forcing ids
    List,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not usage errors
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let cfg = ExperimentConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let format = cli
        .format
        .or(cfg.output.format)
        .unwrap_or(OutputFormat::Csv);
    let (text, code) = match cli.command {
        Command::Solve => cmd_solve(&cfg, format)?,
        Command::Converge => cmd_converge(&cfg, format)?,
        Command::Bounds => cmd_bounds(&cfg, format)?,
        Command::Probe => cmd_probe(&cfg, seed)?,
        Command::Depend => cmd_depend(&cfg, format)?,
        Command::List => cmd_list(format)?,
    };
    print!("{text}");
    if let Some(path) = cli.out.as_ref().or(cfg.output.path.as_ref()) {
        fs::write(path, &text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(code as u8)
}
