//! Command-line front end for the stable-weight network laboratory.
//!
//! Configuration precedence: built-in defaults, then the optional TOML file
//! given by `--config`, then `STABLELAB_*` environment variables, then the
//! explicit flags. Identical effective configuration (master seed included)
//! yields byte-identical result files regardless of worker count.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::InvalidInput;

const LONG_ABOUT: &str = "\
Simulation laboratory for shallow networks with heavy-tailed weight\n\
initialization: limiting output laws, limiting kernels, gradient-flow\n\
training, and sample-path renderings.\n\n\
Configuration is a single TOML document; every field has a default.\n\
Environment overrides use the STABLELAB_ prefix: STABLELAB_MASTER_SEED\n\
sets the master seed, STABLELAB_<SECTION>__<KEY> (double underscore)\n\
sets section fields, e.g. STABLELAB_TRAIN__WIDTH=8192. Flags take the\n\
final word.\n\n\
Exit codes: 0 all assertions passed, 1 an assertion failed, 2 invalid\n\
input or configuration.";

#[derive(Parser)]
#[command(name = "stablelab", version, about = "Heavy-tailed network limit laboratory", long_about = LONG_ABOUT)]
struct Cli {
    /// TOML configuration file (defaults apply when omitted)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed override
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory override
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker thread override (0 = all cores; never affects results)
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Print the effective configuration and exit without computing
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep rescaled network outputs against the limiting stable law
    LimitDist,
    /// Sweep kernels at initialization against the limiting kernel law
    NtkLimit,
    /// Run gradient-flow training batches with per-step certificates
    Train,
    /// Render bounded-activation sample surfaces over the unit square
    Paths,
    /// Select the kernel prefactor convention from finite-width data
    Calibrate,
}

fn run(cli: &Cli) -> Result<bool, InvalidInput> {
    let file_text = match &cli.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
            InvalidInput(format!("cannot read config file {}: {e}", path.display()))
        })?),
        None => None,
    };
    let cfg = config::load(
        file_text.as_deref(),
        std::env::vars(),
        cli.seed,
        cli.out.clone(),
        cli.workers,
    )?;

    if cli.dry_run {
        print!("{}", cfg.to_toml());
        eprintln!("dry-run: configuration is valid; nothing was computed.");
        return Ok(true);
    }

    match cli.command {
        Command::LimitDist => commands::cmd_limit_dist(&cfg),
        Command::NtkLimit => commands::cmd_ntk_limit(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Paths => commands::cmd_paths(&cfg),
        Command::Calibrate => commands::cmd_calibrate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
