//! `hamlearn`: dataset generation, thermality diagnosis and Hamiltonian
//! reconstruction for periodic spin-1/2 chains.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub const VERSION: &str = env!("HAMLEARN_VERSION");

/// Exit code 2 for configuration and input errors, 1 for everything else.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<hamlearn::Error> for Failure {
    fn from(e: hamlearn::Error) -> Self {
        use hamlearn::Error as E;
        match e {
            E::Numerical(_) | E::NonHermitian { .. } | E::Io(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "hamlearn", version = VERSION, about = "Hamiltonian reconstruction from thermal local measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; keys override the preset defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// local, fig2, fig3, fig4-floquet or fig4-rmd.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Threads for dense linear algebra.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the protocol and write a normalized dataset.
    Generate,
    /// Bottleneck sweep, intrinsic dimension and latent coordinates.
    Autoencode {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Iterative reconstruction from a dataset and its embedding.
    Reconstruct {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        embedding: PathBuf,
    },
    /// Second-order effective Hamiltonian of the prethermal drive.
    Bch,
    /// Support-weight growth and energy absorption under a heating drive.
    HeatingProfile,
    /// Domain-wall dynamics (static) or stroboscopic energy (driven).
    Evolve {
        /// Fit report whose Hamiltonian is evolved next to the exact one.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Autoencode { .. } => "autoencode",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Bch => "bch",
            Command::HeatingProfile => "heating-profile",
            Command::Evolve { .. } => "evolve",
        }
    }
}

fn prepare(cli: &Cli) -> Result<(config::RunConfig, PathBuf), Failure> {
    let text = match &cli.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut cfg = config::resolve(text.as_deref(), cli.preset.as_deref(), cli.seed, cli.threads)?;
    let out = cli.out.clone().or_else(|| cfg.out.take()).unwrap_or_else(|| Path::new("hamlearn-out").join(cli.command.name()));
    cfg.out = None;
    fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    fs::write(out.join("config.toml"), cfg.to_toml()).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(out.join("VERSION"), format!("{VERSION}\n")).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok((cfg, out))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (cfg, out) = prepare(cli)?;
    faer::set_global_parallelism(if cfg.threads > 1 { faer::Par::rayon(cfg.threads) } else { faer::Par::Seq });
    match &cli.command {
        Command::Generate => commands::generate(&cfg, &out),
        Command::Autoencode { dataset } => commands::autoencode(&cfg, &out, dataset),
        Command::Reconstruct { dataset, embedding } => commands::reconstruct(&cfg, &out, dataset, embedding),
        Command::Bch => commands::bch(&cfg, &out),
        Command::HeatingProfile => commands::heating_profile(&cfg, &out),
        Command::Evolve { report } => commands::evolve(&cfg, &out, report.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Failure::Config(_) => 2,
                Failure::Runtime(_) => 1,
            })
        }
    }
}
