//! Command-line front end for `dopseq`: run the optimizers and baselines
//! from a JSON config, export ambiguity and spectrum data, and tabulate
//! metrics across sequences.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_analyze, cmd_compare, cmd_design, RunSummary};
pub use config::RunConfig;
pub use error::{CliError, Result};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "DOPPLER_SEQ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dopseq", version, about = "Doppler-resilient sequence design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a sequence and write sequence.csv, trace.csv and summary.json.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export af.csv, esd.csv and feasibility.json for a sequence file.
    Analyze {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the directory holding `--seq`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Rescale to energy N instead of rejecting the file.
        #[arg(long)]
        renormalize: bool,
    },
    /// Print a metrics table for several sequence files.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        seqs: Vec<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Sizes the global rayon pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // Fails only if the pool already exists, which leaves it usable.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Executes one parsed command and returns the text for stdout.
pub fn run(cli: Cli) -> Result<String> {
    configure_threads()?;
    match cli.command {
        Command::Design { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let s = cmd_design(&cfg, out.as_deref())?;
            Ok(format!(
                "{} ({}): WPSL {} dB, PAPR {}, {} iterations\nwrote {}\n",
                s.algorithm,
                s.status,
                s.wpsl_db.map_or("n/a".into(), |v| format!("{v:.3}")),
                s.papr.map_or("n/a".into(), |v| format!("{v:.3}")),
                s.iterations,
                s.files.summary.display()
            ))
        }
        Command::Analyze {
            seq,
            config,
            out,
            renormalize,
        } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| seq.parent().map(PathBuf::from).unwrap_or_default());
            let res = cmd_analyze(&seq, &cfg, &dir, renormalize)?;
            Ok(format!(
                "WPSL {:.3} dB, feasible: {}\nwrote {}, {}, {}\n",
                res.summary.report.wpsl_db,
                res.summary.feasible,
                res.af.display(),
                res.esd.display(),
                res.feasibility.display()
            ))
        }
        Command::Compare { seqs, config, out } => {
            let cfg = RunConfig::load(&config)?;
            let table = cmd_compare(&seqs, &cfg)?;
            if let Some(path) = out {
                std::fs::write(path, &table)?;
            }
            Ok(table)
        }
    }
}
