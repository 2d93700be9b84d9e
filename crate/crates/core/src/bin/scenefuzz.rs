//! Command-line front end; all logic lives in `scenefuzz::campaign`.

use clap::{Parser, Subcommand};
use scenefuzz::campaign::{cmd_fuzz, cmd_replay, cmd_report, cmd_seeds, CliError, FitnessKind, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "scenefuzz", version, about = "Fuzz driving scenes and grade the perception under test")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a fuzzing campaign.
    Fuzz {
        #[arg(long)]
        config: PathBuf,
        /// Campaign directory; defaults to the config's `out`, then to
        /// `$SCENEFUZZ_OUT/<config name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        fitness: Option<FitnessKind>,
        /// Round length in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Replace an existing campaign directory.
        #[arg(long)]
        force: bool,
    },
    /// Print the per-frame table and verdict of a trace.
    Replay {
        trace: PathBuf,
        /// First frame to show.
        #[arg(long)]
        from: Option<u32>,
        /// Last frame to show.
        #[arg(long)]
        to: Option<u32>,
    },
    /// Write plot-ready CSVs for a finished campaign.
    Report { campaign: PathBuf },
    /// Write one-obstacle seed scenarios.
    Seeds {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        force: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fuzz { config, out, rounds, seed, fitness, duration, force } => {
            let over = Overrides { rounds, seed, fitness, duration, out, force };
            let (dir, m) = cmd_fuzz(&config, &over)?;
            println!(
                "{}: {} rounds, {} accepted, {} rejected, {} errors, {} neurons covered",
                dir.display(),
                m.counts.rounds_run,
                m.counts.accepted,
                m.counts.rejected,
                m.counts.errors,
                m.coverage
            );
        }
        Command::Replay { trace, from, to } => {
            let range = (from.is_some() || to.is_some()).then(|| (from.unwrap_or(0), to.unwrap_or(u32::MAX)));
            print!("{}", cmd_replay(&trace, range)?);
        }
        Command::Report { campaign } => {
            let n = cmd_report(&campaign)?;
            println!("{n} rounds reported in {}", campaign.join("report").display());
        }
        Command::Seeds { out, count, seed, force } => {
            for p in cmd_seeds(&out, count, seed, force)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scenefuzz: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
