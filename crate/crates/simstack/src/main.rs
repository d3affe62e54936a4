use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use simstack::harness::{
    read_csv, render_summary, run_experiment, summarize, write_csv, ExperimentConfig,
};
use simstack::propagation::RngSeed;

#[derive(Parser)]
#[command(
    name = "simstack",
    version,
    about = "Stacked-metasurface channel simulator and optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file and write CSV records.
    Run {
        /// Path to a key = value config document.
        config: PathBuf,
        /// Override the number of trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the CSV output path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Aggregate an existing CSV into a per-(architecture, N, L) table.
    Summarize {
        /// Path to a CSV produced by `run`.
        csv: PathBuf,
    },
    /// Parse and validate a config file without running anything.
    Validate {
        /// Path to a key = value config document.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<(), Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            output,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(trials) = trials {
                cfg.trials = trials;
            }
            if let Some(seed) = seed {
                cfg.master_seed = RngSeed(seed);
            }
            if let Some(output) = output {
                cfg.output_path = output;
            }
            cfg.validate()?;
            let records = run_experiment(&cfg)?;
            let csv = write_csv(&records);
            if let Some(parent) = cfg.output_path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(&cfg.output_path, &csv)?;
            println!(
                "{} records written to {}",
                records.len(),
                cfg.output_path.display()
            );
            print!("{}", render_summary(&summarize(&records)?));
        }
        Command::Summarize { csv } => {
            let text = std::fs::read_to_string(&csv)?;
            let records = read_csv(&text)?;
            print!("{}", render_summary(&summarize(&records)?));
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dris_points = cfg.ny_values.len() * cfg.l_values.len();
            println!("configuration OK");
            println!(
                "  frequency {:.3} GHz, nx = {}, N in {:?}",
                cfg.frequency_hz / 1e9,
                cfg.nx,
                cfg.ny_values.iter().map(|ny| cfg.nx * ny).collect::<Vec<_>>()
            );
            println!(
                "  {} architecture(s), {} diagonal-layer sweep points, {} trials each",
                cfg.architectures.len(),
                dris_points,
                cfg.trials
            );
            println!("  output -> {}", cfg.output_path.display());
        }
    }
    Ok(())
}
