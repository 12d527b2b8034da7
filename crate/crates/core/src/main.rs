use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cep_sim::harness::figures::{histogram_proper_size, write_figure, Profile, DEFAULT_SEED};
use cep_sim::harness::{
    run_experiment_with_threads, run_histogram_experiment, write_histogram, write_results, ExperimentConfig,
};
use cep_sim::model::ModelSpec;
use cep_sim::selftest::run_selftest;
use cep_sim::Error;

#[derive(Parser)]
#[command(name = "cep-sim", version, about = "Simulate conformal and Bayesian e-predictors and measure their quality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config and write its CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the config's training size and iteration count.
        #[arg(long, value_enum)]
        profile: Option<Profile>,
    },
    /// Write the CSVs behind one figure (1-8 sweeps, 9 the e-value histogram).
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=9))]
        figure: u8,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Single-dataset RICEP e-values of the least likely label.
    Histogram {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Profile::Paper)]
        profile: Profile,
    },
    /// Run the oracle, equivalence and validity checks.
    Selftest {
        /// Simulations per predictor in the validity checks.
        #[arg(long, default_value_t = 100_000)]
        simulations: usize,
    },
}

fn exit_code(err: &Error) -> ExitCode {
    match err {
        Error::InvalidConfig(_) | Error::ConfigParse(_) | Error::InvalidArgument(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run { config, out, threads, profile } => {
            let text = std::fs::read_to_string(&config).map_err(|source| Error::Io { path: config.clone(), source })?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if let Some(p) = profile {
                cfg.training_size = p.training_size();
                cfg.iterations = p.iterations();
            }
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let records = run_experiment_with_threads(&cfg, threads)?;
            write_results(&records, &out)?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Figure { figure, out_dir, profile, seed } => {
            for path in write_figure(figure, profile, seed, &out_dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Histogram { out, seed, profile } => {
            let l = profile.training_size();
            let outcome =
                run_histogram_experiment(l, 10, ModelSpec::JEFFREYS, histogram_proper_size(profile), 1000, seed)?;
            write_histogram(&outcome, &out)?;
            eprintln!(
                "label {} (theta {:.3e}): mean e-value {:.6}",
                outcome.target_label + 1,
                outcome.theta.probs()[outcome.target_label],
                outcome.mean_e
            );
        }
        Command::Selftest { simulations } => {
            let checks = run_selftest(simulations);
            for check in &checks {
                println!("{check}");
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    run(cli.command).unwrap_or_else(|err| {
        eprintln!("error: {err}");
        exit_code(&err)
    })
}
