use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lumen_servo::harness::{
    generate_dataset, make_backend, recompute_run, run_centering, run_navigation, write_aggregate,
    write_outputs, ExperimentConfig, ExperimentOutput, HarnessError, Outcome,
};

/// Simulated endoscope visual servoing experiments.
#[derive(Parser)]
#[command(name = "lumen-servo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Centering trials on the straight path with insertion disabled.
    Centering {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides experiment.rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Navigation trials from the tube opening to the goal plane.
    Navigate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = ["A", "B", "C", "D"])]
        path: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Rendered frames and masks for training a segmentation model.
    Dataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recomputes metrics from the trajectory CSVs of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn load(
    config: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.experiment.rng_seed = s;
    }
    if trials.is_some() {
        cfg.experiment.n_trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_aggregate(rows: &[lumen_servo::harness::AggregateRow]) -> Result<(), HarnessError> {
    write_aggregate(std::io::stdout().lock(), rows)
}

fn finish_run(out: &ExperimentOutput, dir: &Path) -> Result<bool, HarnessError> {
    write_outputs(dir, out)?;
    for r in &out.results {
        let outcome = match &r.outcome {
            Outcome::Completed => "completed".to_string(),
            Outcome::Collided => "collided".to_string(),
            Outcome::Aborted(why) => format!("aborted ({why})"),
        };
        eprintln!("trial {:3}  seed {:20}  {outcome}", r.trial_id, r.seed);
    }
    print_aggregate(&out.aggregate)?;
    eprintln!("wrote {}", dir.display());
    Ok(!out.any_failed())
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Centering {
            config,
            seed,
            out,
            trials,
        } => {
            let cfg = load(&config, seed, trials)?;
            let mut backend = make_backend(&cfg)?;
            let result = run_centering(&cfg, backend.as_mut())?;
            finish_run(
                &result,
                &out.unwrap_or_else(|| cfg.experiment.output_dir.clone()),
            )
        }
        Command::Navigate {
            config,
            path,
            seed,
            out,
            trials,
        } => {
            let mut cfg = load(&config, seed, trials)?;
            cfg.experiment.path = path;
            let mut backend = make_backend(&cfg)?;
            let result = run_navigation(&cfg, backend.as_mut())?;
            finish_run(
                &result,
                &out.unwrap_or_else(|| cfg.experiment.output_dir.clone()),
            )
        }
        Command::Dataset {
            config,
            count,
            seed,
            out,
        } => {
            let cfg = load(&config, seed, None)?;
            let dir = out.unwrap_or_else(|| cfg.experiment.output_dir.clone());
            let entries = generate_dataset(&cfg, &dir, count)?;
            eprintln!("wrote {} samples to {}", entries.len(), dir.display());
            Ok(true)
        }
        Command::Report { input } => {
            let run = recompute_run(&input)?;
            for (record, log) in &run.trials {
                eprintln!(
                    "trial {:3}  {} samples  {:?}",
                    record.trial_id,
                    log.samples.len(),
                    record.outcome
                );
            }
            print_aggregate(&run.aggregate)?;
            Ok(run
                .trials
                .iter()
                .all(|(r, _)| r.outcome == Outcome::Completed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
