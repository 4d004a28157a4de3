//! Pipeline runner: one subcommand per stage plus `all`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 missing upstream
//! artifact, 4 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emorec_core::error::Error;
use emorec_core::pipeline::{run_dir, run_stage, Stage, StageReport};
use emorec_core::RunConfig;

#[derive(Parser)]
#[command(
    name = "emorec",
    about = "Simulate a short-video platform, label user emotions, discover causal drivers, and run hybrid engagement/recovery recommendation policies",
    version
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parent directory for run directories; overrides the config file.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Recompute stages even when their artifacts are current.
    #[arg(long, global = true)]
    force: bool,
    /// Reduced scale (50 users, 100 videos, 10 days) for quick checks.
    #[arg(long, global = true)]
    smoke: bool,
    /// Upper bound on worker threads. Stages currently run single-threaded
    /// for reproducibility; values above 1 are accepted and capped.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the catalog, the user population, and the daily journal.
    Simulate,
    /// Cluster user-days, map emotions, train the classifier.
    Label,
    /// Learn the causal DAG and extract per-target parent sets.
    Discover,
    /// Train the gradient-boosted watched/skipped scorer.
    TrainScorer,
    /// Train the Q-learning agent with the shaped reward.
    TrainAgent,
    /// Evaluate the hybrid policy against the scorer-only baseline.
    Evaluate,
    /// Run the paired-seed ablation grid.
    Ablate,
    /// Run every stage in order.
    All,
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(output) = &cli.output {
        cfg.output_dir = output.display().to_string();
    }
    if cli.smoke {
        cfg.apply_smoke();
    }
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stages_for(command: &Command) -> Vec<Stage> {
    match command {
        Command::Simulate => vec![Stage::Simulate],
        Command::Label => vec![Stage::Label],
        Command::Discover => vec![Stage::Discover],
        Command::TrainScorer => vec![Stage::TrainScorer],
        Command::TrainAgent => vec![Stage::TrainAgent],
        Command::Evaluate => vec![Stage::Evaluate],
        Command::Ablate => vec![Stage::Ablate],
        Command::All => Stage::ALL.to_vec(),
    }
}

fn print_report(report: &StageReport) {
    if report.skipped {
        println!("{:<13} up to date (skipped)", report.stage.name());
    } else {
        println!("{:<13} done in {} ms", report.stage.name(), report.millis);
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    println!(
        "run directory: {} (config {}, seed {})",
        run_dir(&cfg).display(),
        cfg.hash(),
        cfg.seed
    );
    for stage in stages_for(&cli.command) {
        let report = run_stage(&cfg, stage, cli.force)?;
        print_report(&report);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) => ExitCode::from(2),
                Error::MissingArtifact { .. } => ExitCode::from(3),
                _ => ExitCode::from(4),
            }
        }
    }
}
