use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use residual_screen::pipeline::{self, RunConfig, THREADS_ENV};
use residual_screen::{Error, ReachFraction, Result};

#[derive(Parser)]
#[command(
    version,
    about = "Daily RMSLE scoring and error-taxonomy screening of energy predictions"
)]
struct Cli {
    /// Worker thread cap. Results do not depend on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order.
    Run(StageArgs),
    /// Load and clean raw inputs, write the aligned panel.
    Ingest(StageArgs),
    /// Daily RMSLE, scaling and quartiles.
    Score(StageArgs),
    /// Label every scored building-day.
    Classify(StageArgs),
    /// Frequency and contribution breakdowns.
    Aggregate(StageArgs),
    /// Heat maps and the summary report.
    Render(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Replace the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    good_fit_max: Option<f64>,
    #[arg(long)]
    out_of_range_min: Option<f64>,
    /// `n/d` or a decimal such as `0.5`.
    #[arg(long)]
    reach_fraction: Option<ReachFraction>,
    #[arg(long)]
    window_days: Option<u32>,
    #[arg(long)]
    short_term_fraction: Option<f64>,
}

impl StageArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(p) = &self.output_dir {
            cfg.output_dir = p.clone();
        }
        let a = &mut cfg.analysis;
        if let Some(v) = self.good_fit_max {
            a.good_fit_max = v;
        }
        if let Some(v) = self.out_of_range_min {
            a.out_of_range_min = v;
        }
        if let Some(v) = self.reach_fraction {
            a.reach_fraction = v;
        }
        if let Some(v) = self.window_days {
            a.window_days = v;
        }
        if let Some(v) = self.short_term_fraction {
            a.short_term_fraction = v;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (stage, args) = match &cli.command {
        Command::Run(a) => (None, a),
        Command::Ingest(a) => (Some("ingest"), a),
        Command::Score(a) => (Some("score"), a),
        Command::Classify(a) => (Some("classify"), a),
        Command::Aggregate(a) => (Some("aggregate"), a),
        Command::Render(a) => (Some("render"), a),
    };
    let cfg = args.config()?;
    let manifest = pipeline::with_threads(cli.threads, || match stage {
        None => pipeline::run_pipeline(&cfg),
        Some(s) => pipeline::run_stage(s, &cfg),
    })??;
    log::info!(
        "{} outputs in {} (config {})",
        manifest.outputs.len(),
        cfg.output_dir.display(),
        &manifest.config_hash[..12]
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("residual-screen: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
