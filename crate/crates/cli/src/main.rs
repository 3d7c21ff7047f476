use std::path::PathBuf;
use std::process::ExitCode;

use action_shapley_cli::{commands, CliError, CliResult, Context, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "action-shapley", version, about = "Action Shapley training-data selection for model-based RL")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Base seed, overriding `seed` from the config.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Worker threads (default: logical cores).
    #[arg(long, global = true, value_name = "INT")]
    jobs: Option<usize>,

    /// Also score the agent trained on every point during validation.
    #[arg(long, global = true)]
    baseline: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Simulate one training series per grid configuration.
    Generate,
    /// Compute Action Shapley values for every training point.
    Shapley,
    /// Pick the best and worst training sets from the Shapley report.
    Select,
    /// Compare best, worst and random agents over seeded episodes.
    Validate,
    /// Collect the tables into a markdown report.
    Report,
    /// Print the effective configuration.
    PrintConfig,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let ctx = Context::new(config, cli.out, cli.baseline)?;
    match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Shapley => commands::shapley(&ctx),
        Command::Select => commands::select(&ctx),
        Command::Validate => commands::run_validation(&ctx),
        Command::Report => commands::report(&ctx),
        Command::PrintConfig => {
            print!("{}", commands::print_config(&ctx.config));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
