use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gistress::report::{write_fixture, FixtureSpec, ReportError, RunConfig, RunOptions, Runner, StageOutcome};

#[derive(Parser)]
#[command(name = "gistress", version, about = "Growth-at-Risk and Growth-in-Stress from a two-level dynamic factor model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Subsampling seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Use the analytic factor covariance instead of subsampling.
    #[arg(long)]
    skip_subsampling: bool,
    /// Rerun stages even when their outputs are up to date.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the standardized panel from raw series.
    Ingest(RunArgs),
    /// Fit the factor model and factor covariances.
    Estimate(RunArgs),
    /// Quantile regressions, GaR, GiS and tables.
    Vulnerability(RunArgs),
    /// All stages in order.
    All(RunArgs),
    /// Write a synthetic series file and matching configuration.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 120)]
        quarters: usize,
        #[arg(long, default_value_t = 6)]
        per_block: usize,
    },
}

fn runner(args: &RunArgs) -> Result<Runner, ReportError> {
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| ReportError::Config(format!("thread pool: {e}")))?;
    }
    let config = RunConfig::load(&args.config)?;
    let opts = RunOptions { seed: args.seed, out: args.out.clone(), skip_subsampling: args.skip_subsampling, force: args.force };
    Runner::new(config, &opts)
}

fn report(outcomes: &[StageOutcome]) {
    for o in outcomes {
        let state = if o.skipped { "up to date" } else { "done" };
        println!("{}: {state} ({} files in {})", o.stage.name(), o.files.len(), o.dir.display());
    }
}

fn run(cli: Cli) -> Result<(), ReportError> {
    match cli.command {
        Command::Ingest(a) => report(&[runner(&a)?.ingest()?]),
        Command::Estimate(a) => report(&[runner(&a)?.estimate()?]),
        Command::Vulnerability(a) => report(&[runner(&a)?.vulnerability()?]),
        Command::All(a) => report(&runner(&a)?.all()?),
        Command::Simulate { out, seed, quarters, per_block } => {
            let spec = FixtureSpec { seed, quarters, per_block, ..FixtureSpec::default() };
            let path = write_fixture(&out, &spec)?;
            println!("fixture written; run with --config {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
