use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use redlab_cli::commands::{self, check_agreement, CliError, RunOptions, CACHE_ENV};
use redlab_cli::study_file::{parse_count, parse_study, StudyFile};

/// Orders of reduced points: criterion, prime scans and exact densities.
#[derive(Parser)]
#[command(name = "redlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide Finite / PositiveDensity for every target.
    Analyze(Common),
    /// Scan primes and write per-prime valuations.
    Scan(Common),
    /// Empirical densities and convergence series.
    Density(Common),
    /// Exact densities from the Kummer enumeration.
    Oracle(Common),
    /// Criterion, densities and oracle side by side.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Study file.
    #[arg(long)]
    study: PathBuf,
    /// Scan primes up to this bound (e.g. 10^7, 2e5).
    #[arg(long, value_parser = count)]
    bound: Option<u64>,
    /// Directory for CSV and JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated checkpoints for convergence series.
    #[arg(long, value_delimiter = ',', value_parser = count)]
    checkpoints: Option<Vec<u64>>,
    /// Seed for random point choice in group order computations.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

fn count(s: &str) -> Result<u64, String> {
    parse_count(s).ok_or_else(|| format!("invalid count `{s}`"))
}

fn load(path: &PathBuf) -> Result<StudyFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(parse_study(&text)?)
}

type Handler = fn(&StudyFile, &RunOptions) -> Result<commands::Outcome, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (&Common, Handler) = match &cli.command {
        Command::Analyze(c) => (c, commands::analyze),
        Command::Scan(c) => (c, commands::scan),
        Command::Density(c) => (c, commands::density),
        Command::Oracle(c) => (c, commands::oracle),
        Command::Report(c) => (c, commands::full_report),
    };
    let sf = load(&common.study)?;
    let opts = RunOptions {
        bound: common.bound,
        out: common.out.clone(),
        checkpoints: common.checkpoints.clone(),
        seed: common.seed,
        threads: common.threads,
        cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
    };
    let outcome = cmd(&sf, &opts)?;
    print!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    check_agreement(&outcome)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("redlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
