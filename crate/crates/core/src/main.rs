use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hj_homog::expcli::{resolve_seed, run, ExperimentConfig, ExperimentKind, RunContext, SEED_ENV};
use hj_homog::{Error, Result};

/// Effective Hamiltonians of periodic Hamilton-Jacobi equations under bump perturbations.
#[derive(Parser, Debug)]
#[command(name = "hj-homog", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single effective constant, exact and grid methods side by side in d = 1.
    Hbar(Common),
    /// H̄_R over a list of periods with a log-log rate fit.
    PeriodicSweep(Common),
    /// H̄_η over a list of intensities: exact, Monte Carlo, ratio against the limit.
    RandomSweep(Common),
    /// Flow of the corrector: rotation number, occupational histogram, invariance.
    Weakkam(Common),
    /// Structure of the perturbed corrector χ_∞ and the pairing integral.
    ChiInfty(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` or `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed and the HJ_HOMOG_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Emit partial results with an error column instead of stopping at the first failure.
    #[arg(long)]
    keep_going: bool,
}

fn execute(kind: ExperimentKind, args: &Common) -> Result<PathBuf> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if config.experiment != kind {
        eprintln!(
            "note: config declares `{}`, running `{}`",
            config.experiment.as_str(),
            kind.as_str()
        );
        config.experiment = kind;
    }
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(config.seed, env.as_deref(), args.seed)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = RunContext {
        seed,
        keep_going: args.keep_going,
    };
    let report = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run(&config, &ctx))?,
        None => run(&config, &ctx)?,
    };
    report.write(&out)?;
    Ok(out.join(format!("{}.csv", kind.as_str())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Hbar(a) => (ExperimentKind::Hbar, a),
        Command::PeriodicSweep(a) => (ExperimentKind::PeriodicSweep, a),
        Command::RandomSweep(a) => (ExperimentKind::RandomSweep, a),
        Command::Weakkam(a) => (ExperimentKind::Weakkam, a),
        Command::ChiInfty(a) => (ExperimentKind::ChiInfty, a),
    };
    match execute(kind, args) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
