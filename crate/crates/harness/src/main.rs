use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use ratcon_harness::config::ExperimentConfig;
use ratcon_harness::{acceptance, commands, exit, report, HarnessError};

/// Environment variable read when `--threads` is not given.
const THREADS_ENV: &str = "RATCON_THREADS";

#[derive(Parser)]
#[command(name = "ratcon", version, about = "Ratio-consensus experiments over random nonnegative matrix products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (default: RATCON_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Consensus trajectory with fitted rates.
    Simulate(RunArgs),
    /// Lyapunov spectrum, wedge estimate and determinant identity.
    Spectrum(RunArgs),
    /// Spectral gap from the frame method and the Birkhoff sweep.
    Gap(RunArgs),
    /// Family primitivity and forward/backward index laws.
    Primitivity(RunArgs),
    /// Re-checks every file of an output directory against its manifest.
    Verify {
        /// Output directory holding `manifest.json`.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Runs the acceptance suite and prints a pass/fail table.
    Acceptance {
        /// Criteria to run (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        /// Also write the outcomes as JSON into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    let env = std::env::var(THREADS_ENV).ok();
    let n = match (threads, env) {
        (Some(n), _) => Some(n),
        (None, Some(s)) => Some(s.trim().parse().with_context(|| format!("{THREADS_ENV}={s} is not a count"))?),
        (None, None) => None,
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    Ok(())
}

fn run_experiment(kind: &Command, args: &RunArgs) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    log::info!("loaded {}", args.config.display());
    let bundle = match kind {
        Command::Simulate(_) => commands::simulate(&cfg)?,
        Command::Spectrum(_) => commands::spectrum(&cfg)?,
        Command::Gap(_) => commands::gap(&cfg)?,
        Command::Primitivity(_) => commands::primitivity(&cfg)?,
        Command::Acceptance { .. } | Command::Verify { .. } => unreachable!("handled separately"),
    };
    let manifest = bundle.write(&args.out)?;
    // a closed stdout (e.g. piping into `head`) is not an error
    let _ =
        writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&bundle.summary).expect("summary serializes"));
    log::info!("wrote {} files to {}", manifest.files.len() + 1, args.out.display());
    Ok(())
}

fn run_acceptance(only: &[usize], out: Option<&PathBuf>) -> Result<(), HarnessError> {
    let ids: Vec<usize> = if only.is_empty() { (1..=acceptance::CRITERIA.len()).collect() } else { only.to_vec() };
    let mut outcomes = Vec::new();
    for id in ids {
        let o = acceptance::run(id);
        println!("{}", o.line());
        outcomes.push(o);
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(&outcomes).expect("outcomes serialize") + "\n";
        std::fs::write(dir.join("acceptance.json"), text)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Acceptance(format!("criteria {failed:?} failed")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e:#}");
        return ExitCode::from(exit::CONFIG as u8);
    }
    let result = match &cli.command {
        Command::Acceptance { only, out } => run_acceptance(only, out.as_ref()),
        Command::Verify { out } => report::verify_manifest(out).map(|m| {
            println!("{}: {} files match manifest.json", out.display(), m.files.len());
        }),
        Command::Simulate(a) | Command::Spectrum(a) | Command::Gap(a) | Command::Primitivity(a) => {
            run_experiment(&cli.command, a)
        }
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
