//! Command-line front end: run experiments and oracle suites.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaymatch::harness::{run_experiment, write_outputs, ExperimentConfig, Policy};
use relaymatch::verify::{run_suite, Suite};
use relaymatch::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "relaymatch", version, about = "Learning stable CU/D2D relay pairings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write `<policy>.csv` plus a manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// ebriq, epsilon_greedy, random, noncoop or gs_oracle.
        #[arg(long, value_parser = parse_policy)]
        policy: Option<Policy>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        periods: Option<u64>,
    },
    /// Run an oracle suite; exits with status 3 on any failure.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn simulate(
    config: PathBuf,
    out: PathBuf,
    policy: Option<Policy>,
    seed: Option<u64>,
    replications: Option<usize>,
    periods: Option<u64>,
) -> Result<PathBuf, Error> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(p) = policy {
        cfg.experiment.policy = p;
    }
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    if let Some(r) = replications {
        cfg.experiment.num_replications = r;
    }
    if let Some(t) = periods {
        cfg.learning.horizon = t;
    }
    cfg.validate()?;
    let result = run_experiment(&cfg)?;
    write_outputs(&result, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            out,
            policy,
            seed,
            replications,
            periods,
        } => match simulate(config, out, policy, seed, replications, periods) {
            Ok(path) => {
                println!("wrote {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
        Command::Verify { suite, seed } => match run_suite(suite, seed) {
            Ok(report) => {
                println!("{report}");
                if report.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_VERIFY)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_VERIFY)
            }
        },
    }
}
