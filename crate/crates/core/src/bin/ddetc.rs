use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddetc::config::ScenarioConfig;
use ddetc::experiment::{batch, batch_table, load_config_dir, run_scenario};
use ddetc::hybrid::RunStatus;
use ddetc::suites::{reference_runs, run_suite, SUITES};
use ddetc::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_BREAKDOWN: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "ddetc", version, about = "Data-driven event-triggered control of unknown LTV plants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `run.output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every `*.cfg` of a directory and print one summary row per run.
    Batch {
        #[arg(long)]
        config_dir: PathBuf,
        /// Per-run artifacts go to `<out>/<name>/`, the table to `<out>/summary.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a property suite over the reference scenarios.
    Verify {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
    },
}

fn config_error(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn simulate(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match ScenarioConfig::from_file(&config) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if let Some(s) = seed {
        cfg.engine.seed = s;
    }
    let outcome = match run_scenario(&cfg, out.as_deref()) {
        Ok(o) => o,
        Err(e @ (Error::Config(_) | Error::InvalidInput(_))) => return config_error(e),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    print!("{}", outcome.summary.to_text());
    for a in &outcome.artifacts {
        println!("wrote {}", a.display());
    }
    if outcome.summary.solver_breakdowns > 0 {
        eprintln!("error: {} synthesis attempts ended in a solver breakdown", outcome.summary.solver_breakdowns);
        return ExitCode::from(EXIT_BREAKDOWN);
    }
    if outcome.summary.status == RunStatus::Diverged {
        return ExitCode::from(EXIT_DIVERGED);
    }
    ExitCode::SUCCESS
}

fn run_batch(dir: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let configs = match load_config_dir(&dir) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let rows = batch(&configs, out.as_deref());
    let table = batch_table(&rows);
    print!("{table}");
    if let Some(o) = out {
        if let Err(e) = std::fs::create_dir_all(&o).and_then(|_| std::fs::write(o.join("summary.csv"), &table)) {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let breakdown = rows.iter().any(|r| r.outcome.as_ref().is_ok_and(|s| s.solver_breakdowns > 0));
    if breakdown {
        ExitCode::from(EXIT_BREAKDOWN)
    } else {
        ExitCode::SUCCESS
    }
}

fn verify(suite: &str) -> ExitCode {
    let report = reference_runs().and_then(|runs| run_suite(suite, &runs));
    match report {
        Ok(r) => {
            print!("{}", r.to_text());
            if r.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(config, seed, out),
        Command::Batch { config_dir, out } => run_batch(config_dir, out),
        Command::Verify { suite } => verify(&suite),
    }
}
