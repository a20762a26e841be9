use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use synthmetric::report::{
    default_config, ingest_external_synthetic, recompute_report, refit_weights, run_pipeline,
    RunConfig,
};
use synthmetric::rng::RngSeed;
use synthmetric::{Error, Result};

const SEED_ENV: &str = "SYNTHMETRIC_SEED";

#[derive(Parser)]
#[command(
    name = "synthmetric",
    version,
    about = "Benchmark synthetic tabular data: fidelity metrics, train-on-synthetic utility, and a fitted composite score"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a benchmark run (stock config unless --config is given)
    Run {
        /// JSON run config; omit for the built-in benchmark
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base seed; overrides the config and the SYNTHMETRIC_SEED env var
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; overrides the config's out_dir
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per CPU); results are identical either way
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Score an externally produced synthetic CSV inside an existing run
    Ingest {
        /// Run directory (the one containing manifest.json)
        #[arg(long)]
        run: PathBuf,
        /// Dataset id the synthetic data imitates
        #[arg(long)]
        real: String,
        /// Synthetic CSV with the same header as the real dataset
        #[arg(long)]
        syn: PathBuf,
        /// Generator id to file the results under
        #[arg(long = "as", value_name = "GENERATOR_ID")]
        as_id: String,
    },
    /// Recompute analysis tables and figures from the result tree
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Refit one dataset's composite weights, optionally with a different
    /// gap penalty, and rebuild the dependent tables
    FitWeights {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

fn load_config(path: &PathBuf) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::ConfigInvalid(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::ConfigInvalid(format!("bad config {}: {e}", path.display())))
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => {
            let v = raw.parse::<u64>().map_err(|_| {
                Error::ConfigInvalid(format!("{SEED_ENV}='{raw}' is not a valid u64 seed"))
            })?;
            Ok(Some(v))
        }
        Err(_) => Ok(None),
    }
}

fn cmd_run(
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    jobs: usize,
) -> Result<()> {
    let mut cfg = match &config {
        Some(path) => load_config(path)?,
        None => default_config(),
    };
    if let Some(s) = seed.or(seed_from_env()?) {
        cfg.seed = RngSeed(s);
    }
    if let Some(dir) = out {
        cfg.out_dir = dir;
    }
    let summary = run_pipeline(&cfg, jobs)?;
    println!("{}", summary.run_dir.display());
    println!(
        "run {} complete: {} tasks ok, {} failed",
        summary.run_id, summary.tasks_ok, summary.tasks_failed
    );
    if summary.tasks_failed > 0 {
        eprintln!("warning: {} task(s) failed; see manifest.json", summary.tasks_failed);
    }
    Ok(())
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out, jobs } => cmd_run(config, seed, out, jobs),
        Command::Ingest { run, real, syn, as_id } => {
            ingest_external_synthetic(&run, &real, &syn, &as_id)?;
            println!("ingested {} as generator '{}'", syn.display(), as_id);
            Ok(())
        }
        Command::Report { run } => {
            recompute_report(&run)?;
            println!("analysis recomputed under {}", run.display());
            Ok(())
        }
        Command::FitWeights { run, dataset, lambda } => {
            let result = refit_weights(&run, &dataset, lambda)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
