//! `tdrl`: train, verify-theory, compare, export.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tdrl_core::harness::{self, RunConfig};

#[derive(Parser)]
#[command(name = "tdrl", version, about = "Test-driven reinforcement learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy from a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory. Defaults to $TDRL_OUT/<config stem>-seed<N>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the improvement guarantees by exact enumeration on random chains.
    VerifyTheory {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory. Defaults to $TDRL_OUT/verify.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Roll out a trained policy and report per-test results.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory holding checkpoints/final. Defaults as for `train`.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Print a run's training curves.
    Export {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Csv,
}

fn load_config(path: &Path, seed: Option<u64>) -> tdrl_core::Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> tdrl_core::Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let run_config = load_config(&config, seed)?;
            let dir = out.unwrap_or_else(|| harness::default_run_dir(&config, run_config.seed));
            let summary = harness::train(run_config, &dir)?;
            println!(
                "trained {} iterations ({} episodes) in {:.1}s -> {}",
                summary.iterations,
                summary.episodes,
                summary.wall_seconds,
                summary.run_dir.display()
            );
            print!("{}", summary.eval.render());
        }
        Command::VerifyTheory { instances, seed, out } => {
            let dir = out.unwrap_or_else(|| harness::default_out_root().join("verify"));
            let (report, path) = harness::verify(instances, seed, &dir)?;
            print!("{}", harness::render_verify(&report));
            println!("verdict: {}", path.display());
        }
        Command::Compare {
            config,
            episodes,
            seed,
            run,
        } => {
            let run_config = load_config(&config, seed)?;
            let dir = run.unwrap_or_else(|| harness::default_run_dir(&config, run_config.seed));
            print!("{}", harness::compare(&run_config, &dir, episodes)?.render());
        }
        Command::Export { run, format } => match format {
            ExportFormat::Csv => print!("{}", harness::export_csv(&run)?),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
