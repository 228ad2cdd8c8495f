use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optifp::bench::{emit_plot, run_experiment, seed_csvs_in, write_outputs, ExperimentConfig};
use optifp::envs::chain_env;
use optifp::Error;

/// Optimistic fictitious-play experiments on tabular zero-sum Markov games.
#[derive(Debug, Parser)]
#[command(name = "optifp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every seed of an experiment and write per-seed CSVs plus summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot the seed-averaged value curve of a run directory as SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Built-in environments.
    Env {
        #[command(subcommand)]
        command: EnvCommand,
    },
}

#[derive(Debug, Subcommand)]
enum EnvCommand {
    /// Print the 7-state chain as a game-spec JSON document.
    DumpChain,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> optifp::Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
            let outcome = run_experiment(&cfg)?;
            write_outputs(&outcome, &dir)?;
            if let Some(last) = outcome.summary.last() {
                println!(
                    "{} seeds x {} episodes -> {}: mean value {:.6}, regret1 {:.4}, regret2 {:.4}, gap/K {:.6}",
                    last.seeds,
                    last.episode,
                    dir.display(),
                    last.v_exact,
                    last.regret1_partial,
                    last.regret2_partial,
                    last.gap_per_episode
                );
            }
            Ok(())
        }
        Command::Plot { input, out } => {
            let paths = seed_csvs_in(&input)?;
            emit_plot(&paths, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Env {
            command: EnvCommand::DumpChain,
        } => {
            println!("{}", serde_json::to_string_pretty(&chain_env().to_spec())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
