use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use risk_sieve::baselines::BaselineVerdict;
use risk_sieve::config::FilterConfig;
use risk_sieve::pipeline::{run_pipeline, type_histograms, AGENTS_FILE};
use risk_sieve::report::{
    confusion_tables, read_jsonl, write_confusion_csv, write_histogram_csv, AgentRecord,
    SituationRecord,
};

#[derive(Parser)]
#[command(
    name = "risk-sieve",
    version,
    about = "Risk-based filtering of driving scenario datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a directory of interchange files.
    Run {
        #[arg(long)]
        input: PathBuf,
        /// key=value configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Confusion matrices of retrieved situations against baseline verdicts.
    Compare {
        /// Situation records written by `run`.
        #[arg(long)]
        risk: PathBuf,
        /// Baseline verdict records written by `run`.
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Road-user type histograms of retrieved situations.
    Stats {
        #[arg(long)]
        situations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Agent records; defaults to agents.jsonl next to the situations file.
        #[arg(long)]
        agents: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            input,
            config,
            output,
            workers,
        } => {
            let config = match config {
                Some(path) => FilterConfig::from_file(&path)
                    .with_context(|| format!("loading config {}", path.display()))?,
                None => FilterConfig::default(),
            };
            let summary = run_pipeline(&input, &config, &output, workers)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Compare {
            risk,
            baseline,
            out,
        } => {
            let situations: Vec<SituationRecord> = read_jsonl(&risk)?;
            let baselines: Vec<BaselineVerdict> = read_jsonl(&baseline)?;
            let tables = confusion_tables(&situations, &baselines)?;
            write_confusion_csv(&out, &tables)?;
        }
        Command::Stats {
            situations,
            out,
            agents,
        } => {
            let agents_path = agents.unwrap_or_else(|| {
                situations
                    .parent()
                    .map(|d| d.join(AGENTS_FILE))
                    .unwrap_or_else(|| PathBuf::from(AGENTS_FILE))
            });
            let records: Vec<SituationRecord> = read_jsonl(&situations)?;
            let agents: Vec<AgentRecord> = read_jsonl(&agents_path)
                .with_context(|| format!("reading agent types from {}", agents_path.display()))?;
            let (first, second) = type_histograms(&records, &agents)?;
            write_histogram_csv(&out, &[(1, &first), (2, &second)])?;
        }
    }
    Ok(())
}
