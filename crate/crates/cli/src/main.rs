use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slang_interp_cli::commands::{cmd_eval_mrr, cmd_eval_mt, cmd_preprocess, cmd_rerank, cmd_train};
use slang_interp_cli::synth::{cmd_synth, Preset};
use slang_interp_cli::{CliError, CliResult, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "slang-interp", version, about = "Slang interpretation by semantic reranking")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Score with the query word's own prototype only.
    #[arg(long, global = true)]
    no_cf: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter and split the gloss data.
    Preprocess,
    /// Train the contrastive sense encoder.
    Train,
    /// Rerank candidate interpretations.
    Rerank,
    /// Multiple-choice MRR evaluation.
    EvalMrr,
    /// Best-of-top-n translation curves.
    EvalMt,
    /// Write a synthetic corpus and run config into --out.
    Synth {
        #[arg(long, value_enum, default_value = "planted")]
        preset: Preset,
    },
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    config.apply(&Overrides {
        seed: cli.seed,
        out_dir: cli.out.clone(),
        no_cf: cli.no_cf,
    });
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth { preset } => {
            let dir = cli
                .out
                .as_ref()
                .ok_or_else(|| CliError::Config("synth needs --out".into()))?;
            cmd_synth(*preset, cli.seed.unwrap_or(0), dir)
        }
        Command::Preprocess => cmd_preprocess(&load(cli)?).map(|r| print_json(&r)),
        Command::Train => cmd_train(&load(cli)?).map(|r| print!("{}", r.to_tsv())),
        Command::Rerank => cmd_rerank(&load(cli)?).map(|r| print_json(&r)),
        Command::EvalMrr => cmd_eval_mrr(&load(cli)?).map(|r| print_json(&r.systems)),
        Command::EvalMt => cmd_eval_mt(&load(cli)?).map(|r| {
            for (metric, c) in &r.metrics {
                println!(
                    "{metric}\tbaseline={}\treranked={}",
                    c.baseline.aggregate, c.reranked.aggregate
                );
            }
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
