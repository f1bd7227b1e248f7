use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use signtok_core::config::{PipelineConfig, ANNOTATIONS};
use signtok_core::pipeline;

#[derive(Parser)]
#[command(name = "signtok", version, about = "Train and run the sign-to-text tokenization pipeline")]
struct Cli {
    /// JSON config file; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the default config as JSON on stdout (notes go to stderr) and exit.
    #[arg(long)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic train and test corpora.
    SynthData,
    /// Pretrain the character codebook and context model.
    PretrainVq,
    /// Log the repeated-run statistics of every training sequence.
    Preprocess,
    /// Select the word vocabulary by optimal transport.
    BuildVocab {
        /// Force the chosen vocabulary step instead of the automatic rule.
        #[arg(long)]
        override_r: Option<usize>,
    },
    /// Pretrain and freeze the toy text decoder.
    PretrainDecoder,
    /// Align sign token embeddings with the decoder's text embeddings.
    Align,
    /// Fine-tune the sign side against the frozen decoder.
    Finetune,
    /// Encode a feature file into sign tokens and a prompt payload.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Translate the test split and write report.json.
    Eval,
    /// Run every stage in order.
    RunAll,
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => {
            let mut cfg = PipelineConfig::default();
            cfg.apply_env_seed()?;
            Ok(cfg)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.print_defaults {
        print!("{}", PipelineConfig::default().to_json()?);
        for (key, note) in ANNOTATIONS {
            eprintln!("# {key}: {note}");
        }
        return Ok(());
    }
    let Some(command) = cli.command else {
        anyhow::bail!("no subcommand given; see --help");
    };
    let cfg = load_config(cli.config.as_ref())?;
    let summaries = match command {
        Command::SynthData => vec![pipeline::run_synth_data(&cfg)?],
        Command::PretrainVq => vec![pipeline::run_pretrain_vq(&cfg)?],
        Command::Preprocess => vec![pipeline::run_preprocess(&cfg)?],
        Command::BuildVocab { override_r } => vec![pipeline::run_build_vocab(&cfg, override_r)?],
        Command::PretrainDecoder => vec![pipeline::run_pretrain_decoder(&cfg)?],
        Command::Align => vec![pipeline::run_align(&cfg)?],
        Command::Finetune => vec![pipeline::run_finetune(&cfg)?],
        Command::Encode { input, output } => vec![pipeline::run_encode(&cfg, &input, &output)?],
        Command::Eval => vec![pipeline::run_eval(&cfg)?],
        Command::RunAll => pipeline::run_all(&cfg)?,
    };
    for s in summaries {
        println!("{s}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
