//! Subcommand definitions and dispatch.

pub mod bound;
pub mod evaluate;
pub mod export;
pub mod ingest;
pub mod losses;
pub mod metaprompt;

use clap::{Parser, Subcommand};

/// Pseudo-summary tooling for hour-long videos: ingest segment captions,
/// refine summaries with a three-role LLM loop, evaluate with captioning
/// metrics, probe the noise-robust losses, and compute error bounds.
#[derive(Debug, Parser)]
#[command(name = "sumforge", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and normalise a segment-caption file.
    Ingest(ingest::IngestArgs),
    /// Run the generator → evaluator → optimiser loop per video.
    Metaprompt(metaprompt::MetapromptArgs),
    /// Score predictions against references with CIDEr, ROUGE-L, and METEOR.
    Evaluate(evaluate::EvaluateArgs),
    /// Loss-function demos.
    Losses(losses::LossesArgs),
    /// Compose the four-term generalization error bound.
    Bound(bound::BoundArgs),
    /// Export a fine-tuning dataset from completed traces.
    Export(export::ExportArgs),
}

pub fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(args) => ingest::run(args),
        Command::Metaprompt(args) => metaprompt::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Losses(args) => losses::run(args),
        Command::Bound(args) => bound::run(args),
        Command::Export(args) => export::run(args),
    }
}
