use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use sumforge_core::corpus::export_finetune_dataset;
use sumforge_core::metaprompt::MetaRunTrace;

use crate::io::{load_caption_file, read_jsonl, write_jsonl};
use crate::runner::CONSOLIDATED_FILE;

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Trace directory from `metaprompt` (or a traces.jsonl file directly).
    #[arg(long)]
    pub traces: PathBuf,
    /// The caption file the traces were generated from.
    #[arg(long)]
    pub captions: PathBuf,
    /// Fine-tune dataset output: one record per completed video.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: ExportArgs) -> anyhow::Result<()> {
    let traces_path = if args.traces.is_dir() {
        args.traces.join(CONSOLIDATED_FILE)
    } else {
        args.traces.clone()
    };
    let traces: Vec<MetaRunTrace> =
        read_jsonl(&traces_path).with_context(|| format!("loading {}", traces_path.display()))?;
    let captions = load_caption_file(&args.captions)
        .with_context(|| format!("loading {}", args.captions.display()))?;

    let outcome = export_finetune_dataset(&traces, &captions)?;
    for skipped in &outcome.skipped {
        eprintln!(
            "warning: skipping video {}: {}",
            skipped.video_id, skipped.reason
        );
    }
    write_jsonl(&args.out, &outcome.records)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "exported {} records ({} skipped) to {}",
        outcome.records.len(),
        outcome.skipped.len(),
        args.out.display()
    );
    Ok(())
}
