use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use crate::io::{load_caption_file, save_caption_file};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Caption file: one JSON record per line with video_id, index, start_s,
    /// end_s, caption.
    #[arg(long)]
    pub captions: PathBuf,
    /// Where to write the validated, index-sorted captions. Omit to only
    /// validate.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: IngestArgs) -> anyhow::Result<()> {
    let sets = load_caption_file(&args.captions)
        .with_context(|| format!("loading {}", args.captions.display()))?;
    for set in &sets {
        println!(
            "video {}: {} segments, {} s",
            set.video_id(),
            set.segment_count(),
            set.duration_s()
        );
    }
    if let Some(out) = &args.out {
        save_caption_file(out, &sets).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {} videos to {}", sets.len(), out.display());
    }
    Ok(())
}
