use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use sumforge_core::metaprompt::{MetaConfig, StopReason};

use crate::config::BackendsConfig;
use crate::gateway::Gateway;
use crate::io::load_caption_file;
use crate::runner::{run_all_videos, TraceOrigin};

#[derive(Debug, Args)]
pub struct MetapromptArgs {
    /// Segment-caption file (see `ingest`).
    #[arg(long)]
    pub captions: PathBuf,
    /// Backend configuration file.
    #[arg(long)]
    pub backends: PathBuf,
    /// Output directory for per-video trace files and traces.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum loop iterations per video.
    #[arg(long, default_value_t = 5)]
    pub k_max: u32,
    /// Consecutive non-improving iterations before stopping early.
    #[arg(long, default_value_t = 2)]
    pub patience: u32,
    /// Extra evaluator calls allowed when its reply has no usable score.
    #[arg(long, default_value_t = 1)]
    pub score_retries: u32,
    /// Seed forwarded to backends that accept one.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Caption budget per prompt; larger sets are evenly subsampled.
    #[arg(long, default_value_t = 512)]
    pub max_captions: usize,
    /// Videos processed in parallel.
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    /// Global request-per-second cap (overrides the config file).
    #[arg(long)]
    pub rate_cap: Option<u32>,
    /// Backend id serving the generator role (overrides the config file).
    #[arg(long)]
    pub generator: Option<String>,
    /// Backend id serving the evaluator role (overrides the config file).
    #[arg(long)]
    pub evaluator: Option<String>,
    /// Backend id serving the optimiser role (overrides the config file).
    #[arg(long)]
    pub optimiser: Option<String>,
}

pub fn run(args: MetapromptArgs) -> anyhow::Result<()> {
    let config = BackendsConfig::load(&args.backends)?;
    let assignment = config.resolve_roles(args.generator, args.evaluator, args.optimiser)?;
    let gateway = Gateway::from_config(&config, args.rate_cap)?;
    let caption_sets = load_caption_file(&args.captions)
        .with_context(|| format!("loading {}", args.captions.display()))?;
    let cfg = MetaConfig {
        k_max: args.k_max,
        patience: args.patience,
        score_retries: args.score_retries,
        seed: args.seed,
        max_captions: args.max_captions,
    };

    // All-mock runs use virtual time shared across workers; interleaved
    // videos would record scheduling-dependent wall times, so they run
    // sequentially to keep artifacts byte-identical per seed.
    let concurrency = if gateway.is_virtual() {
        1
    } else {
        args.concurrency
    };
    let clock = gateway.clock();
    let outcomes = run_all_videos(
        &caption_sets,
        &cfg,
        &assignment,
        &gateway,
        clock.as_ref(),
        &args.out,
        concurrency,
    )?;

    let mut errored = 0usize;
    for outcome in &outcomes {
        let trace = &outcome.trace;
        let reused = match outcome.origin {
            TraceOrigin::Reused => " [reused]",
            TraceOrigin::Executed => "",
        };
        match (&trace.best, trace.stop_reason) {
            (Some(best), reason) => println!(
                "video {}: {} iterations, best score {} at k={} ({:?}){}",
                trace.video_id,
                trace.iterations.len(),
                best.score,
                best.k,
                reason,
                reused
            ),
            (None, _) => println!("video {}: no scored candidate{}", trace.video_id, reused),
        }
        if trace.stop_reason == StopReason::Error {
            errored += 1;
            eprintln!(
                "warning: video {} stopped on error: {}",
                trace.video_id,
                trace.error.as_deref().unwrap_or("unknown")
            );
        }
    }
    println!(
        "completed {} videos ({} with errors); traces in {}",
        outcomes.len(),
        errored,
        args.out.display()
    );
    Ok(())
}
