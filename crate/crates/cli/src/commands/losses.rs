use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Subcommand};

use sumforge_core::objectives::noise_demo;

use crate::io::write_jsonl;

#[derive(Debug, Args)]
pub struct LossesArgs {
    #[command(subcommand)]
    pub action: LossesAction,
}

#[derive(Debug, Subcommand)]
pub enum LossesAction {
    /// Train with plain vs. symmetric cross-entropy under synthetic label
    /// noise and compare clean-test accuracy.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Probability of flipping each training label to another class.
    #[arg(long)]
    pub eta: f64,
    /// Number of seeds to average over.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// First seed; runs use seed, seed+1, …
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the full report as one JSON record.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: LossesArgs) -> anyhow::Result<()> {
    match args.action {
        LossesAction::Demo(demo) => {
            let seeds: Vec<u64> = (demo.seed..demo.seed + demo.seeds).collect();
            let report = noise_demo(demo.eta, &seeds)?;
            println!("noise demo: eta {:.2}, {} seeds", report.eta, seeds.len());
            println!(
                "  CE  clean-test accuracy {:.4} (std {:.4})",
                report.ce_mean, report.ce_std
            );
            println!(
                "  SCE clean-test accuracy {:.4} (std {:.4})",
                report.sce_mean, report.sce_std
            );
            if let Some(out) = &demo.out {
                write_jsonl(out, &[&report])
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            Ok(())
        }
    }
}
