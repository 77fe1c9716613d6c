use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use serde::Serialize;

use sumforge_core::metrics::{evaluate, ItemScores};

use crate::io::{load_eval_pairs, write_jsonl};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions: one {item_id, text} record per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// References: one {item_id, texts: [...]} record per line.
    #[arg(long)]
    pub refs: PathBuf,
    /// Report file: a corpus record followed by per-item records.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ReportLine<'a> {
    Corpus {
        item_count: usize,
        cider: f64,
        rouge_l: f64,
        meteor: f64,
    },
    Item(&'a ItemScores),
}

pub fn run(args: EvaluateArgs) -> anyhow::Result<()> {
    let pairs = load_eval_pairs(&args.pred, &args.refs).context("loading evaluation inputs")?;
    let report = evaluate(&pairs)?;
    println!(
        "{} items | CIDEr {:.4} | ROUGE-L {:.4} | METEOR {:.4}",
        report.item_count, report.cider, report.rouge_l, report.meteor
    );
    if let Some(out) = &args.out {
        let mut lines = vec![ReportLine::Corpus {
            item_count: report.item_count,
            cider: report.cider,
            rouge_l: report.rouge_l,
            meteor: report.meteor,
        }];
        lines.extend(report.per_item.iter().map(ReportLine::Item));
        write_jsonl(out, &lines).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
