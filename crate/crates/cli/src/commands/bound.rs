use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;

use sumforge_core::bound::{compose_bound, proxy_divergence, BoundInputs, SampleSize};

use crate::io::{read_jsonl, write_jsonl};

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Action; `compute` is the only one and the default.
    #[arg(value_parser = ["compute"])]
    pub action: Option<String>,
    /// Empirical error on the correctly labelled subset, in [0, 1].
    #[arg(long)]
    pub eps_plus: Option<f64>,
    /// Divergence between clean and noisy subsets, in [0, 2]. Mutually
    /// exclusive with the sample files.
    #[arg(long, conflicts_with_all = ["samples_plus", "samples_minus"])]
    pub divergence: Option<f64>,
    /// Feature file for the clean subset: one JSON number array per line.
    #[arg(long, requires = "samples_minus")]
    pub samples_plus: Option<PathBuf>,
    /// Feature file for the noisy subset: one JSON number array per line.
    #[arg(long, requires = "samples_plus")]
    pub samples_minus: Option<PathBuf>,
    /// Seed for the proxy divergence estimator.
    #[arg(long, default_value_t = 0)]
    pub proxy_seed: u64,
    /// VC dimension of the hypothesis class.
    #[arg(long)]
    pub d: Option<u32>,
    /// Per-subset sample size.
    #[arg(long, conflicts_with = "asymptotic")]
    pub m: Option<u64>,
    /// Treat the sample size as unbounded: the VC term vanishes.
    #[arg(long)]
    pub asymptotic: bool,
    /// Confidence parameter in (0, 1).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Expected extra loss from label noise (may be negative).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Write the result as one JSON record.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: BoundArgs) -> anyhow::Result<()> {
    let divergence = match (&args.divergence, &args.samples_plus, &args.samples_minus) {
        (Some(value), _, _) => *value,
        (None, Some(plus), Some(minus)) => {
            let plus_rows: Vec<Vec<f64>> =
                read_jsonl(plus).with_context(|| format!("loading {}", plus.display()))?;
            let minus_rows: Vec<Vec<f64>> =
                read_jsonl(minus).with_context(|| format!("loading {}", minus.display()))?;
            let estimate = proxy_divergence(&plus_rows, &minus_rows, args.proxy_seed)?;
            println!(
                "proxy divergence from {} + {} samples: {:.6}",
                plus_rows.len(),
                minus_rows.len(),
                estimate
            );
            estimate
        }
        _ => bail!("provide either --divergence or both --samples-plus and --samples-minus"),
    };

    let Some(eps_plus) = args.eps_plus else {
        bail!("--eps-plus is required");
    };
    let Some(vc_dim) = args.d else {
        bail!("--d (VC dimension) is required");
    };
    let Some(delta) = args.delta else {
        bail!("--delta is required");
    };
    let lambda = args.lambda.unwrap_or(0.0);
    let sample_size = if args.asymptotic {
        SampleSize::Asymptotic
    } else {
        match args.m {
            Some(m) => SampleSize::Finite(m),
            None => bail!("provide --m or --asymptotic"),
        }
    };

    let inputs = BoundInputs {
        eps_plus,
        divergence,
        vc_dim,
        sample_size,
        delta,
        lambda,
    };
    let result = compose_bound(&inputs)?;
    println!("error term      2·eps_plus   = {:.6}", result.term_error);
    println!(
        "divergence term ½·divergence = {:.6}",
        result.term_divergence
    );
    println!("vc term                      = {:.6}", result.term_vc);
    println!("lambda term                  = {:+.6}", result.term_lambda);
    println!("bound total                  = {:.6}", result.total);
    if let Some(out) = &args.out {
        write_jsonl(out, &[&result]).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
