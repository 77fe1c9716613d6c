//! Reference-based caption evaluation: consensus n-gram TF-IDF (CIDEr),
//! longest-common-subsequence F-score (ROUGE-L), alignment-based METEOR,
//! and exact-match QA accuracy.
//!
//! One tokenizer feeds all metrics so their scores stay comparable. METEOR
//! runs exact matching followed by stem matching; the synonym-dictionary
//! stage of the original metric is deliberately omitted, so absolute values
//! can differ slightly from dictionary-equipped implementations.

pub mod stem;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{exp, ln, sqrt};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metric corpus is empty")]
    EmptyCorpus,
    #[error("item {0} has no references")]
    NoReferences(String),
    #[error("prediction/answer lengths differ: {predictions} vs {answers}")]
    LengthMismatch { predictions: usize, answers: usize },
    #[error("empty prediction/answer lists")]
    EmptyChoices,
    #[error("invalid metric parameter: {0}")]
    BadParameter(String),
    #[error("token must be non-empty")]
    EmptyToken,
}

/// An ordered sequence of lowercased tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, MetricsError> {
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(MetricsError::EmptyToken);
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercases, splits on whitespace, strips leading and trailing ASCII
/// punctuation from each token, and drops anything left empty.
pub fn tokenize(text: &str) -> TokenSeq {
    let tokens = text
        .split_whitespace()
        .map(|raw| {
            raw.to_lowercase()
                .trim_matches(|c: char| c.is_ascii_punctuation())
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .collect();
    TokenSeq { tokens }
}

/// One candidate with at least one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub item_id: String,
    pub candidate: TokenSeq,
    pub references: Vec<TokenSeq>,
}

impl EvalPair {
    pub fn new(
        item_id: &str,
        candidate: TokenSeq,
        references: Vec<TokenSeq>,
    ) -> Result<Self, MetricsError> {
        if references.is_empty() {
            return Err(MetricsError::NoReferences(item_id.to_string()));
        }
        Ok(Self {
            item_id: item_id.to_string(),
            candidate,
            references,
        })
    }

    /// Convenience constructor that tokenizes raw strings.
    pub fn from_texts(
        item_id: &str,
        candidate: &str,
        references: &[&str],
    ) -> Result<Self, MetricsError> {
        Self::new(
            item_id,
            tokenize(candidate),
            references.iter().map(|r| tokenize(r)).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiderParams {
    pub n_max: usize,
    pub sigma: f64,
}

impl Default for CiderParams {
    fn default() -> Self {
        Self {
            n_max: 4,
            sigma: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeParams {
    pub beta: f64,
}

impl Default for RougeParams {
    fn default() -> Self {
        Self { beta: 1.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for MeteorParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
        }
    }
}

/// Per-item scores plus their arithmetic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub per_item: Vec<f64>,
    pub mean: f64,
}

const NGRAM_SEP: char = '\u{1f}';

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        let mut key = String::new();
        for (i, tok) in window.iter().enumerate() {
            if i > 0 {
                key.push(NGRAM_SEP);
            }
            key.push_str(tok);
        }
        *counts.entry(key).or_insert(0.0) += 1.0;
    }
    counts
}

fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let norm_a = sqrt(a.values().map(|v| v * v).sum::<f64>());
    let norm_b = sqrt(b.values().map(|v| v * v).sum::<f64>());
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, v)| b.get(g).map(|w| v * w)).sum();
    dot / (norm_a * norm_b)
}

/// Consensus-based n-gram similarity over the whole corpus.
///
/// Document frequency counts, for each n-gram, how many items contain it in
/// at least one reference; idf is `ln(N) − ln(max(df, 1))`. Each side becomes
/// a raw-count × idf vector per n; cosine similarities for n = 1..n_max are
/// averaged, weighted by a Gaussian penalty on the token-length difference,
/// averaged over references, and scaled by 10.
pub fn cider(corpus: &[EvalPair], params: &CiderParams) -> Result<CorpusScores, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    if params.n_max == 0 {
        return Err(MetricsError::BadParameter("n_max must be >= 1".to_string()));
    }
    if params.sigma.is_nan() || params.sigma <= 0.0 {
        return Err(MetricsError::BadParameter("sigma must be > 0".to_string()));
    }
    for pair in corpus {
        if pair.references.is_empty() {
            return Err(MetricsError::NoReferences(pair.item_id.clone()));
        }
    }

    let n_items = corpus.len() as f64;
    // df[n-1][gram] = number of items whose reference set contains the gram.
    let mut dfs: Vec<BTreeMap<String, f64>> = (0..params.n_max).map(|_| BTreeMap::new()).collect();
    for pair in corpus {
        for (n_idx, df) in dfs.iter_mut().enumerate() {
            let mut union: BTreeSet<String> = BTreeSet::new();
            for reference in &pair.references {
                union.extend(ngram_counts(reference.tokens(), n_idx + 1).into_keys());
            }
            for gram in union {
                *df.entry(gram).or_insert(0.0) += 1.0;
            }
        }
    }

    let idf_vector = |tokens: &[String], n_idx: usize| -> BTreeMap<String, f64> {
        ngram_counts(tokens, n_idx + 1)
            .into_iter()
            .map(|(gram, count)| {
                let df = dfs[n_idx].get(&gram).copied().unwrap_or(0.0).max(1.0);
                let idf = ln(n_items) - ln(df);
                (gram, count * idf)
            })
            .collect()
    };

    let per_item: Vec<f64> = corpus
        .iter()
        .map(|pair| {
            let cand_len = pair.candidate.len() as f64;
            let cand_vecs: Vec<BTreeMap<String, f64>> = (0..params.n_max)
                .map(|n_idx| idf_vector(pair.candidate.tokens(), n_idx))
                .collect();
            let mut total = 0.0;
            for reference in &pair.references {
                let delta = cand_len - reference.len() as f64;
                let penalty = exp(-(delta * delta) / (2.0 * params.sigma * params.sigma));
                let mut sim = 0.0;
                for (n_idx, cand_vec) in cand_vecs.iter().enumerate() {
                    let ref_vec = idf_vector(reference.tokens(), n_idx);
                    sim += cosine(cand_vec, &ref_vec);
                }
                total += penalty * sim / params.n_max as f64;
            }
            10.0 * total / pair.references.len() as f64
        })
        .collect();

    let mean = crate::math::mean(&per_item);
    Ok(CorpusScores { per_item, mean })
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut curr = alloc::vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        core::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Longest-common-subsequence F-score against each reference, taking the
/// maximum; zero when either side is empty.
pub fn rouge_l(pair: &EvalPair, params: &RougeParams) -> f64 {
    let cand = pair.candidate.tokens();
    let beta_sq = params.beta * params.beta;
    pair.references
        .iter()
        .map(|reference| {
            let refr = reference.tokens();
            if cand.is_empty() || refr.is_empty() {
                return 0.0;
            }
            let lcs = lcs_len(cand, refr) as f64;
            if lcs == 0.0 {
                return 0.0;
            }
            let precision = lcs / cand.len() as f64;
            let recall = lcs / refr.len() as f64;
            (1.0 + beta_sq) * precision * recall / (recall + beta_sq * precision)
        })
        .fold(0.0, f64::max)
}

/// Word alignments between a candidate and one reference: exact matches
/// first, then stem matches over the leftovers, each candidate token pairing
/// with the first available reference token.
fn align(cand: &[String], refr: &[String]) -> Vec<(usize, usize)> {
    let mut cand_used = alloc::vec![false; cand.len()];
    let mut ref_used = alloc::vec![false; refr.len()];
    let mut pairs = Vec::new();

    for (ci, token) in cand.iter().enumerate() {
        if let Some(ri) = (0..refr.len()).find(|&ri| !ref_used[ri] && &refr[ri] == token) {
            cand_used[ci] = true;
            ref_used[ri] = true;
            pairs.push((ci, ri));
        }
    }

    let cand_stems: Vec<String> = cand.iter().map(|t| stem::porter(t)).collect();
    let ref_stems: Vec<String> = refr.iter().map(|t| stem::porter(t)).collect();
    for (ci, stem) in cand_stems.iter().enumerate() {
        if cand_used[ci] {
            continue;
        }
        if let Some(ri) = (0..refr.len()).find(|&ri| !ref_used[ri] && &ref_stems[ri] == stem) {
            cand_used[ci] = true;
            ref_used[ri] = true;
            pairs.push((ci, ri));
        }
    }

    pairs.sort_unstable();
    pairs
}

fn chunk_count(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    let mut chunks = 1;
    for window in pairs.windows(2) {
        let (a, b) = (window[0], window[1]);
        if b.0 != a.0 + 1 || b.1 != a.1 + 1 {
            chunks += 1;
        }
    }
    chunks
}

/// Alignment-based score with a fragmentation penalty, maximised over
/// references; zero when nothing aligns.
pub fn meteor(pair: &EvalPair, params: &MeteorParams) -> f64 {
    let cand = pair.candidate.tokens();
    pair.references
        .iter()
        .map(|reference| {
            let refr = reference.tokens();
            if cand.is_empty() || refr.is_empty() {
                return 0.0;
            }
            let pairs = align(cand, refr);
            let matches = pairs.len() as f64;
            if matches == 0.0 {
                return 0.0;
            }
            let precision = matches / cand.len() as f64;
            let recall = matches / refr.len() as f64;
            let f_mean =
                precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
            let chunks = chunk_count(&pairs) as f64;
            let penalty = params.gamma * crate::math::powf(chunks / matches, params.beta);
            f_mean * (1.0 - penalty)
        })
        .fold(0.0, f64::max)
}

/// Exact-match fraction between predicted and gold choices.
pub fn qa_accuracy<P: AsRef<str>, A: AsRef<str>>(
    predictions: &[P],
    answers: &[A],
) -> Result<f64, MetricsError> {
    if predictions.len() != answers.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            answers: answers.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyChoices);
    }
    let correct = predictions
        .iter()
        .zip(answers)
        .filter(|(p, a)| p.as_ref() == a.as_ref())
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub item_id: String,
    pub cider: f64,
    pub rouge_l: f64,
    pub meteor: f64,
}

/// Corpus means plus per-item breakdown; each corpus score is the arithmetic
/// mean of the per-item scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub item_count: usize,
    pub cider: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub per_item: Vec<ItemScores>,
}

/// Scores the whole corpus with default metric parameters.
pub fn evaluate(corpus: &[EvalPair]) -> Result<MetricReport, MetricsError> {
    let cider_scores = cider(corpus, &CiderParams::default())?;
    let rouge_params = RougeParams::default();
    let meteor_params = MeteorParams::default();
    let per_item: Vec<ItemScores> = corpus
        .iter()
        .zip(&cider_scores.per_item)
        .map(|(pair, &cider)| ItemScores {
            item_id: pair.item_id.clone(),
            cider,
            rouge_l: rouge_l(pair, &rouge_params),
            meteor: meteor(pair, &meteor_params),
        })
        .collect();
    Ok(MetricReport {
        item_count: per_item.len(),
        cider: cider_scores.mean,
        rouge_l: crate::math::mean(&per_item.iter().map(|i| i.rouge_l).collect::<Vec<_>>()),
        meteor: crate::math::mean(&per_item.iter().map(|i| i.meteor).collect::<Vec<_>>()),
        per_item,
    })
}
