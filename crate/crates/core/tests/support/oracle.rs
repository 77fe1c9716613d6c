//! Brute-force metric oracle shared by the core test suite and the
//! acceptance gate.
//!
//! Every metric is reimplemented from its definition in a deliberately
//! different style from the main implementation: hash-map n-gram vectors
//! keyed by token vectors, a memoised recursive LCS, and an explicitly
//! staged METEOR aligner. Only the Porter stemmer is shared; its tables are
//! checked against the classic vocabulary elsewhere.

use std::collections::{HashMap, HashSet};

use sumforge_core::metrics::stem;

pub fn oracle_tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split(char::is_whitespace) {
        let lowered = chunk.to_lowercase();
        let trimmed: &str = lowered.trim_matches(|c: char| c.is_ascii_punctuation());
        if !trimmed.is_empty() {
            out.push(trimmed.to_string());
        }
    }
    out
}

fn oracle_ngrams(tokens: &[String], n: usize) -> HashMap<Vec<String>, f64> {
    let mut counts: HashMap<Vec<String>, f64> = HashMap::new();
    if tokens.len() >= n && n > 0 {
        for start in 0..=(tokens.len() - n) {
            *counts.entry(tokens[start..start + n].to_vec()).or_default() += 1.0;
        }
    }
    counts
}

pub struct OracleCider {
    n_max: usize,
    sigma: f64,
    item_count: f64,
    dfs: Vec<HashMap<Vec<String>, f64>>,
}

impl OracleCider {
    pub fn build(corpus: &[(Vec<String>, Vec<Vec<String>>)], n_max: usize, sigma: f64) -> Self {
        let mut dfs = vec![HashMap::new(); n_max];
        for (_, refs) in corpus {
            for n in 1..=n_max {
                let mut union: HashSet<Vec<String>> = HashSet::new();
                for r in refs {
                    union.extend(oracle_ngrams(r, n).into_keys());
                }
                for gram in union {
                    *dfs[n - 1].entry(gram).or_default() += 1.0;
                }
            }
        }
        Self {
            n_max,
            sigma,
            item_count: corpus.len() as f64,
            dfs,
        }
    }

    fn tfidf(&self, tokens: &[String], n: usize) -> HashMap<Vec<String>, f64> {
        oracle_ngrams(tokens, n)
            .into_iter()
            .map(|(gram, tf)| {
                let df = self.dfs[n - 1].get(&gram).copied().unwrap_or(0.0);
                let idf = self.item_count.ln() - df.max(1.0).ln();
                (gram, tf * idf)
            })
            .collect()
    }

    pub fn score_item(&self, cand: &[String], refs: &[Vec<String>]) -> f64 {
        let mut over_refs = 0.0;
        for r in refs {
            let len_gap = cand.len() as f64 - r.len() as f64;
            let penalty = (-(len_gap * len_gap) / (2.0 * self.sigma * self.sigma)).exp();
            let mut over_n = 0.0;
            for n in 1..=self.n_max {
                let cv = self.tfidf(cand, n);
                let rv = self.tfidf(r, n);
                let dot: f64 = cv
                    .iter()
                    .map(|(g, v)| v * rv.get(g).copied().unwrap_or(0.0))
                    .sum();
                let nc: f64 = cv.values().map(|v| v * v).sum::<f64>().sqrt();
                let nr: f64 = rv.values().map(|v| v * v).sum::<f64>().sqrt();
                if nc > 0.0 && nr > 0.0 {
                    over_n += dot / (nc * nr);
                }
            }
            over_refs += penalty * over_n / self.n_max as f64;
        }
        10.0 * over_refs / refs.len() as f64
    }
}

fn lcs_recursive(
    a: &[String],
    b: &[String],
    i: usize,
    j: usize,
    memo: &mut HashMap<(usize, usize), usize>,
) -> usize {
    if i == 0 || j == 0 {
        return 0;
    }
    if let Some(&hit) = memo.get(&(i, j)) {
        return hit;
    }
    let result = if a[i - 1] == b[j - 1] {
        lcs_recursive(a, b, i - 1, j - 1, memo) + 1
    } else {
        lcs_recursive(a, b, i - 1, j, memo).max(lcs_recursive(a, b, i, j - 1, memo))
    };
    memo.insert((i, j), result);
    result
}

pub fn oracle_rouge_l(cand: &[String], refs: &[Vec<String>], beta: f64) -> f64 {
    let mut best = 0.0f64;
    for r in refs {
        if cand.is_empty() || r.is_empty() {
            continue;
        }
        let lcs = lcs_recursive(cand, r, cand.len(), r.len(), &mut HashMap::new()) as f64;
        if lcs == 0.0 {
            continue;
        }
        let p = lcs / cand.len() as f64;
        let rec = lcs / r.len() as f64;
        let f = (1.0 + beta * beta) * p * rec / (rec + beta * beta * p);
        best = best.max(f);
    }
    best
}

pub fn oracle_meteor(
    cand: &[String],
    refs: &[Vec<String>],
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> f64 {
    let mut best = 0.0f64;
    for r in refs {
        if cand.is_empty() || r.is_empty() {
            continue;
        }
        // Stage 1: exact surface matches, each candidate token grabbing the
        // first free reference token.
        let mut taken_ref = vec![false; r.len()];
        let mut taken_cand = vec![false; cand.len()];
        let mut matches: Vec<(usize, usize)> = Vec::new();
        for ci in 0..cand.len() {
            for ri in 0..r.len() {
                if !taken_ref[ri] && cand[ci] == r[ri] {
                    taken_ref[ri] = true;
                    taken_cand[ci] = true;
                    matches.push((ci, ri));
                    break;
                }
            }
        }
        // Stage 2: stem matches over whatever is left.
        for ci in 0..cand.len() {
            if taken_cand[ci] {
                continue;
            }
            let cs = stem::porter(&cand[ci]);
            for ri in 0..r.len() {
                if !taken_ref[ri] && stem::porter(&r[ri]) == cs {
                    taken_ref[ri] = true;
                    taken_cand[ci] = true;
                    matches.push((ci, ri));
                    break;
                }
            }
        }
        if matches.is_empty() {
            continue;
        }
        matches.sort();
        let mut chunks = 1usize;
        for w in matches.windows(2) {
            if w[1].0 != w[0].0 + 1 || w[1].1 != w[0].1 + 1 {
                chunks += 1;
            }
        }
        let m = matches.len() as f64;
        let p = m / cand.len() as f64;
        let rec = m / r.len() as f64;
        let f_mean = p * rec / (alpha * p + (1.0 - alpha) * rec);
        let penalty = gamma * (chunks as f64 / m).powf(beta);
        best = best.max(f_mean * (1.0 - penalty));
    }
    best
}

/// The pinned 20-item corpus: (item id, candidate, references).
pub fn pinned_corpus() -> Vec<(&'static str, &'static str, Vec<&'static str>)> {
    vec![
        (
            "i01",
            "a man chops onions in the kitchen",
            vec![
                "a man is chopping onions in a kitchen",
                "someone chops vegetables on a cutting board",
            ],
        ),
        (
            "i02",
            "the chef stirs a pot of soup",
            vec!["a chef stirs soup in a large pot"],
        ),
        (
            "i03",
            "children play football in the park",
            vec![
                "kids are playing soccer at the park",
                "children kick a ball around a field",
                "a group of children plays football outside",
            ],
        ),
        ("i04", "the dog runs after the ball", vec!["the dog runs after the ball"]),
        (
            "i05",
            "a woman paints a landscape on canvas",
            vec!["an artist paints mountains on a canvas"],
        ),
        (
            "i06",
            "completely unrelated words here",
            vec!["the mechanic repairs a car engine"],
        ),
        (
            "i07",
            "he pours coffee into a mug and drinks it slowly",
            vec!["a man pours coffee into a cup", "he drinks his morning coffee"],
        ),
        (
            "i08",
            "the band performs a song on stage",
            vec!["musicians perform live music on a stage"],
        ),
        (
            "i09",
            "she waters the plants in her garden",
            vec![
                "a woman watering flowers in the garden",
                "she is taking care of her garden plants",
            ],
        ),
        (
            "i10",
            "two people ride bicycles along the beach",
            vec!["a couple rides bikes near the ocean"],
        ),
        (
            "i11",
            "The Cat, sat on the mat!",
            vec!["the cat is on the mat", "a cat sits quietly on a mat"],
        ),
        (
            "i12",
            "a long and winding sentence that keeps going and going far beyond the reference length",
            vec!["a short reference"],
        ),
        ("i13", "single", vec!["single"]),
        (
            "i14",
            "the carpenter measures the wooden plank twice",
            vec!["a carpenter measuring wood planks carefully"],
        ),
        (
            "i15",
            "students study for their exams in the library",
            vec![
                "students are studying in a quiet library",
                "people read books at the library",
            ],
        ),
        (
            "i16",
            "a fisherman casts his line into the river",
            vec!["a man fishing by the river at dawn"],
        ),
        (
            "i17",
            "the baby laughs while playing with blocks",
            vec!["a baby plays with colorful building blocks"],
        ),
        (
            "i18",
            "he assembles the bookshelf with a screwdriver",
            vec!["a man assembling furniture with tools", "he builds a shelf"],
        ),
        (
            "i19",
            "the skier glides down the snowy slope",
            vec!["a skier going down a snow covered mountain"],
        ),
        (
            "i20",
            "grandmother bakes bread early every morning",
            vec!["an old woman baking fresh bread in the morning"],
        ),
    ]
}

pub fn oracle_corpus() -> Vec<(Vec<String>, Vec<Vec<String>>)> {
    pinned_corpus()
        .into_iter()
        .map(|(_, cand, refs)| {
            (
                oracle_tokenize(cand),
                refs.into_iter().map(oracle_tokenize).collect(),
            )
        })
        .collect()
}
