//! Numeric training objectives and their analytic gradients.
//!
//! Two loss families live here:
//!
//! * token-level losses over per-position probability rows — forward
//!   cross-entropy, the reverse term against smoothed one-hot targets, and
//!   their sum (the symmetric cross-entropy);
//! * a temporal contrastive loss over unit embeddings laid out as
//!   consecutive-clip pairs, where each vector's positive is its partner.
//!
//! Gradients are taken with respect to unconstrained parameters — logits
//! through a softmax for the token losses, raw vectors through L2
//! normalization for the contrastive loss — and every analytic gradient can
//! be verified against central finite differences. A small training demo
//! compares plain cross-entropy with the symmetric loss under synthetic
//! label noise.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear::{LinearSoftmax, TrainingLoss};
use crate::math::{dot, l2_norm, ln, log_sum_exp, mean, sample_std, softmax};

const ROW_SUM_TOL: f64 = 1e-9;
const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("probability matrix has {got} entries, expected {expected}")]
    BadShape { expected: usize, got: usize },
    #[error("row {row} sums to {sum}, not 1")]
    RowNotNormalised { row: usize, sum: f64 },
    #[error("row {row} contains a negative entry")]
    NegativeProbability { row: usize },
    #[error("target id {id} out of range for vocabulary {vocab}")]
    TargetOutOfRange { id: usize, vocab: usize },
    #[error("target count {got} does not match {expected} positions")]
    TargetCountMismatch { expected: usize, got: usize },
    #[error("smoothing epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("vocabulary must have at least two entries")]
    VocabTooSmall,
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("embedding batch needs an even count of at least 2 vectors, got {0}")]
    BadBatchSize(usize),
    #[error("vector {index} has norm {norm}, expected 1")]
    NotUnitNorm { index: usize, norm: f64 },
    #[error("vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("vector {0} has zero norm and cannot be normalised")]
    ZeroNorm(usize),
    #[error("noise rate must lie in [0, 1), got {0}")]
    BadNoiseRate(f64),
    #[error("demo needs at least one seed")]
    NoSeeds,
    #[error("training failed: {0}")]
    Training(String),
}

/// Per-position prediction distributions: a J×W row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbSeq {
    positions: usize,
    vocab: usize,
    probs: Vec<f64>,
}

impl ProbSeq {
    pub fn new(positions: usize, vocab: usize, probs: Vec<f64>) -> Result<Self, ObjectiveError> {
        if probs.len() != positions * vocab {
            return Err(ObjectiveError::BadShape {
                expected: positions * vocab,
                got: probs.len(),
            });
        }
        for row in 0..positions {
            let slice = &probs[row * vocab..(row + 1) * vocab];
            if slice.iter().any(|&p| p < 0.0) {
                return Err(ObjectiveError::NegativeProbability { row });
            }
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ObjectiveError::RowNotNormalised { row, sum });
            }
        }
        Ok(Self {
            positions,
            vocab,
            probs,
        })
    }

    /// Softmax of a J×W logit matrix.
    pub fn from_logits(
        positions: usize,
        vocab: usize,
        logits: &[f64],
    ) -> Result<Self, ObjectiveError> {
        if logits.len() != positions * vocab {
            return Err(ObjectiveError::BadShape {
                expected: positions * vocab,
                got: logits.len(),
            });
        }
        let mut probs = Vec::with_capacity(logits.len());
        for row in 0..positions {
            probs.extend(softmax(&logits[row * vocab..(row + 1) * vocab]));
        }
        Ok(Self {
            positions,
            vocab,
            probs,
        })
    }

    pub fn uniform(positions: usize, vocab: usize) -> Self {
        Self {
            positions,
            vocab,
            probs: alloc::vec![1.0 / vocab as f64; positions * vocab],
        }
    }

    pub fn one_hot(positions: usize, vocab: usize, ids: &[usize]) -> Result<Self, ObjectiveError> {
        if ids.len() != positions {
            return Err(ObjectiveError::TargetCountMismatch {
                expected: positions,
                got: ids.len(),
            });
        }
        let mut probs = alloc::vec![0.0; positions * vocab];
        for (row, &id) in ids.iter().enumerate() {
            if id >= vocab {
                return Err(ObjectiveError::TargetOutOfRange { id, vocab });
            }
            probs[row * vocab + id] = 1.0;
        }
        Ok(Self {
            positions,
            vocab,
            probs,
        })
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.probs[j * self.vocab..(j + 1) * self.vocab]
    }
}

/// Smoothed one-hot targets: mass `1 − ε` on the target token and
/// `ε/(W−1)` everywhere else, so every entry stays strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedTarget {
    vocab: usize,
    target_ids: Vec<usize>,
    epsilon: f64,
}

impl SmoothedTarget {
    pub fn new(vocab: usize, target_ids: Vec<usize>, epsilon: f64) -> Result<Self, ObjectiveError> {
        if vocab < 2 {
            return Err(ObjectiveError::VocabTooSmall);
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ObjectiveError::BadEpsilon(epsilon));
        }
        for &id in &target_ids {
            if id >= vocab {
                return Err(ObjectiveError::TargetOutOfRange { id, vocab });
            }
        }
        Ok(Self {
            vocab,
            target_ids,
            epsilon,
        })
    }

    pub fn positions(&self) -> usize {
        self.target_ids.len()
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn target_ids(&self) -> &[usize] {
        &self.target_ids
    }

    /// Implied target probability of token `w` at position `j`.
    pub fn prob(&self, j: usize, w: usize) -> f64 {
        if self.target_ids[j] == w {
            1.0 - self.epsilon
        } else {
            self.epsilon / (self.vocab - 1) as f64
        }
    }
}

fn check_dims(pred: &ProbSeq, target: &SmoothedTarget) -> Result<(), ObjectiveError> {
    if pred.positions() != target.positions() {
        return Err(ObjectiveError::TargetCountMismatch {
            expected: pred.positions(),
            got: target.positions(),
        });
    }
    if pred.vocab() != target.vocab() {
        return Err(ObjectiveError::BadShape {
            expected: pred.vocab(),
            got: target.vocab(),
        });
    }
    Ok(())
}

/// Forward cross-entropy: −Σⱼ log p(targetⱼ). Additive over positions;
/// zero exactly when the prediction is one-hot on every target.
pub fn cross_entropy(pred: &ProbSeq, targets: &[usize]) -> Result<f64, ObjectiveError> {
    if targets.len() != pred.positions() {
        return Err(ObjectiveError::TargetCountMismatch {
            expected: pred.positions(),
            got: targets.len(),
        });
    }
    let mut loss = 0.0;
    for (j, &t) in targets.iter().enumerate() {
        if t >= pred.vocab() {
            return Err(ObjectiveError::TargetOutOfRange {
                id: t,
                vocab: pred.vocab(),
            });
        }
        loss -= ln(pred.row(j)[t]);
    }
    Ok(loss)
}

/// Reverse term: −Σⱼ Σ_w p(w) · log p̃ⱼ(w), with the prediction as the outer
/// distribution and the smoothed target inside the log. Finite because the
/// smoothed target has no zero entries.
pub fn reverse_ce(pred: &ProbSeq, target: &SmoothedTarget) -> Result<f64, ObjectiveError> {
    check_dims(pred, target)?;
    let log_on = ln(1.0 - target.epsilon());
    let log_off = ln(target.epsilon() / (target.vocab() - 1) as f64);
    let mut loss = 0.0;
    for j in 0..pred.positions() {
        let target_id = target.target_ids()[j];
        for (w, &p) in pred.row(j).iter().enumerate() {
            loss -= p * if w == target_id { log_on } else { log_off };
        }
    }
    Ok(loss)
}

/// Symmetric cross-entropy: exactly `cross_entropy + reverse_ce` over the
/// same prediction and targets.
pub fn sce(pred: &ProbSeq, target: &SmoothedTarget) -> Result<f64, ObjectiveError> {
    let forward = cross_entropy(pred, target.target_ids())?;
    let reverse = reverse_ce(pred, target)?;
    Ok(forward + reverse)
}

/// Reverse-term loss of a single prediction row against class `label`:
/// −Σ_w p(w) · log p̃(w). Used as ℓ_rce in the noise-term calculator.
pub fn rce_loss(probs: &[f64], label: usize, epsilon: f64) -> Result<f64, ObjectiveError> {
    if probs.len() < 2 {
        return Err(ObjectiveError::VocabTooSmall);
    }
    if label >= probs.len() {
        return Err(ObjectiveError::TargetOutOfRange {
            id: label,
            vocab: probs.len(),
        });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ObjectiveError::BadEpsilon(epsilon));
    }
    let log_on = ln(1.0 - epsilon);
    let log_off = ln(epsilon / (probs.len() - 1) as f64);
    let mut loss = 0.0;
    for (w, &p) in probs.iter().enumerate() {
        loss -= p * if w == label { log_on } else { log_off };
    }
    Ok(loss)
}

/// A 2N-vector batch of unit embeddings ordered as consecutive-clip pairs:
/// vectors 2i and 2i+1 are positives of each other, everything else in the
/// batch is a negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBatch {
    vectors: Vec<Vec<f64>>,
    tau: f64,
}

impl EmbeddingBatch {
    pub fn new(vectors: Vec<Vec<f64>>, tau: f64) -> Result<Self, ObjectiveError> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(ObjectiveError::BadTemperature(tau));
        }
        if vectors.len() < 2 || !vectors.len().is_multiple_of(2) {
            return Err(ObjectiveError::BadBatchSize(vectors.len()));
        }
        let dim = vectors[0].len();
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(ObjectiveError::DimensionMismatch {
                    index,
                    expected: dim,
                    got: v.len(),
                });
            }
            let norm = l2_norm(v);
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(ObjectiveError::NotUnitNorm { index, norm });
            }
        }
        Ok(Self { vectors, tau })
    }

    /// Normalises raw vectors before constructing the batch.
    pub fn from_raw(raw: &[Vec<f64>], tau: f64) -> Result<Self, ObjectiveError> {
        let mut vectors = Vec::with_capacity(raw.len());
        for (index, v) in raw.iter().enumerate() {
            let norm = l2_norm(v);
            if norm == 0.0 {
                return Err(ObjectiveError::ZeroNorm(index));
            }
            vectors.push(v.iter().map(|x| x / norm).collect());
        }
        Self::new(vectors, tau)
    }

    pub fn pair_count(&self) -> usize {
        self.vectors.len() / 2
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

fn partner(a: usize) -> usize {
    a ^ 1
}

/// Temporal contrastive loss:
/// −(1/2N) Σₐ log( exp(zₐ·z⁺ₐ/τ) / Σ_{b≠a} exp(zₐ·z_b/τ) ).
pub fn temporal_info_nce(batch: &EmbeddingBatch) -> f64 {
    let n = batch.vectors.len();
    let tau = batch.tau;
    let mut loss = 0.0;
    for a in 0..n {
        let scaled: Vec<f64> = (0..n)
            .filter(|&b| b != a)
            .map(|b| dot(&batch.vectors[a], &batch.vectors[b]) / tau)
            .collect();
        let positive = dot(&batch.vectors[a], &batch.vectors[partner(a)]) / tau;
        loss += log_sum_exp(&scaled) - positive;
    }
    loss / n as f64
}

/// Loss of [`temporal_info_nce`] over raw, not-yet-normalised vectors.
pub fn info_nce_from_raw(raw: &[Vec<f64>], tau: f64) -> Result<f64, ObjectiveError> {
    Ok(temporal_info_nce(&EmbeddingBatch::from_raw(raw, tau)?))
}

/// Analytic gradient of [`info_nce_from_raw`] with respect to every raw
/// vector coordinate (normalization included in the chain).
pub fn grad_info_nce_raw(raw: &[Vec<f64>], tau: f64) -> Result<Vec<Vec<f64>>, ObjectiveError> {
    let batch = EmbeddingBatch::from_raw(raw, tau)?;
    let z = &batch.vectors;
    let n = z.len();
    let count = n as f64;

    // Softmax weights w_a(b) over negatives of each anchor.
    let mut weights = alloc::vec![alloc::vec![0.0; n]; n];
    for a in 0..n {
        let scaled: Vec<f64> = (0..n)
            .map(|b| {
                if b == a {
                    f64::NEG_INFINITY
                } else {
                    dot(&z[a], &z[b]) / tau
                }
            })
            .collect();
        let lse = log_sum_exp(&scaled);
        for b in 0..n {
            if b != a {
                weights[a][b] = crate::math::exp(scaled[b] - lse);
            }
        }
    }

    let dim = z[0].len();
    let mut grads = Vec::with_capacity(n);
    for c in 0..n {
        // dL/dz_c = (1/(2Nτ)) [ −2·z_{p(c)} + Σ_{b≠c} (w_c(b) + w_b(c)) z_b ]
        let mut g = alloc::vec![0.0; dim];
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = -2.0 * z[partner(c)][i];
        }
        for b in 0..n {
            if b == c {
                continue;
            }
            let w = weights[c][b] + weights[b][c];
            for (i, gi) in g.iter_mut().enumerate() {
                *gi += w * z[b][i];
            }
        }
        for gi in g.iter_mut() {
            *gi /= count * tau;
        }
        // Chain through z = x / ||x||: dL/dx = (g − (g·z) z) / ||x||.
        let norm = l2_norm(&raw[c]);
        let radial = dot(&g, &z[c]);
        grads.push((0..dim).map(|i| (g[i] - radial * z[c][i]) / norm).collect());
    }
    Ok(grads)
}

/// Symmetric cross-entropy of softmaxed logits against a smoothed target.
pub fn sce_from_logits(logits: &[f64], target: &SmoothedTarget) -> Result<f64, ObjectiveError> {
    let pred = ProbSeq::from_logits(target.positions(), target.vocab(), logits)?;
    sce(&pred, target)
}

/// Analytic gradient of [`sce_from_logits`] with respect to the logits.
pub fn grad_sce_logits(
    logits: &[f64],
    target: &SmoothedTarget,
) -> Result<Vec<f64>, ObjectiveError> {
    let positions = target.positions();
    let vocab = target.vocab();
    let pred = ProbSeq::from_logits(positions, vocab, logits)?;
    let log_on = ln(1.0 - target.epsilon());
    let log_off = ln(target.epsilon() / (vocab - 1) as f64);

    let mut grad = alloc::vec![0.0; logits.len()];
    for j in 0..positions {
        let row = pred.row(j);
        let t = target.target_ids()[j];
        let expectation: f64 = row
            .iter()
            .enumerate()
            .map(|(w, &p)| p * if w == t { log_on } else { log_off })
            .sum();
        for (v, &p) in row.iter().enumerate() {
            let forward = p - if v == t { 1.0 } else { 0.0 };
            let log_target = if v == t { log_on } else { log_off };
            let reverse = -p * (log_target - expectation);
            grad[j * vocab + v] = forward + reverse;
        }
    }
    Ok(grad)
}

/// Gradient of the forward cross-entropy with respect to logits: p − onehot.
pub fn grad_cross_entropy_logits(
    positions: usize,
    vocab: usize,
    logits: &[f64],
    targets: &[usize],
) -> Result<Vec<f64>, ObjectiveError> {
    let pred = ProbSeq::from_logits(positions, vocab, logits)?;
    if targets.len() != positions {
        return Err(ObjectiveError::TargetCountMismatch {
            expected: positions,
            got: targets.len(),
        });
    }
    let mut grad = alloc::vec![0.0; logits.len()];
    for (j, &t) in targets.iter().enumerate() {
        if t >= vocab {
            return Err(ObjectiveError::TargetOutOfRange { id: t, vocab });
        }
        for (v, &p) in pred.row(j).iter().enumerate() {
            grad[j * vocab + v] = p - if v == t { 1.0 } else { 0.0 };
        }
    }
    Ok(grad)
}

/// Central-difference gradient (f(x+h) − f(x−h)) / 2h per coordinate.
pub fn central_difference_grad<F: Fn(&[f64]) -> f64>(f: F, point: &[f64], h: f64) -> Vec<f64> {
    let mut perturbed = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        perturbed[i] = point[i] + h;
        let plus = f(&perturbed);
        perturbed[i] = point[i] - h;
        let minus = f(&perturbed);
        perturbed[i] = point[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// Compares an analytic gradient against central differences and returns the
/// worst per-coordinate deviation, scaled by `max(|analytic|, |numeric|, 1)`
/// so near-zero coordinates are judged absolutely.
pub fn finite_diff_check<F: Fn(&[f64]) -> f64>(
    f: F,
    analytic: &[f64],
    point: &[f64],
    h: f64,
) -> f64 {
    let numeric = central_difference_grad(f, point, h);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Outcome of the noisy-label robustness demo: clean-test accuracy of
/// cross-entropy vs. symmetric cross-entropy training per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub eta: f64,
    pub seeds: Vec<u64>,
    pub ce_accuracies: Vec<f64>,
    pub sce_accuracies: Vec<f64>,
    pub ce_mean: f64,
    pub ce_std: f64,
    pub sce_mean: f64,
    pub sce_std: f64,
}

const DEMO_CLASSES: usize = 4;
const DEMO_TRAIN: usize = 160;
const DEMO_TEST: usize = 2000;
const DEMO_EPOCHS: u32 = 1000;
const DEMO_LR: f64 = 0.5;
const DEMO_EPSILON: f64 = 0.1;
const DEMO_MEAN_RADIUS: f64 = 2.0;

fn blob_mean(class: usize) -> (f64, f64) {
    match class {
        0 => (DEMO_MEAN_RADIUS, 0.0),
        1 => (0.0, DEMO_MEAN_RADIUS),
        2 => (-DEMO_MEAN_RADIUS, 0.0),
        _ => (0.0, -DEMO_MEAN_RADIUS),
    }
}

fn sample_blobs(rng: &mut ChaCha8Rng, count: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let normal = Normal::new(0.0, 1.0).expect("valid std");
    let mut features = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % DEMO_CLASSES;
        let (mx, my) = blob_mean(class);
        features.push(alloc::vec![
            mx + normal.sample(rng),
            my + normal.sample(rng),
        ]);
        labels.push(class);
    }
    (features, labels)
}

/// Flips each label with probability `eta` to a uniformly chosen different
/// class (symmetric label noise).
fn flip_labels(rng: &mut ChaCha8Rng, labels: &mut [usize], classes: usize, eta: f64) {
    for label in labels.iter_mut() {
        if rng.gen::<f64>() < eta {
            let shift = rng.gen_range(1..classes);
            *label = (*label + shift) % classes;
        }
    }
}

/// Trains a linear softmax model on 4-class Gaussian blobs whose training
/// labels are flipped with probability `eta`, once with plain cross-entropy
/// and once with the symmetric loss, and reports clean-test accuracies.
pub fn noise_demo(eta: f64, seeds: &[u64]) -> Result<DemoReport, ObjectiveError> {
    if !(0.0..1.0).contains(&eta) {
        return Err(ObjectiveError::BadNoiseRate(eta));
    }
    if seeds.is_empty() {
        return Err(ObjectiveError::NoSeeds);
    }
    let mut ce_accuracies = Vec::with_capacity(seeds.len());
    let mut sce_accuracies = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (train_x, mut train_y) = sample_blobs(&mut rng, DEMO_TRAIN);
        let (test_x, test_y) = sample_blobs(&mut rng, DEMO_TEST);
        flip_labels(&mut rng, &mut train_y, DEMO_CLASSES, eta);

        let ce_model = LinearSoftmax::fit(
            &train_x,
            &train_y,
            DEMO_CLASSES,
            TrainingLoss::CrossEntropy,
            DEMO_EPOCHS,
            DEMO_LR,
        )
        .map_err(|e| ObjectiveError::Training(alloc::format!("{e}")))?;
        let sce_model = LinearSoftmax::fit(
            &train_x,
            &train_y,
            DEMO_CLASSES,
            TrainingLoss::SymmetricCrossEntropy {
                epsilon: DEMO_EPSILON,
            },
            DEMO_EPOCHS,
            DEMO_LR,
        )
        .map_err(|e| ObjectiveError::Training(alloc::format!("{e}")))?;

        ce_accuracies.push(ce_model.accuracy(&test_x, &test_y));
        sce_accuracies.push(sce_model.accuracy(&test_x, &test_y));
    }
    Ok(DemoReport {
        eta,
        seeds: seeds.to_vec(),
        ce_mean: mean(&ce_accuracies),
        ce_std: sample_std(&ce_accuracies),
        sce_mean: mean(&sce_accuracies),
        sce_std: sample_std(&sce_accuracies),
        ce_accuracies,
        sce_accuracies,
    })
}
