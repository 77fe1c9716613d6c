//! Calculator for the four-term generalization error bound on hypotheses
//! trained over noisily pseudo-labelled data, plus desk-scale estimators for
//! the terms that are not directly computable:
//!
//! * `2·ε⁺` — twice the empirical error on the correctly labelled subset;
//! * `½·d` — half the divergence between the clean and noisy subsets,
//!   estimated with a classifier-based proxy (2·(1 − 2·held-out error));
//! * a VC generalization term `2·√((d·ln(2m) + ln(2/δ))/m)`;
//! * `λ` — the expected extra loss induced by label noise under a class
//!   transition model, evaluated over a class-conditional loss table.
//!
//! Natural logarithms throughout. λ keeps its sign; it is negative whenever
//! the expected loss on true labels exceeds the noise-weighted loss on
//! flipped ones.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear::{LinearSoftmax, TrainingLoss};
use crate::math::{ln, sqrt};
use crate::objectives::rce_loss;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("VC dimension must be at least 1")]
    BadVcDim,
    #[error("sample size must be at least 1")]
    BadSampleSize,
    #[error("empty feature sample for the {0} side")]
    EmptySample(&'static str),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("noise transition row {row} sums to {sum}, not 1")]
    RowNotNormalised { row: usize, sum: f64 },
    #[error("noise transition entry ({row}, {column}) is negative")]
    NegativeRate { row: usize, column: usize },
    #[error("noise model needs at least 2 classes")]
    TooFewClasses,
    #[error("loss table has {got} entries, expected {expected}")]
    BadLossTable { expected: usize, got: usize },
    #[error("{field} must lie in {range}, got {value}")]
    OutOfRange {
        field: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("experiment failed: {0}")]
    Experiment(String),
}

/// Class-conditional label noise: `transition[y][k]` is the probability that
/// a sample whose true class is `y` is labelled `k`. Rows sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    classes: usize,
    transition: Vec<f64>,
}

impl NoiseModel {
    pub fn new(classes: usize, transition: Vec<f64>) -> Result<Self, BoundError> {
        if classes < 2 {
            return Err(BoundError::TooFewClasses);
        }
        if transition.len() != classes * classes {
            return Err(BoundError::BadLossTable {
                expected: classes * classes,
                got: transition.len(),
            });
        }
        for row in 0..classes {
            let slice = &transition[row * classes..(row + 1) * classes];
            for (column, &rate) in slice.iter().enumerate() {
                if rate < 0.0 {
                    return Err(BoundError::NegativeRate { row, column });
                }
            }
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(BoundError::RowNotNormalised { row, sum });
            }
        }
        Ok(Self {
            classes,
            transition,
        })
    }

    /// Symmetric noise: each label flips with probability `eta`, uniformly
    /// over the other classes.
    pub fn symmetric(classes: usize, eta: f64) -> Result<Self, BoundError> {
        if !(0.0..1.0).contains(&eta) {
            return Err(BoundError::OutOfRange {
                field: "eta",
                range: "[0, 1)",
                value: eta,
            });
        }
        if classes < 2 {
            return Err(BoundError::TooFewClasses);
        }
        let off = eta / (classes - 1) as f64;
        let mut transition = alloc::vec![off; classes * classes];
        for y in 0..classes {
            transition[y * classes + y] = 1.0 - eta;
        }
        Self::new(classes, transition)
    }

    pub fn noiseless(classes: usize) -> Result<Self, BoundError> {
        Self::symmetric(classes, 0.0)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// η_{yk}: probability that true class `y` is labelled `k`.
    pub fn rate(&self, y: usize, k: usize) -> f64 {
        self.transition[y * self.classes + k]
    }

    /// η_y = Σ_{k≠y} η_{yk}: total flip probability of class `y`.
    pub fn marginal_noise(&self, y: usize) -> f64 {
        (0..self.classes)
            .filter(|&k| k != y)
            .map(|k| self.rate(y, k))
            .sum()
    }

    /// Overall rate η: the class-averaged marginal flip probability.
    pub fn overall_rate(&self) -> f64 {
        (0..self.classes)
            .map(|y| self.marginal_noise(y))
            .sum::<f64>()
            / self.classes as f64
    }
}

/// VC generalization term `2·√((d·ln(2m) + ln(2/δ)) / m)`.
pub fn vc_generalization_term(vc_dim: u32, m: u64, delta: f64) -> Result<f64, BoundError> {
    if vc_dim < 1 {
        return Err(BoundError::BadVcDim);
    }
    if m < 1 {
        return Err(BoundError::BadSampleSize);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundError::BadDelta(delta));
    }
    let m = m as f64;
    Ok(2.0 * sqrt((vc_dim as f64 * ln(2.0 * m) + ln(2.0 / delta)) / m))
}

const PROXY_EPOCHS: u32 = 300;
const PROXY_LR: f64 = 0.5;

/// Classifier-based divergence estimate between two feature samples:
/// `2·(1 − 2·err)` where `err` is the held-out error of a linear
/// discriminator trained to tell them apart, clamped to [0, 2].
///
/// The split is stratified 50/50 and shuffled with the given seed, so the
/// estimate is deterministic per seed. A side with a single point falls back
/// to using it for both training and evaluation.
pub fn proxy_divergence(
    samples_plus: &[Vec<f64>],
    samples_minus: &[Vec<f64>],
    seed: u64,
) -> Result<f64, BoundError> {
    if samples_plus.is_empty() {
        return Err(BoundError::EmptySample("plus"));
    }
    if samples_minus.is_empty() {
        return Err(BoundError::EmptySample("minus"));
    }
    let dim = samples_plus[0].len();
    for side in [samples_plus, samples_minus] {
        for v in side {
            if v.len() != dim {
                return Err(BoundError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut test_x = Vec::new();
    let mut test_y = Vec::new();
    for (label, side) in [(0usize, samples_plus), (1usize, samples_minus)] {
        let mut order: Vec<usize> = (0..side.len()).collect();
        order.shuffle(&mut rng);
        let train_len = (side.len() / 2).max(1);
        for (pos, &idx) in order.iter().enumerate() {
            if pos < train_len {
                train_x.push(side[idx].clone());
                train_y.push(label);
            } else {
                test_x.push(side[idx].clone());
                test_y.push(label);
            }
        }
        if side.len() == 1 {
            test_x.push(side[0].clone());
            test_y.push(label);
        }
    }

    let model = LinearSoftmax::fit(
        &train_x,
        &train_y,
        2,
        TrainingLoss::CrossEntropy,
        PROXY_EPOCHS,
        PROXY_LR,
    )
    .map_err(|e| BoundError::Experiment(alloc::format!("{e}")))?;
    let err = model.error_rate(&test_x, &test_y);
    Ok((2.0 * (1.0 - 2.0 * err)).clamp(0.0, 2.0))
}

/// λ = E[Σ_{k≠y} η_{yk}·ℓ(f(v), k) − η_y·ℓ(f(v), y)] evaluated as a finite
/// sum over a class-conditional loss table `losses[y][k]` (row-major), with
/// classes weighted uniformly. The sign is preserved.
pub fn lambda_noise_term(noise: &NoiseModel, losses: &[f64]) -> Result<f64, BoundError> {
    let classes = noise.classes();
    if losses.len() != classes * classes {
        return Err(BoundError::BadLossTable {
            expected: classes * classes,
            got: losses.len(),
        });
    }
    let mut lambda = 0.0;
    for y in 0..classes {
        let mut term = 0.0;
        for k in 0..classes {
            if k != y {
                term += noise.rate(y, k) * losses[y * classes + k];
            }
        }
        term -= noise.marginal_noise(y) * losses[y * classes + y];
        lambda += term;
    }
    Ok(lambda / classes as f64)
}

/// Sample size entering the VC term; `Asymptotic` stands for the m → ∞
/// limit, where the term vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSize {
    Finite(u64),
    Asymptotic,
}

/// The four inputs of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Empirical error on the correctly labelled subset, ε⁺ ∈ [0, 1].
    pub eps_plus: f64,
    /// Divergence estimate between clean and noisy subsets, ∈ [0, 2].
    pub divergence: f64,
    pub vc_dim: u32,
    pub sample_size: SampleSize,
    pub delta: f64,
    /// Expected extra loss from label noise; may be negative.
    pub lambda: f64,
}

/// The four evaluated terms and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub term_error: f64,
    pub term_divergence: f64,
    pub term_vc: f64,
    pub term_lambda: f64,
    pub total: f64,
}

/// Composes the bound: `2·ε⁺ + ½·divergence + vc_term + λ`.
pub fn compose_bound(inputs: &BoundInputs) -> Result<BoundResult, BoundError> {
    if !(0.0..=1.0).contains(&inputs.eps_plus) {
        return Err(BoundError::OutOfRange {
            field: "eps_plus",
            range: "[0, 1]",
            value: inputs.eps_plus,
        });
    }
    if !(0.0..=2.0).contains(&inputs.divergence) {
        return Err(BoundError::OutOfRange {
            field: "divergence",
            range: "[0, 2]",
            value: inputs.divergence,
        });
    }
    let term_vc = match inputs.sample_size {
        SampleSize::Finite(m) => vc_generalization_term(inputs.vc_dim, m, inputs.delta)?,
        SampleSize::Asymptotic => {
            if !(inputs.delta > 0.0 && inputs.delta < 1.0) {
                return Err(BoundError::BadDelta(inputs.delta));
            }
            0.0
        }
    };
    let term_error = 2.0 * inputs.eps_plus;
    let term_divergence = 0.5 * inputs.divergence;
    let term_lambda = inputs.lambda;
    Ok(BoundResult {
        term_error,
        term_divergence,
        term_vc,
        term_lambda,
        total: term_error + term_divergence + term_vc + term_lambda,
    })
}

/// One run of the synthetic end-to-end check: everything needed to compare
/// the measured true error against the composed bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBoundReport {
    pub seed: u64,
    pub eta: f64,
    /// Error of the trained hypothesis on a large clean test set.
    pub measured_error: f64,
    pub inputs: BoundInputs,
    pub bound: BoundResult,
}

const SYNTH_TRAIN: usize = 1000;
const SYNTH_TEST: usize = 10_000;
const SYNTH_EPOCHS: u32 = 300;
const SYNTH_LR: f64 = 0.5;
const SYNTH_EPSILON: f64 = 0.1;
const SYNTH_DELTA: f64 = 0.1;
/// VC dimension of linear classifiers over 2-D features (2 weights + bias).
const SYNTH_VC_DIM: u32 = 3;

fn sample_two_blobs(rng: &mut ChaCha8Rng, count: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let normal = Normal::new(0.0, 1.0).expect("valid std");
    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % 2;
        let centre = if class == 0 { -1.5 } else { 1.5 };
        xs.push(alloc::vec![centre + normal.sample(rng), normal.sample(rng),]);
        ys.push(class);
    }
    (xs, ys)
}

/// Builds a 2-class problem with symmetric label noise `eta`, fits a linear
/// hypothesis on the noisy labels, estimates every bound term from the data,
/// and measures the true error on a large clean test set.
pub fn synthetic_bound_experiment(eta: f64, seed: u64) -> Result<SyntheticBoundReport, BoundError> {
    if !(0.0..1.0).contains(&eta) {
        return Err(BoundError::OutOfRange {
            field: "eta",
            range: "[0, 1)",
            value: eta,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train_x, train_true) = sample_two_blobs(&mut rng, SYNTH_TRAIN);
    let (test_x, test_true) = sample_two_blobs(&mut rng, SYNTH_TEST);

    let mut train_noisy = train_true.clone();
    for label in train_noisy.iter_mut() {
        if rand::Rng::gen::<f64>(&mut rng) < eta {
            *label = 1 - *label;
        }
    }

    let hypothesis = LinearSoftmax::fit(
        &train_x,
        &train_noisy,
        2,
        TrainingLoss::CrossEntropy,
        SYNTH_EPOCHS,
        SYNTH_LR,
    )
    .map_err(|e| BoundError::Experiment(alloc::format!("{e}")))?;

    // Partition training features by label correctness.
    let mut clean_x = Vec::new();
    let mut clean_y = Vec::new();
    let mut noisy_x = Vec::new();
    for ((x, &truth), &noisy) in train_x.iter().zip(&train_true).zip(&train_noisy) {
        if truth == noisy {
            clean_x.push(x.clone());
            clean_y.push(truth);
        } else {
            noisy_x.push(x.clone());
        }
    }
    if clean_x.is_empty() || noisy_x.is_empty() {
        return Err(BoundError::Experiment(String::from(
            "noise rate left one subset empty; use 0 < eta < 1 with enough samples",
        )));
    }

    let eps_plus = hypothesis.error_rate(&clean_x, &clean_y);
    let divergence = proxy_divergence(&clean_x, &noisy_x, seed)?;
    let m = clean_x.len().min(noisy_x.len()) as u64;

    // Class-conditional reverse-loss table measured on the clean test set.
    let noise = NoiseModel::symmetric(2, eta)?;
    let mut table = alloc::vec![0.0; 4];
    let mut counts = [0usize; 2];
    for (x, &y) in test_x.iter().zip(&test_true) {
        let probs = hypothesis.probabilities(x);
        counts[y] += 1;
        for k in 0..2 {
            table[y * 2 + k] += rce_loss(&probs, k, SYNTH_EPSILON)
                .map_err(|e| BoundError::Experiment(alloc::format!("{e}")))?;
        }
    }
    for y in 0..2 {
        for k in 0..2 {
            table[y * 2 + k] /= counts[y].max(1) as f64;
        }
    }
    let lambda = lambda_noise_term(&noise, &table)?;

    let inputs = BoundInputs {
        eps_plus,
        divergence,
        vc_dim: SYNTH_VC_DIM,
        sample_size: SampleSize::Finite(m),
        delta: SYNTH_DELTA,
        lambda,
    };
    let bound = compose_bound(&inputs)?;
    let measured_error = hypothesis.error_rate(&test_x, &test_true);

    Ok(SyntheticBoundReport {
        seed,
        eta,
        measured_error,
        inputs,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vc_term_matches_high_precision_evaluation() {
        // 2·sqrt((10·ln 200 + ln 20) / 100)
        let value = vc_generalization_term(10, 100, 0.1).unwrap();
        assert!((value - 1.4963810469133102).abs() < 1e-12, "got {value}");
    }

    #[test]
    fn vc_term_shrinks_with_more_samples() {
        let mut previous = f64::INFINITY;
        for m in [10, 100, 1_000, 10_000, 100_000_000] {
            let value = vc_generalization_term(10, m, 0.1).unwrap();
            assert!(value < previous, "m = {m}");
            previous = value;
        }
        assert!(previous < 0.01);
    }

    #[test]
    fn vc_term_rejects_bad_delta() {
        assert!(matches!(
            vc_generalization_term(10, 100, 2.0),
            Err(BoundError::BadDelta(_))
        ));
        assert!(matches!(
            vc_generalization_term(10, 100, 0.0),
            Err(BoundError::BadDelta(_))
        ));
    }

    fn gaussian_sample(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<Vec<f64>> {
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| alloc::vec![shift + normal.sample(rng), normal.sample(rng)])
            .collect()
    }

    #[test]
    fn same_distribution_divergence_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian_sample(&mut rng, 300, 0.0);
        let b = gaussian_sample(&mut rng, 300, 0.0);
        let d = proxy_divergence(&a, &b, 17).unwrap();
        assert!(d <= 0.3, "got {d}");
    }

    #[test]
    fn separated_clusters_divergence_is_near_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian_sample(&mut rng, 300, -8.0);
        let b = gaussian_sample(&mut rng, 300, 8.0);
        let d = proxy_divergence(&a, &b, 17).unwrap();
        assert!(d >= 1.7, "got {d}");
        // Symmetric in its arguments up to estimation noise.
        let swapped = proxy_divergence(&b, &a, 17).unwrap();
        assert!(swapped >= 1.7, "got {swapped}");
    }

    #[test]
    fn overlapping_mixture_is_intermediate_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = gaussian_sample(&mut rng, 400, -1.0);
        let b = gaussian_sample(&mut rng, 400, 1.0);
        let first = proxy_divergence(&a, &b, 23).unwrap();
        let second = proxy_divergence(&a, &b, 23).unwrap();
        assert_eq!(first, second);
        assert!(first > 0.3 && first < 1.9, "got {first}");
    }

    #[test]
    fn empty_sample_is_rejected() {
        let a: Vec<Vec<f64>> = alloc::vec![];
        let b = alloc::vec![alloc::vec![0.0, 1.0]];
        assert!(matches!(
            proxy_divergence(&a, &b, 0),
            Err(BoundError::EmptySample("plus"))
        ));
    }

    #[test]
    fn lambda_is_zero_without_noise() {
        let noise = NoiseModel::noiseless(3).unwrap();
        let table = alloc::vec![0.5; 9];
        assert_eq!(lambda_noise_term(&noise, &table).unwrap(), 0.0);
    }

    #[test]
    fn lambda_matches_hand_summation() {
        // Symmetric 2-class noise, eta = 0.3, table [[0.1, 2.0], [1.8, 0.2]]:
        // y=0: 0.3·2.0 − 0.3·0.1 = 0.57; y=1: 0.3·1.8 − 0.3·0.2 = 0.48;
        // uniform average = 0.525.
        let noise = NoiseModel::symmetric(2, 0.3).unwrap();
        let table = alloc::vec![0.1, 2.0, 1.8, 0.2];
        let lambda = lambda_noise_term(&noise, &table).unwrap();
        assert!((lambda - 0.525).abs() < 1e-12, "got {lambda}");
    }

    #[test]
    fn lambda_is_linear_in_the_loss_table() {
        let noise = NoiseModel::symmetric(3, 0.2).unwrap();
        let table: Vec<f64> = (0..9).map(|i| 0.1 + i as f64 * 0.3).collect();
        let base = lambda_noise_term(&noise, &table).unwrap();
        let scaled_table: Vec<f64> = table.iter().map(|&v| v * 2.5).collect();
        let scaled = lambda_noise_term(&noise, &scaled_table).unwrap();
        assert!((scaled - 2.5 * base).abs() < 1e-12);
    }

    #[test]
    fn noise_model_marginals_are_consistent() {
        let noise = NoiseModel::symmetric(4, 0.4).unwrap();
        for y in 0..4 {
            assert!((noise.marginal_noise(y) - 0.4).abs() < 1e-12);
        }
        assert!((noise.overall_rate() - 0.4).abs() < 1e-12);
        assert!(matches!(
            NoiseModel::symmetric(4, 1.0),
            Err(BoundError::OutOfRange { .. })
        ));
    }

    #[test]
    fn bound_composes_exactly() {
        let inputs = BoundInputs {
            eps_plus: 0.05,
            divergence: 0.4,
            vc_dim: 10,
            sample_size: SampleSize::Finite(100),
            delta: 0.1,
            lambda: 0.02,
        };
        let result = compose_bound(&inputs).unwrap();
        assert_eq!(result.term_error, 0.1);
        assert_eq!(result.term_divergence, 0.2);
        assert!((result.term_vc - 1.4963810469133102).abs() < 1e-12);
        assert_eq!(result.term_lambda, 0.02);
        assert_eq!(
            result.total,
            result.term_error + result.term_divergence + result.term_vc + result.term_lambda
        );
    }

    #[test]
    fn all_zero_inputs_with_asymptotic_samples_give_zero_total() {
        let inputs = BoundInputs {
            eps_plus: 0.0,
            divergence: 0.0,
            vc_dim: 10,
            sample_size: SampleSize::Asymptotic,
            delta: 0.1,
            lambda: 0.0,
        };
        let result = compose_bound(&inputs).unwrap();
        assert_eq!(result.total, 0.0);
    }

    #[test]
    fn bound_dominates_twice_eps_plus_for_nonnegative_lambda() {
        let inputs = BoundInputs {
            eps_plus: 0.3,
            divergence: 0.1,
            vc_dim: 5,
            sample_size: SampleSize::Finite(500),
            delta: 0.05,
            lambda: 0.0,
        };
        let result = compose_bound(&inputs).unwrap();
        assert!(result.total >= 2.0 * inputs.eps_plus);
    }

    #[test]
    fn synthetic_experiment_bound_holds() {
        let report = synthetic_bound_experiment(0.3, 0).unwrap();
        assert!(
            report.measured_error <= report.bound.total,
            "measured {} > bound {}",
            report.measured_error,
            report.bound.total
        );
        assert!(report.measured_error < 0.5);
    }
}
