//! Minimal multinomial logistic regression trained by full-batch gradient
//! descent. Deliberately tiny: it backs the noise-robustness demo and the
//! divergence/bound experiments, which only need a deterministic linear
//! hypothesis.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math::{ln, softmax};

#[derive(Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature/label lengths differ: {features} vs {labels}")]
    LengthMismatch { features: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("inconsistent feature dimension: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training parameter: {0}")]
    BadParameter(String),
}

/// Loss driving the weight updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainingLoss {
    CrossEntropy,
    /// Forward cross-entropy plus the reverse term against smoothed one-hot
    /// targets with the given smoothing mass.
    SymmetricCrossEntropy {
        epsilon: f64,
    },
}

/// A linear softmax classifier; weights are laid out per class with the bias
/// in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmax {
    classes: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl LinearSoftmax {
    /// Fits with full-batch gradient descent from zero-initialised weights,
    /// so training is deterministic for fixed inputs.
    pub fn fit(
        features: &[Vec<f64>],
        labels: &[usize],
        classes: usize,
        loss: TrainingLoss,
        epochs: u32,
        learning_rate: f64,
    ) -> Result<Self, LinearError> {
        if features.is_empty() {
            return Err(LinearError::EmptyTrainingSet);
        }
        if features.len() != labels.len() {
            return Err(LinearError::LengthMismatch {
                features: features.len(),
                labels: labels.len(),
            });
        }
        if classes < 2 {
            return Err(LinearError::BadParameter(String::from(
                "need at least two classes",
            )));
        }
        if learning_rate.is_nan() || learning_rate <= 0.0 {
            return Err(LinearError::BadParameter(String::from(
                "learning rate must be positive",
            )));
        }
        if let TrainingLoss::SymmetricCrossEntropy { epsilon } = loss {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(LinearError::BadParameter(String::from(
                    "smoothing epsilon must lie in (0, 1)",
                )));
            }
        }
        let dim = features[0].len();
        for row in features {
            if row.len() != dim {
                return Err(LinearError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        for &label in labels {
            if label >= classes {
                return Err(LinearError::LabelOutOfRange { label, classes });
            }
        }

        let mut model = Self {
            classes,
            dim,
            weights: alloc::vec![0.0; classes * (dim + 1)],
        };
        let n = features.len() as f64;
        let mut grad = alloc::vec![0.0; model.weights.len()];
        for _ in 0..epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (x, &y) in features.iter().zip(labels) {
                let probs = model.probabilities(x);
                let logit_grad = logit_gradient(&probs, y, classes, loss);
                for (c, &g_logit) in logit_grad.iter().enumerate() {
                    let row = c * (dim + 1);
                    for (j, &xj) in x.iter().enumerate() {
                        grad[row + j] += g_logit * xj;
                    }
                    grad[row + dim] += g_logit;
                }
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= learning_rate * g / n;
            }
        }
        Ok(model)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * (self.dim + 1)..(c + 1) * (self.dim + 1)];
                crate::math::dot(&row[..self.dim], x) + row[self.dim]
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (c, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = c;
            }
        }
        best
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        if features.is_empty() {
            return 0.0;
        }
        let correct = features
            .iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        correct as f64 / features.len() as f64
    }

    pub fn error_rate(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        1.0 - self.accuracy(features, labels)
    }
}

/// d(loss)/d(logits) for one sample.
fn logit_gradient(probs: &[f64], label: usize, classes: usize, loss: TrainingLoss) -> Vec<f64> {
    let mut grad: Vec<f64> = probs.to_vec();
    grad[label] -= 1.0; // forward cross-entropy: p − onehot
    if let TrainingLoss::SymmetricCrossEntropy { epsilon } = loss {
        let log_on = ln(1.0 - epsilon);
        let log_off = ln(epsilon / (classes - 1) as f64);
        let mut expectation = 0.0;
        for (w, &p) in probs.iter().enumerate() {
            expectation += p * if w == label { log_on } else { log_off };
        }
        for (v, g) in grad.iter_mut().enumerate() {
            let log_target = if v == label { log_on } else { log_off };
            *g += -probs[v] * (log_target - expectation);
        }
    }
    grad
}
