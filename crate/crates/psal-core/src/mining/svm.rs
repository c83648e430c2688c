//! Seeded stochastic subgradient solver for the L2-regularized hinge loss.
//!
//! The objective is the primal max-margin form
//!
//! ```text
//! J(w, b) = 1/2 ||w||^2 + lambda * sum_i max(0, 1 - y_i (w . x_i + b))
//! ```
//!
//! solved Pegasos-style after dividing through by `lambda * n`: the bias is
//! carried as an extra always-one feature component, the step at iteration
//! `t` is `1 / (reg * t)`, and the returned model averages the second half
//! of the iterates. The budget is a fixed step count, not a convergence
//! test, so identical inputs and seed reproduce the model bit for bit.

use crate::error::{Error, Result};
use crate::rng::DetRng;

/// Linear max-margin classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_zero(&self) -> bool {
        self.bias == 0.0 && self.weights.iter().all(|&w| w == 0.0)
    }

    /// Raw decision value `w . x + b`.
    pub fn decision(&self, features: &[f32]) -> f64 {
        debug_assert_eq!(features.len(), self.weights.len());
        let mut acc = self.bias;
        for (w, x) in self.weights.iter().zip(features) {
            acc += w * *x as f64;
        }
        acc
    }
}

/// Epochs over the training set; the total step budget is
/// `max(EPOCHS * n, MIN_STEPS)`.
const EPOCHS: usize = 20;
const MIN_STEPS: usize = 2000;

/// Hinge objective `1/2 ||w||^2 + lambda * sum hinge` used by tests and by
/// the mining loop's sanity checks.
pub fn hinge_objective(
    model: &LinearModel,
    samples: &[&[f32]],
    labels: &[f64],
    lambda_reg: f64,
) -> f64 {
    let norm_sq: f64 = model.weights.iter().map(|w| w * w).sum();
    let hinge_sum: f64 = samples
        .iter()
        .zip(labels)
        .map(|(x, &y)| (1.0 - y * model.decision(x)).max(0.0))
        .sum();
    0.5 * norm_sq + lambda_reg * hinge_sum
}

/// Train on explicit positive and negative feature sets.
pub fn train_linear_svm(
    positives: &[&[f32]],
    negatives: &[&[f32]],
    lambda_reg: f64,
    seed: u64,
) -> Result<LinearModel> {
    if positives.is_empty() {
        return Err(Error::EmptyInput("positive"));
    }
    if negatives.is_empty() {
        return Err(Error::EmptyInput("negative"));
    }
    if lambda_reg <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda_reg must be positive, got {lambda_reg}"
        )));
    }
    let dim = positives[0].len();
    for x in positives.iter().chain(negatives) {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
    }

    let n = positives.len() + negatives.len();
    let samples: Vec<&[f32]> = positives.iter().chain(negatives).copied().collect();
    let labels: Vec<f64> = std::iter::repeat(1.0)
        .take(positives.len())
        .chain(std::iter::repeat(-1.0).take(negatives.len()))
        .collect();

    // Pegasos regularizer for the per-sample-mean objective.
    let reg = 1.0 / (lambda_reg * n as f64);
    let total_steps = (EPOCHS * n).max(MIN_STEPS);

    let mut rng = DetRng::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut pos_in_epoch = n; // force a shuffle before the first step

    // Augmented weight vector: `aug[dim]` is the bias component.
    let mut aug = vec![0.0_f64; dim + 1];
    let mut aug_sum = vec![0.0_f64; dim + 1];
    let average_from = total_steps / 2;
    let mut averaged = 0usize;

    for t in 1..=total_steps {
        if pos_in_epoch >= n {
            rng.shuffle(&mut order);
            pos_in_epoch = 0;
        }
        let i = order[pos_in_epoch];
        pos_in_epoch += 1;

        let x = samples[i];
        let y = labels[i];
        let mut margin = aug[dim]; // bias term, constant feature 1.0
        for (w, v) in aug[..dim].iter().zip(x) {
            margin += w * *v as f64;
        }
        margin *= y;

        let eta = 1.0 / (reg * t as f64);
        let scale = 1.0 - 1.0 / t as f64; // 1 - eta * reg
        for w in aug.iter_mut() {
            *w *= scale;
        }
        if margin < 1.0 {
            for (w, v) in aug[..dim].iter_mut().zip(x) {
                *w += eta * y * *v as f64;
            }
            aug[dim] += eta * y;
        }

        if t > average_from {
            for (s, w) in aug_sum.iter_mut().zip(&aug) {
                *s += *w;
            }
            averaged += 1;
        }
    }

    let inv = 1.0 / averaged as f64;
    let weights: Vec<f64> = aug_sum[..dim].iter().map(|s| s * inv).collect();
    let bias = aug_sum[dim] * inv;
    Ok(LinearModel { weights, bias })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_singletons_classified_with_margin() {
        let pos: Vec<f32> = vec![1.0, 0.0];
        let neg: Vec<f32> = vec![-1.0, 0.0];
        let model = train_linear_svm(&[&pos], &[&neg], 10.0, 1).unwrap();
        assert!(model.decision(&pos) >= 0.0);
        assert!(model.decision(&neg) <= 0.0);
        assert!(model.decision(&pos) - model.decision(&neg) > 0.5);
    }

    #[test]
    fn identical_positive_and_negative_straddles_zero() {
        let v: Vec<f32> = vec![0.3, -0.7, 0.2];
        let model = train_linear_svm(&[&v], &[&v], 10.0, 3).unwrap();
        assert!(
            model.decision(&v).abs() < 0.05,
            "decision {} should be near zero",
            model.decision(&v)
        );
        let obj = hinge_objective(&model, &[&v, &v], &[1.0, -1.0], 10.0);
        assert!(obj.is_finite());
    }

    #[test]
    fn separable_2d_cloud_reaches_full_training_accuracy() {
        let mut rng = DetRng::new(17);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for _ in 0..20 {
            pos.push(vec![
                (2.0 + 0.5 * rng.gaussian()) as f32,
                (2.0 + 0.5 * rng.gaussian()) as f32,
            ]);
            neg.push(vec![
                (-2.0 + 0.5 * rng.gaussian()) as f32,
                (-2.0 + 0.5 * rng.gaussian()) as f32,
            ]);
        }
        let pos_refs: Vec<&[f32]> = pos.iter().map(|v| v.as_slice()).collect();
        let neg_refs: Vec<&[f32]> = neg.iter().map(|v| v.as_slice()).collect();
        let model = train_linear_svm(&pos_refs, &neg_refs, 10.0, 5).unwrap();
        for x in &pos_refs {
            assert!(model.decision(x) > 0.0);
        }
        for x in &neg_refs {
            assert!(model.decision(x) < 0.0);
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let pos: Vec<Vec<f32>> = vec![vec![1.0, 0.2], vec![0.8, -0.1]];
        let neg: Vec<Vec<f32>> = vec![vec![-1.0, 0.3], vec![-0.7, 0.0]];
        let pr: Vec<&[f32]> = pos.iter().map(|v| v.as_slice()).collect();
        let nr: Vec<&[f32]> = neg.iter().map(|v| v.as_slice()).collect();
        let a = train_linear_svm(&pr, &nr, 10.0, 42).unwrap();
        let b = train_linear_svm(&pr, &nr, 10.0, 42).unwrap();
        assert_eq!(a, b);
        let c = train_linear_svm(&pr, &nr, 10.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_empty_classes_and_dimension_mismatch() {
        let v: Vec<f32> = vec![1.0];
        let w: Vec<f32> = vec![1.0, 2.0];
        assert!(train_linear_svm(&[], &[&v[..]], 10.0, 0).is_err());
        assert!(train_linear_svm(&[&v[..]], &[], 10.0, 0).is_err());
        assert!(train_linear_svm(&[&v[..]], &[&w[..]], 10.0, 0).is_err());
    }

    #[test]
    fn training_lowers_hinge_objective_below_zero_model() {
        let mut rng = DetRng::new(8);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for _ in 0..30 {
            pos.push(vec![(1.0 + 0.3 * rng.gaussian()) as f32, rng.gaussian() as f32]);
            neg.push(vec![(-1.0 + 0.3 * rng.gaussian()) as f32, rng.gaussian() as f32]);
        }
        let pr: Vec<&[f32]> = pos.iter().map(|v| v.as_slice()).collect();
        let nr: Vec<&[f32]> = neg.iter().map(|v| v.as_slice()).collect();
        let model = train_linear_svm(&pr, &nr, 10.0, 11).unwrap();

        let samples: Vec<&[f32]> = pr.iter().chain(&nr).copied().collect();
        let labels: Vec<f64> = std::iter::repeat(1.0)
            .take(pr.len())
            .chain(std::iter::repeat(-1.0).take(nr.len()))
            .collect();
        let zero = LinearModel::zeros(2);
        let j_trained = hinge_objective(&model, &samples, &labels, 10.0);
        let j_zero = hinge_objective(&zero, &samples, &labels, 10.0);
        assert!(j_trained < j_zero, "{j_trained} !< {j_zero}");
    }
}
