//! Linear SVM trained by Pegasos-style stochastic subgradient descent on
//! the primal hinge loss, with learning rate `η_t = 1 / (λ·t)`.
//!
//! Inputs are standardized internally and the statistics are stored in the
//! model. The bias is trained as an extra always-one input dimension, so it
//! shares the regularizer and the Pegasos convergence behavior. Labels map
//! malicious → +1, benign → −1; training is bit-deterministic under a
//! fixed seed.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierModel, ClassifyError, Prediction};
use crate::features::ClassLabel;

const SVM_STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub dim_in: usize,
    /// Weights in standardized input space.
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Standardization statistics applied before the dot product.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub params: SvmParams,
}

fn signed(label: ClassLabel) -> f64 {
    match label {
        ClassLabel::Malicious => 1.0,
        ClassLabel::Benign => -1.0,
    }
}

/// Train on the primal hinge objective
/// `λ/2·‖w‖² + mean_i hinge(y_i · (w·x_i))` over standardized, bias-
/// augmented inputs.
pub fn train_linear_svm(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    params: SvmParams,
) -> Result<ClassifierModel, ClassifyError> {
    if x.len() != y.len() {
        return Err(ClassifyError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(ClassifyError::SingleClass);
    }
    let n = x.len();
    let dim = x[0].len();

    let mut means = vec![0.0; dim];
    for row in x {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; dim];
    for row in x {
        for ((s, m), v) in stds.iter_mut().zip(&means).zip(row) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in &mut stds {
        *s = (*s / (n - 1).max(1) as f64).sqrt().max(SVM_STD_FLOOR);
    }

    // Standardized rows with the constant bias input appended.
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            let mut r: Vec<f64> = row
                .iter()
                .zip(&means)
                .zip(&stds)
                .map(|((v, m), s)| (v - m) / s)
                .collect();
            r.push(1.0);
            r
        })
        .collect();

    let mut w = vec![0.0; dim + 1];
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    for _epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let yi = signed(y[i]);
            let margin: f64 = w.iter().zip(&rows[i]).map(|(a, b)| a * b).sum::<f64>() * yi;
            let shrink = 1.0 - 1.0 / t as f64;
            for value in &mut w {
                *value *= shrink;
            }
            if margin < 1.0 {
                for (value, feature) in w.iter_mut().zip(&rows[i]) {
                    *value += eta * yi * feature;
                }
            }
        }
    }

    let bias = w.pop().expect("augmented weight present");
    Ok(ClassifierModel::LinearSvm(LinearSvmModel {
        dim_in: dim,
        weights: w,
        bias,
        means,
        stds,
        params,
    }))
}

impl LinearSvmModel {
    /// Signed margin `w·standardize(x) + b`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .zip(self.means.iter().zip(&self.stds))
            .map(|((w, v), (m, s))| w * ((v - m) / s))
            .sum::<f64>()
            + self.bias
    }

    pub(super) fn predict(&self, x: &[f64]) -> Prediction {
        let score = self.margin(x);
        Prediction {
            label: if score > 0.0 {
                ClassLabel::Malicious
            } else {
                ClassLabel::Benign
            },
            score,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::predict;
    use ClassLabel::{Benign as B, Malicious as M};

    fn blobs(n_per_class: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<ClassLabel>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n_per_class {
            let jitter = (i as f64 * 0.37).sin() * 0.3;
            x.push(vec![gap + jitter, gap - jitter]);
            y.push(M);
            x.push(vec![-gap - jitter, -gap + jitter]);
            y.push(B);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_reach_full_training_accuracy() {
        let (x, y) = blobs(20, 3.0);
        let model = train_linear_svm(&x, &y, SvmParams::default()).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(predict(&model, xi).unwrap().label, yi);
        }
    }

    #[test]
    fn no_signal_falls_back_to_majority_behavior() {
        let x = vec![vec![1.0, 1.0]; 8];
        let y = vec![M, B, M, B, M, B, M, B];
        let model = train_linear_svm(&x, &y, SvmParams::default()).unwrap();
        // Identical inputs with mixed labels: one label is predicted for
        // all, so accuracy equals the majority-class fraction.
        let hits = x
            .iter()
            .zip(&y)
            .filter(|(xi, &yi)| predict(&model, xi).unwrap().label == yi)
            .count();
        assert_eq!(hits, 4);
    }

    #[test]
    fn fixed_seed_is_bit_deterministic() {
        let (x, y) = blobs(15, 2.0);
        let params = SvmParams {
            seed: 42,
            ..Default::default()
        };
        let ClassifierModel::LinearSvm(a) = train_linear_svm(&x, &y, params).unwrap() else {
            unreachable!()
        };
        let ClassifierModel::LinearSvm(b) = train_linear_svm(&x, &y, params).unwrap() else {
            unreachable!()
        };
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
        let other = SvmParams {
            seed: 43,
            ..Default::default()
        };
        let ClassifierModel::LinearSvm(c) = train_linear_svm(&x, &y, other).unwrap() else {
            unreachable!()
        };
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn hand_built_model_scores_by_definition() {
        let model = ClassifierModel::LinearSvm(LinearSvmModel {
            dim_in: 2,
            weights: vec![1.0, 0.0],
            bias: 0.0,
            means: vec![0.0, 0.0],
            stds: vec![1.0, 1.0],
            params: SvmParams::default(),
        });
        let p = predict(&model, &[2.0, 5.0]).unwrap();
        assert_eq!(p.label, M);
        assert_eq!(p.score, 2.0);
    }

    #[test]
    fn objective_beats_zero_vector_on_separable_data() {
        let (x, y) = blobs(25, 2.5);
        let ClassifierModel::LinearSvm(model) =
            train_linear_svm(&x, &y, SvmParams::default()).unwrap()
        else {
            unreachable!()
        };
        let lambda = model.params.lambda;
        let norm2: f64 = model.weights.iter().map(|w| w * w).sum::<f64>() + model.bias * model.bias;
        let mean_hinge: f64 = x
            .iter()
            .zip(&y)
            .map(|(xi, &yi)| (1.0 - signed(yi) * model.margin(xi)).max(0.0))
            .sum::<f64>()
            / x.len() as f64;
        let objective = lambda / 2.0 * norm2 + mean_hinge;
        assert!(objective <= 1.0, "objective {objective} worse than w = 0");
    }

    #[test]
    fn rejects_single_class() {
        let x = vec![vec![0.0], vec![1.0]];
        assert_eq!(
            train_linear_svm(&x, &[M, M], SvmParams::default()),
            Err(ClassifyError::SingleClass)
        );
    }
}
