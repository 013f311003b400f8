//! Gaussian naive Bayes. Classifiers consume post-PCA vectors, which are
//! continuous, so each class models every dimension with an independent
//! Gaussian.

use serde::{Deserialize, Serialize};

use super::{ClassifierModel, ClassifyError, Prediction};
use crate::features::ClassLabel;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-9;

const LN_2PI: f64 = 1.837877066409345483560659472811;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub log_prior: f64,
    pub means: Vec<f64>,
    /// Population variances, floored at `variance_floor`.
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub dim_in: usize,
    pub malicious: ClassStats,
    pub benign: ClassStats,
    pub variance_floor: f64,
}

/// Fit per-class Gaussians with class-frequency priors.
pub fn train_naive_bayes(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    variance_floor: f64,
) -> Result<ClassifierModel, ClassifyError> {
    if x.len() != y.len() {
        return Err(ClassifyError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    let dim = x[0].len();
    let fit_class = |class: ClassLabel| -> Option<ClassStats> {
        let rows: Vec<&Vec<f64>> = x
            .iter()
            .zip(y)
            .filter(|(_, &label)| label == class)
            .map(|(row, _)| row)
            .collect();
        if rows.is_empty() {
            return None;
        }
        let count = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for row in &rows {
            for (m, v) in means.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= count;
        }
        let mut variances = vec![0.0; dim];
        for row in &rows {
            for ((var, m), v) in variances.iter_mut().zip(&means).zip(row.iter()) {
                let d = v - m;
                *var += d * d;
            }
        }
        for var in &mut variances {
            *var = (*var / count).max(variance_floor);
        }
        Some(ClassStats {
            log_prior: (count / x.len() as f64).ln(),
            means,
            variances,
        })
    };

    let (Some(malicious), Some(benign)) = (
        fit_class(ClassLabel::Malicious),
        fit_class(ClassLabel::Benign),
    ) else {
        return Err(ClassifyError::SingleClass);
    };

    Ok(ClassifierModel::NaiveBayes(NaiveBayesModel {
        dim_in: dim,
        malicious,
        benign,
        variance_floor,
    }))
}

impl NaiveBayesModel {
    /// Unnormalized log posteriors `(malicious, benign)`:
    /// `log prior + Σ_d log N(x_d; mean_d, var_d)`.
    pub fn log_posteriors(&self, x: &[f64]) -> (f64, f64) {
        let score = |stats: &ClassStats| {
            let mut lp = stats.log_prior;
            for ((value, mean), var) in x.iter().zip(&stats.means).zip(&stats.variances) {
                let d = value - mean;
                lp += -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var);
            }
            lp
        };
        (score(&self.malicious), score(&self.benign))
    }

    pub(super) fn predict(&self, x: &[f64]) -> Prediction {
        let (malicious, benign) = self.log_posteriors(x);
        let score = malicious - benign;
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
