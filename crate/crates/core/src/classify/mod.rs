//! The three learners behind one contract: Gaussian naive Bayes, a
//! C4.5-style decision tree (gain-ratio splits, pessimistic pruning), and
//! a linear SVM trained by Pegasos-style stochastic subgradient descent.
//!
//! All classifiers resolve exact decision ties toward benign, biasing
//! against false positives. Trained models are immutable and safe for
//! concurrent prediction.

mod naive_bayes;
mod svm;
mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::ClassLabel;

pub use naive_bayes::{train_naive_bayes, NaiveBayesModel, DEFAULT_VARIANCE_FLOOR};
pub use svm::{train_linear_svm, LinearSvmModel, SvmParams};
pub use tree::{train_decision_tree, DecisionTreeModel, TreeNode, TreeParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("length mismatch: {0} samples vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty training input")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    NaiveBayes,
    DecisionTree,
    LinearSvm,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierKind::NaiveBayes => write!(f, "Naive Bayes"),
            ClassifierKind::DecisionTree => write!(f, "Decision tree"),
            ClassifierKind::LinearSvm => write!(f, "SVM"),
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nb" | "naive_bayes" => Ok(ClassifierKind::NaiveBayes),
            "tree" | "decision_tree" => Ok(ClassifierKind::DecisionTree),
            "svm" | "linear_svm" => Ok(ClassifierKind::LinearSvm),
            other => Err(format!("unknown classifier {other:?} (nb|tree|svm)")),
        }
    }
}

/// A trained classifier with its kind-specific parameters, serialized as
/// explicit numeric structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel {
    NaiveBayes(NaiveBayesModel),
    DecisionTree(DecisionTreeModel),
    LinearSvm(LinearSvmModel),
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            ClassifierModel::DecisionTree(_) => ClassifierKind::DecisionTree,
            ClassifierModel::LinearSvm(_) => ClassifierKind::LinearSvm,
        }
    }

    pub fn dim_in(&self) -> usize {
        match self {
            ClassifierModel::NaiveBayes(m) => m.dim_in,
            ClassifierModel::DecisionTree(m) => m.dim_in,
            ClassifierModel::LinearSvm(m) => m.dim_in,
        }
    }
}

/// A hard label plus the kind-specific score it was derived from:
/// naive Bayes reports the log-posterior margin (malicious iff > 0), the
/// tree reports the leaf malicious fraction (malicious iff > 0.5), and the
/// SVM reports the signed margin (malicious iff > 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: ClassLabel,
    pub score: f64,
}

/// Classify one vector. Pure: never mutates the model.
pub fn predict(model: &ClassifierModel, x: &[f64]) -> Result<Prediction, ClassifyError> {
    if x.len() != model.dim_in() {
        return Err(ClassifyError::DimensionMismatch {
            expected: model.dim_in(),
            got: x.len(),
        });
    }
    Ok(match model {
        ClassifierModel::NaiveBayes(m) => m.predict(x),
        ClassifierModel::DecisionTree(m) => m.predict(x),
        ClassifierModel::LinearSvm(m) => m.predict(x),
    })
}
