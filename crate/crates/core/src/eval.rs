//! Stratified 10-fold cross-validation, the DR/FPR/OA metrics, and the
//! feature-family × classifier experiment matrix.
//!
//! The default protocol is leak-free: feature rankings, bin edges, PCA
//! statistics, and classifier parameters are refit on the nine training
//! folds of every round, so the held-out fold influences nothing. The
//! alternative `GlobalFit` protocol fits selection and PCA once on the
//! full corpus before cross-validating (only the classifier is refit per
//! fold); it leaks test information into the transform and exists for
//! comparison against that common shortcut.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::ClassifierKind;
use crate::features::{ClassLabel, Corpus, RawFeatureRecord};
use crate::pipeline::{fit_stages, FamilySet, FittedStages, PipelineConfig, PipelineError};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fold count {k} too large: class {class} has only {count} samples")]
    FoldTooSmall {
        k: usize,
        class: ClassLabel,
        count: usize,
    },
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("corpus has no labeled records")]
    EmptyCorpus,
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: PipelineError,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("metric undefined: denominator {denominator} is zero")]
pub struct UndefinedMetric {
    pub denominator: &'static str,
}

/// Confusion-matrix counts. Positives are malicious.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn record(&mut self, actual: ClassLabel, predicted: ClassLabel) {
        match (actual, predicted) {
            (ClassLabel::Malicious, ClassLabel::Malicious) => self.tp += 1,
            (ClassLabel::Malicious, ClassLabel::Benign) => self.fn_ += 1,
            (ClassLabel::Benign, ClassLabel::Malicious) => self.fp += 1,
            (ClassLabel::Benign, ClassLabel::Benign) => self.tn += 1,
        }
    }
}

fn percentage(
    numerator: usize,
    denominator: usize,
    name: &'static str,
) -> Result<f64, UndefinedMetric> {
    if denominator == 0 {
        return Err(UndefinedMetric { denominator: name });
    }
    Ok(numerator as f64 * 100.0 / denominator as f64)
}

/// Detection rate `TP / (TP + FN) · 100%`.
pub fn detection_rate(c: &ConfusionCounts) -> Result<f64, UndefinedMetric> {
    percentage(c.tp, c.tp + c.fn_, "TP+FN")
}

/// False positive rate `FP / (TN + FP) · 100%`.
pub fn false_positive_rate(c: &ConfusionCounts) -> Result<f64, UndefinedMetric> {
    percentage(c.fp, c.tn + c.fp, "TN+FP")
}

/// Overall accuracy `(TP + TN) / (TP + TN + FP + FN) · 100%`.
pub fn overall_accuracy(c: &ConfusionCounts) -> Result<f64, UndefinedMetric> {
    percentage(c.tp + c.tn, c.total(), "TP+TN+FP+FN")
}

/// Counts with their derived percentages. An undefined metric (zero
/// denominator) is reported as absent, never as 0 or 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub dr: Option<f64>,
    pub fpr: Option<f64>,
    pub oa: Option<f64>,
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        Self {
            counts,
            dr: detection_rate(&counts).ok(),
            fpr: false_positive_rate(&counts).ok(),
            oa: overall_accuracy(&counts).ok(),
        }
    }
}

/// Assign every labeled sample to one of `k` folds: per class, a seeded
/// shuffle followed by round-robin assignment, so per-class fold sizes
/// differ by at most one.
pub fn stratified_folds(
    labels: &[ClassLabel],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::TooFewFolds(k));
    }
    if labels.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    for class in [ClassLabel::Malicious, ClassLabel::Benign] {
        let mut indices: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        if indices.len() < k {
            return Err(EvalError::FoldTooSmall {
                k,
                class,
                count: indices.len(),
            });
        }
        indices.shuffle(&mut rng);
        for (position, index) in indices.into_iter().enumerate() {
            assignment[index] = position % k;
        }
    }
    Ok(assignment)
}

/// Selection/PCA fitting discipline during cross-validation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Refit selection, PCA, and classifier on training folds only.
    #[default]
    LeakFree,
    /// Fit selection and PCA once on the full corpus, refit only the
    /// classifier per fold. Leaks held-out information; for comparison.
    GlobalFit,
}

/// Result of one (feature family, classifier) cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub feature_family: FamilySet,
    pub classifier: ClassifierKind,
    pub folds: Vec<MetricsReport>,
    /// Micro-average: metrics of the pooled per-fold counts.
    pub aggregate: MetricsReport,
    /// SHA-256 of each fold's serialized fitted stages; lets callers verify
    /// that held-out data never influenced training.
    pub fold_model_digests: Vec<String>,
    pub protocol: Protocol,
    pub seed: u64,
}

fn stages_digest(stages: &FittedStages) -> String {
    let bytes = serde_json::to_vec(stages).expect("stages serialize");
    hex::encode(Sha256::digest(bytes))
}

fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The stage seed [`cross_validate`] derives for one fold. Exposed so a
/// fold's training can be replayed externally and compared bit-for-bit
/// against `fold_model_digests`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    mix_seed(seed, fold as u64)
}

/// SHA-256 of the serialized fitted stages, as recorded per fold in
/// [`ExperimentResult::fold_model_digests`].
pub fn fitted_stages_digest(stages: &FittedStages) -> String {
    stages_digest(stages)
}

/// Stratified k-fold cross-validation of one pipeline configuration.
/// Unlabeled records are excluded. Per-fold counts are pooled into the
/// aggregate; folds run independently and merge by fold index.
pub fn cross_validate(
    corpus: &Corpus,
    config: &PipelineConfig,
    k: usize,
    seed: u64,
    protocol: Protocol,
) -> Result<ExperimentResult, EvalError> {
    let records: Vec<&RawFeatureRecord> = corpus
        .records()
        .iter()
        .filter(|r| r.label.as_class().is_some())
        .collect();
    let labels: Vec<ClassLabel> = records
        .iter()
        .map(|r| r.label.as_class().expect("filtered"))
        .collect();
    let assignment = stratified_folds(&labels, k, seed)?;

    // GlobalFit trains its shared selection + PCA once, up front.
    let global_stages = match protocol {
        Protocol::LeakFree => None,
        Protocol::GlobalFit => {
            let mut cfg = config.clone();
            cfg.seed = mix_seed(seed, u64::MAX);
            Some(fit_stages(&records, &cfg).map_err(|e| EvalError::Fold { fold: 0, source: e })?)
        }
    };

    let mut folds = Vec::with_capacity(k);
    let mut digests = Vec::with_capacity(k);
    let mut aggregate = ConfusionCounts::default();
    for fold in 0..k {
        let train: Vec<&RawFeatureRecord> = records
            .iter()
            .zip(&assignment)
            .filter(|(_, &f)| f != fold)
            .map(|(&r, _)| r)
            .collect();
        let test: Vec<(&RawFeatureRecord, ClassLabel)> = records
            .iter()
            .zip(&labels)
            .zip(&assignment)
            .filter(|((_, _), &f)| f == fold)
            .map(|((&r, &l), _)| (r, l))
            .collect();

        let mut fold_config = config.clone();
        fold_config.seed = mix_seed(seed, fold as u64);
        let stages = match (&global_stages, protocol) {
            (Some(global), Protocol::GlobalFit) => {
                // Keep the global selection + PCA, refit the classifier on
                // the training folds through the shared transform.
                let mut stages = global.clone();
                let reduced: Vec<Vec<f64>> = train
                    .iter()
                    .map(|r| {
                        let v = crate::select::vectorize(r, &stages.schema);
                        crate::pca::pca_transform(&stages.pca, &v).expect("schema matches")
                    })
                    .collect();
                let train_labels: Vec<ClassLabel> = train
                    .iter()
                    .map(|r| r.label.as_class().expect("labeled"))
                    .collect();
                let classifier = retrain_classifier(&fold_config, &reduced, &train_labels)
                    .map_err(|e| EvalError::Fold { fold, source: e })?;
                stages.classifier = classifier;
                stages
            }
            _ => {
                fit_stages(&train, &fold_config).map_err(|e| EvalError::Fold { fold, source: e })?
            }
        };

        let mut counts = ConfusionCounts::default();
        for (record, actual) in &test {
            let prediction = stages
                .apply(record)
                .map_err(|e| EvalError::Fold { fold, source: e })?;
            counts.record(*actual, prediction.label);
        }
        aggregate.add(&counts);
        folds.push(MetricsReport::from_counts(counts));
        digests.push(stages_digest(&stages));
    }

    Ok(ExperimentResult {
        feature_family: config.families,
        classifier: config.classifier,
        folds,
        aggregate: MetricsReport::from_counts(aggregate),
        fold_model_digests: digests,
        protocol,
        seed,
    })
}

fn retrain_classifier(
    config: &PipelineConfig,
    reduced: &[Vec<f64>],
    labels: &[ClassLabel],
) -> Result<crate::classify::ClassifierModel, PipelineError> {
    use crate::classify::{train_decision_tree, train_linear_svm, train_naive_bayes, SvmParams};
    match config.classifier {
        ClassifierKind::NaiveBayes => train_naive_bayes(reduced, labels, config.nb_variance_floor),
        ClassifierKind::DecisionTree => train_decision_tree(reduced, labels, config.tree_params),
        ClassifierKind::LinearSvm => train_linear_svm(
            reduced,
            labels,
            SvmParams {
                lambda: config.svm_lambda,
                epochs: config.svm_epochs,
                seed: config.seed,
            },
        ),
    }
    .map_err(|e| PipelineError::Stage {
        stage: "classifier",
        message: e.to_string(),
    })
}

/// Cross-validate every (feature family, classifier kind) pair. Hybrid
/// families concatenate the per-family selected schemas before PCA.
pub fn run_experiment_matrix(
    corpus: &Corpus,
    families: &[FamilySet],
    kinds: &[ClassifierKind],
    base_config: &PipelineConfig,
    k: usize,
    seed: u64,
    protocol: Protocol,
) -> Result<Vec<ExperimentResult>, EvalError> {
    let mut results = Vec::with_capacity(families.len() * kinds.len());
    for &family in families {
        for &kind in kinds {
            let mut config = base_config.clone();
            config.families = family;
            config.classifier = kind;
            results.push(cross_validate(corpus, &config, k, seed, protocol)?);
        }
    }
    Ok(results)
}
