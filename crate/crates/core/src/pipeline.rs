//! Pipeline composition: selection → vectorization → PCA → classifier,
//! persisted as one self-describing text document, plus the directory scan
//! workflow that applies a persisted model file by file.
//!
//! `(corpus bytes, config, seed)` fully determine the saved model bytes;
//! nothing time- or environment-dependent is recorded. Scanning may run
//! file extraction in parallel but always reports entries in lexicographic
//! path order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::behavior::{categorize_behaviors, BehaviorCategoryMap};
use crate::classify::{
    predict, train_decision_tree, train_linear_svm, train_naive_bayes, ClassifierKind,
    ClassifierModel, Prediction, SvmParams, TreeParams, DEFAULT_VARIANCE_FLOOR,
};
use crate::features::{content_hash, extract_raw, ClassLabel, Corpus, Label, RawFeatureRecord};
use crate::pca::{pca_fit, pca_transform, PcaModel, PcaTarget};
use crate::pe::{detect_packer, is_pe, parse_pe};
use crate::select::{
    rank_call_frequency_records, rank_header_features_records, select_records, FeatureFamily,
    FeatureSchema, SelectionModel, DEFAULT_BINS, DEFAULT_K_API, DEFAULT_K_DLL, DEFAULT_K_HEADER,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("model format error: {0}")]
    Format(String),
    #[error("model format version {found} not supported (this build reads version {supported})")]
    Version { found: u32, supported: u32 },
    #[error("{stage} stage failed: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

fn stage(stage: &'static str, err: impl fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage,
        message: err.to_string(),
    }
}

/// Which feature families enter the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySet {
    pub header: bool,
    pub dll: bool,
    pub api: bool,
}

impl FamilySet {
    pub const HEADER: FamilySet = FamilySet {
        header: true,
        dll: false,
        api: false,
    };
    pub const DLL: FamilySet = FamilySet {
        header: false,
        dll: true,
        api: false,
    };
    pub const API: FamilySet = FamilySet {
        header: false,
        dll: false,
        api: true,
    };
    pub const HEADER_DLL: FamilySet = FamilySet {
        header: true,
        dll: true,
        api: false,
    };
    pub const HEADER_API: FamilySet = FamilySet {
        header: true,
        dll: false,
        api: true,
    };
    pub const ALL: FamilySet = FamilySet {
        header: true,
        dll: true,
        api: true,
    };

    /// The six feature-family rows of the experiment matrix, in report
    /// order: individual families first, then the hybrid sets.
    pub fn experiment_rows() -> [FamilySet; 6] {
        [
            Self::HEADER,
            Self::API,
            Self::DLL,
            Self::HEADER_DLL,
            Self::HEADER_API,
            Self::ALL,
        ]
    }
}

impl fmt::Display for FamilySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.header, self.dll, self.api) {
            (true, true, true) => write!(f, "ALL"),
            (true, false, false) => write!(f, "PE header"),
            (false, true, false) => write!(f, "DLLs"),
            (false, false, true) => write!(f, "API functions"),
            (true, true, false) => write!(f, "PE header&DLLs"),
            (true, false, true) => write!(f, "PE header&API functions"),
            (false, true, true) => write!(f, "DLLs&API functions"),
            (false, false, false) => write!(f, "none"),
        }
    }
}

/// Everything that determines a trained pipeline besides the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub families: FamilySet,
    pub k_header: usize,
    pub k_dll: usize,
    pub k_api: usize,
    pub n_bins: usize,
    pub pca_target: PcaTarget,
    pub classifier: ClassifierKind,
    pub tree_params: TreeParams,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub nb_variance_floor: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            families: FamilySet::ALL,
            k_header: DEFAULT_K_HEADER,
            k_dll: DEFAULT_K_DLL,
            k_api: DEFAULT_K_API,
            n_bins: DEFAULT_BINS,
            pca_target: PcaTarget::default(),
            classifier: ClassifierKind::DecisionTree,
            tree_params: TreeParams::default(),
            svm_lambda: 1e-4,
            svm_epochs: 50,
            nb_variance_floor: DEFAULT_VARIANCE_FLOOR,
            seed: 0,
        }
    }
}

/// The fitted stages, before packaging into a [`PipelineModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStages {
    pub selection: SelectionModel,
    pub schema: FeatureSchema,
    pub pca: PcaModel,
    pub classifier: ClassifierModel,
}

impl FittedStages {
    /// Vectorize, reduce, and classify one record against these stages.
    pub fn apply(&self, record: &RawFeatureRecord) -> Result<Prediction, PipelineError> {
        let vector = crate::select::vectorize(record, &self.schema);
        let reduced = pca_transform(&self.pca, &vector).map_err(|e| stage("pca", e))?;
        predict(&self.classifier, &reduced).map_err(|e| stage("classifier", e))
    }
}

/// Fit selection, PCA, and the classifier on `records` only. Records
/// without a malicious/benign label are ignored. A fixed component-count
/// PCA target is clamped to the schema dimension so one configuration can
/// serve feature families of different sizes.
pub fn fit_stages(
    records: &[&RawFeatureRecord],
    config: &PipelineConfig,
) -> Result<FittedStages, PipelineError> {
    let labeled: Vec<&RawFeatureRecord> = records
        .iter()
        .copied()
        .filter(|r| r.label.as_class().is_some())
        .collect();
    let labels: Vec<ClassLabel> = labeled
        .iter()
        .map(|r| r.label.as_class().expect("filtered"))
        .collect();
    if labeled.is_empty() {
        return Err(stage("selection", "no labeled records"));
    }

    let k_header = if config.families.header {
        config.k_header
    } else {
        0
    };
    let k_dll = if config.families.dll { config.k_dll } else { 0 };
    let k_api = if config.families.api { config.k_api } else { 0 };

    let header_ranking = if k_header > 0 {
        rank_header_features_records(&labeled, config.n_bins).map_err(|e| stage("selection", e))?
    } else {
        crate::select::HeaderRanking {
            features: Vec::new(),
            degenerate: false,
        }
    };
    let dll_ranking = rank_call_frequency_records(&labeled, FeatureFamily::Dll);
    let api_ranking = rank_call_frequency_records(&labeled, FeatureFamily::Api);

    let selection = select_records(
        &labeled,
        &header_ranking,
        &dll_ranking,
        &api_ranking,
        k_header,
        k_dll,
        k_api,
        config.n_bins,
    );
    let schema = selection.schema();
    if schema.dimension() == 0 {
        return Err(stage("selection", "selected schema is empty"));
    }

    let vectors: Vec<_> = labeled
        .iter()
        .map(|r| crate::select::vectorize(r, &schema))
        .collect();

    let pca_target = match config.pca_target {
        PcaTarget::Components(k) => PcaTarget::Components(k.min(schema.dimension())),
        fraction => fraction,
    };
    let pca = pca_fit(&vectors, pca_target).map_err(|e| stage("pca", e))?;

    let reduced: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| pca_transform(&pca, v).expect("fitted on same schema"))
        .collect();

    let classifier = match config.classifier {
        ClassifierKind::NaiveBayes => {
            train_naive_bayes(&reduced, &labels, config.nb_variance_floor)
        }
        ClassifierKind::DecisionTree => train_decision_tree(&reduced, &labels, config.tree_params),
        ClassifierKind::LinearSvm => train_linear_svm(
            &reduced,
            &labels,
            SvmParams {
                lambda: config.svm_lambda,
                epochs: config.svm_epochs,
                seed: config.seed,
            },
        ),
    }
    .map_err(|e| stage("classifier", e))?;

    Ok(FittedStages {
        selection,
        schema,
        pca,
        classifier,
    })
}

/// Reproducibility metadata recorded with a trained model. Deliberately
/// free of wall-clock state so retraining with identical inputs yields a
/// byte-identical file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub corpus_digest: String,
    pub seed: u64,
    pub config: PipelineConfig,
    /// Overall accuracy (%) of the model on its own training corpus.
    pub training_oa: f64,
    pub tool_version: String,
}

/// A persisted pipeline: schema, selection, PCA, classifier, metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format_version: u32,
    #[serde(flatten)]
    pub stages: FittedStages,
    pub metadata: ModelMetadata,
}

/// Train on the full corpus and package the result.
pub fn build_pipeline(
    corpus: &Corpus,
    config: &PipelineConfig,
) -> Result<PipelineModel, PipelineError> {
    let records: Vec<&RawFeatureRecord> = corpus.records().iter().collect();
    let stages = fit_stages(&records, config)?;

    let mut hits = 0usize;
    let mut total = 0usize;
    for record in &records {
        let Some(class) = record.label.as_class() else {
            continue;
        };
        total += 1;
        if stages.apply(record)?.label == class {
            hits += 1;
        }
    }
    let training_oa = if total == 0 {
        0.0
    } else {
        hits as f64 * 100.0 / total as f64
    };

    Ok(PipelineModel {
        format_version: MODEL_FORMAT_VERSION,
        stages,
        metadata: ModelMetadata {
            corpus_digest: corpus.digest(),
            seed: config.seed,
            config: config.clone(),
            training_oa,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Write the model as pretty-printed JSON (explicit numeric arrays, no
/// opaque blobs).
pub fn save_model(model: &PipelineModel, path: &Path) -> Result<(), PipelineError> {
    let text =
        serde_json::to_string_pretty(model).map_err(|e| PipelineError::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Read a model file, rejecting unknown format versions and inconsistent
/// stage chaining.
pub fn load_model(path: &Path) -> Result<PipelineModel, PipelineError> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| PipelineError::Format(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| PipelineError::Format("missing format_version".into()))?
        as u32;
    if found != MODEL_FORMAT_VERSION {
        return Err(PipelineError::Version {
            found,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let model: PipelineModel =
        serde_json::from_value(value).map_err(|e| PipelineError::Format(e.to_string()))?;

    // The schema must chain through PCA into the classifier.
    if model.stages.pca.schema_id != model.stages.schema.digest() {
        return Err(PipelineError::Format(
            "PCA model is bound to a different schema".into(),
        ));
    }
    if model.stages.classifier.dim_in() != model.stages.pca.dim_out {
        return Err(PipelineError::Format(format!(
            "classifier expects {} inputs but PCA produces {}",
            model.stages.classifier.dim_in(),
            model.stages.pca.dim_out
        )));
    }
    if model.stages.schema != model.stages.selection.schema() {
        return Err(PipelineError::Format(
            "schema does not match the selection model".into(),
        ));
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStatus {
    Classified,
    SkippedNotPe,
    SkippedPacked,
    Error,
}

impl fmt::Display for ScanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanStatus::Classified => write!(f, "classified"),
            ScanStatus::SkippedNotPe => write!(f, "skipped_not_pe"),
            ScanStatus::SkippedPacked => write!(f, "skipped_packed"),
            ScanStatus::Error => write!(f, "error"),
        }
    }
}

/// Outcome for one scanned file. `prediction` is present exactly when
/// `status` is `Classified`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub path: String,
    pub status: ScanStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    pub behavior_category_counts: BTreeMap<String, usize>,
    /// Packer evidence or error message, when relevant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub recursive: bool,
    pub skip_packed: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            recursive: true,
            skip_packed: true,
        }
    }
}

/// Scan every regular file under `root` with a trained model. Files that
/// are not PE format are skipped; per-file failures become `Error` entries
/// and never abort the traversal. Entries come back sorted by path.
pub fn scan_directory(
    root: &Path,
    model: &PipelineModel,
    behavior_map: &BehaviorCategoryMap,
    options: ScanOptions,
) -> Result<Vec<ScanEntry>, PipelineError> {
    if !root.exists() {
        return Err(PipelineError::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!("{} does not exist", root.display()),
        )));
    }
    let mut walker = WalkDir::new(root);
    if !options.recursive {
        walker = walker.max_depth(1);
    }
    let mut paths = Vec::new();
    for entry in walker {
        match entry {
            Ok(e) if e.file_type().is_file() => paths.push(e.into_path()),
            Ok(_) => {}
            Err(e) => {
                let path = e
                    .path()
                    .map(|p| p.to_string_lossy().into_owned())
                    .unwrap_or_else(|| root.to_string_lossy().into_owned());
                paths.push(Path::new(&path).to_path_buf());
            }
        }
    }
    paths.sort();

    let entries: Vec<ScanEntry> = paths
        .par_iter()
        .map(|path| scan_one(path, model, behavior_map, options))
        .collect();
    Ok(entries)
}

fn scan_one(
    path: &Path,
    model: &PipelineModel,
    behavior_map: &BehaviorCategoryMap,
    options: ScanOptions,
) -> ScanEntry {
    let display = path.to_string_lossy().into_owned();
    let empty_counts = || {
        crate::behavior::CATEGORY_NAMES
            .iter()
            .map(|&c| (c.to_string(), 0))
            .collect::<BTreeMap<_, _>>()
    };
    let error_entry = |message: String| ScanEntry {
        path: display.clone(),
        status: ScanStatus::Error,
        prediction: None,
        behavior_category_counts: empty_counts(),
        detail: Some(message),
    };

    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return error_entry(format!("read failed: {e}")),
    };
    if !is_pe(&bytes) {
        return ScanEntry {
            path: display,
            status: ScanStatus::SkippedNotPe,
            prediction: None,
            behavior_category_counts: empty_counts(),
            detail: None,
        };
    }
    let pe = match parse_pe(&bytes) {
        Ok(pe) => pe,
        Err(e) => return error_entry(e.to_string()),
    };
    let hint = detect_packer(&pe);
    if hint.likely_packed && options.skip_packed {
        return ScanEntry {
            path: display,
            status: ScanStatus::SkippedPacked,
            prediction: None,
            behavior_category_counts: empty_counts(),
            detail: Some(hint.evidence.join("; ")),
        };
    }

    let record = extract_raw(&pe, Label::Unlabeled, &display, content_hash(&bytes));
    let prediction = match model.stages.apply(&record) {
        Ok(p) => p,
        Err(e) => return error_entry(e.to_string()),
    };
    let counts = categorize_behaviors(&record.api_names, behavior_map);
    ScanEntry {
        path: display,
        status: ScanStatus::Classified,
        prediction: Some(prediction),
        behavior_category_counts: counts,
        detail: if hint.likely_packed {
            Some(format!("classified despite: {}", hint.evidence.join("; ")))
        } else {
            None
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{read_corpus, write_corpus, AppendOutcome};
    use crate::synth::{build_pe, gen_corpus, profiles};

    fn small_corpus(seed: u64) -> Corpus {
        let (mal, ben) = profiles::separable(12, 12, seed);
        let mut corpus = Corpus::new();
        for (profile, label) in [(mal, Label::Malicious), (ben, Label::Benign)] {
            for i in 0..profile.sample_count {
                let bytes = build_pe(&profile.draw_spec(i).unwrap()).unwrap();
                let pe = parse_pe(&bytes).unwrap();
                let record = extract_raw(&pe, label, &format!("{label}/{i}"), content_hash(&bytes));
                assert_eq!(corpus.append(record), AppendOutcome::Added);
            }
        }
        corpus
    }

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            k_header: 20,
            k_dll: 16,
            k_api: 40,
            pca_target: PcaTarget::Components(8),
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn schema_dimension_follows_min_rule() {
        let corpus = small_corpus(1);
        let model = build_pipeline(&corpus, &small_config()).unwrap();
        let schema = &model.stages.schema;
        assert_eq!(schema.header.len(), 20);
        assert!(schema.dll.len() <= 16);
        assert!(schema.api.len() <= 40);
        assert_eq!(
            schema.dimension(),
            schema.header.len() + schema.dll.len() + schema.api.len()
        );
    }

    #[test]
    fn separable_corpus_trains_to_full_accuracy() {
        let corpus = small_corpus(2);
        let model = build_pipeline(&corpus, &small_config()).unwrap();
        assert_eq!(model.metadata.training_oa, 100.0);
    }

    #[test]
    fn rebuild_is_deterministic() {
        let corpus = small_corpus(3);
        let config = small_config();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        save_model(&build_pipeline(&corpus, &config).unwrap(), &a).unwrap();
        save_model(&build_pipeline(&corpus, &config).unwrap(), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn model_round_trips_and_rejects_bad_files() {
        let corpus = small_corpus(4);
        let model = build_pipeline(&corpus, &small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);

        // Truncated file.
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(PipelineError::Format(_))));

        // Wrong version.
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["format_version"] = serde_json::json!(999);
        fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        match load_model(&path) {
            Err(PipelineError::Version { found, supported }) => {
                assert_eq!(found, 999);
                assert_eq!(supported, MODEL_FORMAT_VERSION);
            }
            other => panic!("expected Version error, got {other:?}"),
        }
    }

    #[test]
    fn scan_classifies_skips_and_ignores() {
        let dir = tempfile::tempdir().unwrap();
        let scan_dir = dir.path().join("scan");
        fs::create_dir(&scan_dir).unwrap();

        let corpus = small_corpus(5);
        let model = build_pipeline(&corpus, &small_config()).unwrap();

        let (mal, _) = profiles::separable(2, 2, 55);
        for i in 0..2 {
            let bytes = build_pe(&mal.draw_spec(i).unwrap()).unwrap();
            fs::write(scan_dir.join(format!("sample_{i}.exe")), bytes).unwrap();
        }
        fs::write(scan_dir.join("notes.txt"), "hello world").unwrap();

        let entries = scan_directory(
            &scan_dir,
            &model,
            &BehaviorCategoryMap::default(),
            ScanOptions::default(),
        )
        .unwrap();
        assert_eq!(entries.len(), 3);
        let classified = entries
            .iter()
            .filter(|e| e.status == ScanStatus::Classified)
            .count();
        let skipped = entries
            .iter()
            .filter(|e| e.status == ScanStatus::SkippedNotPe)
            .count();
        assert_eq!((classified, skipped), (2, 1));
        for e in &entries {
            assert_eq!(e.prediction.is_some(), e.status == ScanStatus::Classified);
        }
        // Lexicographic order.
        let mut sorted = entries.iter().map(|e| e.path.clone()).collect::<Vec<_>>();
        sorted.sort();
        assert_eq!(
            sorted,
            entries.iter().map(|e| e.path.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn scan_skips_packed_by_default() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus(6);
        let model = build_pipeline(&corpus, &small_config()).unwrap();

        let (mal, _) = profiles::separable(1, 1, 77);
        let mut spec = mal.draw_spec(0).unwrap();
        spec.sections[0].name = "UPX0".into();
        fs::write(dir.path().join("packed.exe"), build_pe(&spec).unwrap()).unwrap();

        let entries = scan_directory(
            dir.path(),
            &model,
            &BehaviorCategoryMap::default(),
            ScanOptions::default(),
        )
        .unwrap();
        assert_eq!(entries[0].status, ScanStatus::SkippedPacked);
        assert!(entries[0].detail.as_deref().unwrap().contains("UPX0"));

        let entries = scan_directory(
            dir.path(),
            &model,
            &BehaviorCategoryMap::default(),
            ScanOptions {
                skip_packed: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(entries[0].status, ScanStatus::Classified);
    }

    #[test]
    fn scan_empty_directory_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus(7);
        let model = build_pipeline(&corpus, &small_config()).unwrap();
        let entries = scan_directory(
            dir.path(),
            &model,
            &BehaviorCategoryMap::default(),
            ScanOptions::default(),
        )
        .unwrap();
        assert!(entries.is_empty());
    }

    #[test]
    fn scan_time_vector_matches_training_vector() {
        // The same file vectorizes identically at training and scan time.
        let dir = tempfile::tempdir().unwrap();
        let (mal, ben) = profiles::separable(6, 6, 8);
        let manifest = gen_corpus(&mal, &ben, dir.path()).unwrap();

        let mut corpus = Corpus::new();
        for (path, label) in &manifest {
            let bytes = fs::read(path).unwrap();
            let pe = parse_pe(&bytes).unwrap();
            corpus.append(extract_raw(
                &pe,
                *label,
                &path.to_string_lossy(),
                content_hash(&bytes),
            ));
        }
        let model = build_pipeline(&corpus, &small_config()).unwrap();

        let (path, _) = &manifest[0];
        let bytes = fs::read(path).unwrap();
        let pe = parse_pe(&bytes).unwrap();
        let scan_record = extract_raw(
            &pe,
            Label::Unlabeled,
            &path.to_string_lossy(),
            content_hash(&bytes),
        );
        let train_record = &corpus.records()[0];
        let schema = &model.stages.schema;
        assert_eq!(
            crate::select::vectorize(&scan_record, schema).values,
            crate::select::vectorize(train_record, schema).values
        );
    }

    #[test]
    fn corpus_file_feeds_pipeline() {
        let corpus = small_corpus(9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        write_corpus(&corpus, &path).unwrap();
        let reread = read_corpus(&path).unwrap();
        let a = build_pipeline(&corpus, &small_config()).unwrap();
        let b = build_pipeline(&reread, &small_config()).unwrap();
        assert_eq!(a, b);
    }
}
