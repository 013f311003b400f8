//! Text rendering of experiment results and scan entries: aligned tables
//! with percentages at one decimal, or line-oriented machine-readable
//! records (one JSON document per line).

use thiserror::Error;

use crate::eval::ExperimentResult;
use crate::pipeline::{ScanEntry, ScanStatus};
use crate::select::{FeatureFamily, RankedFeature};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("nothing to report: input is empty")]
    EmptyInput,
}

fn fmt_pct(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.1}"),
        None => "-".to_string(),
    }
}

/// Render experiment results as a table with one row per
/// (feature type, classifier) pair.
pub fn experiment_table(results: &[ExperimentResult]) -> Result<String, ReportError> {
    if results.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut rows = vec![[
        "Feature type".to_string(),
        "Classifier".to_string(),
        "DR (%)".to_string(),
        "FPR (%)".to_string(),
        "OA (%)".to_string(),
    ]];
    for r in results {
        rows.push([
            r.feature_family.to_string(),
            r.classifier.to_string(),
            fmt_pct(r.aggregate.dr),
            fmt_pct(r.aggregate.fpr),
            fmt_pct(r.aggregate.oa),
        ]);
    }
    Ok(render_table(&rows))
}

/// Render a ranked feature list as an ordered (rank, name, score) table.
/// Frequency scores print as whole counts, information gain in bits.
pub fn ranking_table(ranked: &[RankedFeature]) -> Result<String, ReportError> {
    if ranked.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let score_header = match ranked[0].family {
        FeatureFamily::Header => "IG (bits)",
        FeatureFamily::Dll | FeatureFamily::Api => "Frequency",
    };
    let mut rows = vec![[
        "Rank".to_string(),
        "Feature".to_string(),
        score_header.to_string(),
    ]];
    for feature in ranked {
        let score = match feature.family {
            FeatureFamily::Header => format!("{:.6}", feature.score),
            FeatureFamily::Dll | FeatureFamily::Api => format!("{}", feature.score as u64),
        };
        rows.push([feature.rank.to_string(), feature.name.clone(), score]);
    }
    Ok(render_table(&rows))
}

/// One JSON document per experiment result.
pub fn experiment_records(results: &[ExperimentResult]) -> String {
    results
        .iter()
        .map(|r| serde_json::to_string(r).expect("result serializes"))
        .map(|line| line + "\n")
        .collect()
}

/// Render scan entries as a table: path, status, label, score, and the
/// non-zero behavior categories.
pub fn scan_table(entries: &[ScanEntry]) -> Result<String, ReportError> {
    if entries.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut rows = vec![[
        "Path".to_string(),
        "Status".to_string(),
        "Label".to_string(),
        "Score".to_string(),
        "Behaviors".to_string(),
    ]];
    for e in entries {
        let (label, score) = match &e.prediction {
            Some(p) => (p.label.to_string(), format!("{:.4}", p.score)),
            None => ("-".to_string(), "-".to_string()),
        };
        let behaviors = e
            .behavior_category_counts
            .iter()
            .filter(|(_, &count)| count > 0)
            .map(|(category, count)| format!("{category}:{count}"))
            .collect::<Vec<_>>()
            .join(" ");
        rows.push([
            e.path.clone(),
            e.status.to_string(),
            label,
            score,
            behaviors,
        ]);
    }
    Ok(render_table(&rows))
}

/// One JSON document per scan entry.
pub fn scan_records(entries: &[ScanEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("entry serializes"))
        .map(|line| line + "\n")
        .collect()
}

/// Summary line for scan output: counts by status.
pub fn scan_summary(entries: &[ScanEntry]) -> String {
    let count = |status: ScanStatus| entries.iter().filter(|e| e.status == status).count();
    let malicious = entries
        .iter()
        .filter(|e| {
            e.prediction
                .map(|p| p.label == crate::features::ClassLabel::Malicious)
                .unwrap_or(false)
        })
        .count();
    format!(
        "{} scanned: {} classified ({} malicious), {} not PE, {} packed, {} errors",
        entries.len(),
        count(ScanStatus::Classified),
        malicious,
        count(ScanStatus::SkippedNotPe),
        count(ScanStatus::SkippedPacked),
        count(ScanStatus::Error),
    )
}

fn render_table<const N: usize>(rows: &[[String; N]]) -> String {
    let mut widths = [0usize; N];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for (index, row) in rows.iter().enumerate() {
        let mut line = String::new();
        for (cell, width) in row.iter().zip(&widths) {
            line.push_str(&format!("{cell:<width$}  "));
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if index == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (N - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
