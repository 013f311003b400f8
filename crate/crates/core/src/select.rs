//! Feature selection: header features ranked by Information Gain over
//! discretized columns, DLL and API features ranked by calling frequency
//! (the number of corpus records containing the name), top-k subset
//! selection, and vectorization of records against the selected schema.
//!
//! Discretization (equal-frequency, default 10 bins) is used only to
//! compute IG; vectors carry raw header values, which downstream PCA
//! standardizes. Entropy is in bits.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{ClassLabel, Corpus, RawFeatureRecord, HEADER_FEATURE_NAMES};

pub const DEFAULT_K_HEADER: usize = 88;
pub const DEFAULT_K_DLL: usize = 130;
pub const DEFAULT_K_API: usize = 2453;
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} values vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("n_bins must be at least 2, got {0}")]
    TooFewBins(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFamily {
    Header,
    Dll,
    Api,
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureFamily::Header => write!(f, "header"),
            FeatureFamily::Dll => write!(f, "dll"),
            FeatureFamily::Api => write!(f, "api"),
        }
    }
}

/// One ranked feature. Within a family, `rank` is 1-based and consistent
/// with non-increasing `score`; ties are broken lexicographically by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub family: FeatureFamily,
    /// IG in bits for header features; record count for dll/api features.
    pub score: f64,
    pub rank: usize,
}

/// Header ranking result; `degenerate` flags a single-class corpus where
/// every IG score is 0 and the order is purely lexicographic.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaderRanking {
    pub features: Vec<RankedFeature>,
    pub degenerate: bool,
}

/// Shannon entropy of a two-class label list, in bits.
pub fn entropy(labels: &[ClassLabel]) -> Result<f64, SelectError> {
    if labels.is_empty() {
        return Err(SelectError::EmptyInput);
    }
    let malicious = labels
        .iter()
        .filter(|&&l| l == ClassLabel::Malicious)
        .count();
    Ok(entropy_of_counts(malicious, labels.len() - malicious))
}

fn entropy_of_counts(a: usize, b: usize) -> f64 {
    let n = (a + b) as f64;
    let mut h = 0.0;
    for count in [a, b] {
        if count > 0 {
            let p = count as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

/// Learn equal-frequency bin edges at column quantiles. Duplicate edges
/// collapse, so a constant column yields no edges (one effective bin).
pub fn discretize_fit(column: &[u64], n_bins: usize) -> Result<Vec<u64>, SelectError> {
    if column.is_empty() {
        return Err(SelectError::EmptyInput);
    }
    if n_bins < 2 {
        return Err(SelectError::TooFewBins(n_bins));
    }
    let mut sorted = column.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut edges = Vec::new();
    for i in 1..n_bins {
        let idx = i * n / n_bins;
        if idx == 0 || idx >= n {
            continue;
        }
        let edge = sorted[idx];
        // An edge equal to the column minimum separates nothing.
        if edge > sorted[0] && edges.last() != Some(&edge) {
            edges.push(edge);
        }
    }
    Ok(edges)
}

/// Map each value to its bin id: the number of edges ≤ the value. Values
/// below the first edge map to bin 0, values at or above the last edge to
/// the last bin.
pub fn discretize_apply(column: &[u64], edges: &[u64]) -> Vec<usize> {
    column
        .iter()
        .map(|&v| edges.iter().take_while(|&&e| v >= e).count())
        .collect()
}

/// Information gain of a discretized feature about the labels:
/// `H(labels) − Σ_b (n_b / n) · H(labels | bin = b)`.
pub fn information_gain(bins: &[usize], labels: &[ClassLabel]) -> Result<f64, SelectError> {
    if bins.is_empty() || labels.is_empty() {
        return Err(SelectError::EmptyInput);
    }
    if bins.len() != labels.len() {
        return Err(SelectError::LengthMismatch(bins.len(), labels.len()));
    }
    let n = labels.len() as f64;
    let base = entropy(labels)?;

    let mut per_bin: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&bin, &label) in bins.iter().zip(labels) {
        let counts = per_bin.entry(bin).or_insert((0, 0));
        if label == ClassLabel::Malicious {
            counts.0 += 1;
        } else {
            counts.1 += 1;
        }
    }

    let conditional: f64 = per_bin
        .values()
        .map(|&(m, b)| ((m + b) as f64 / n) * entropy_of_counts(m, b))
        .sum();
    // Guard the floating tail: IG is mathematically in [0, H(labels)].
    Ok((base - conditional).clamp(0.0, base))
}

fn sort_ranked(mut features: Vec<RankedFeature>) -> Vec<RankedFeature> {
    features.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.name.cmp(&b.name))
    });
    for (i, feature) in features.iter_mut().enumerate() {
        feature.rank = i + 1;
    }
    features
}

/// Labeled slice of a corpus: records that carry a two-class label.
fn labeled(corpus: &Corpus) -> (Vec<&RawFeatureRecord>, Vec<ClassLabel>) {
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for record in corpus.records() {
        if let Some(class) = record.label.as_class() {
            records.push(record);
            labels.push(class);
        }
    }
    (records, labels)
}

/// Rank all 138 header features by the information gain of their
/// discretized columns.
pub fn rank_header_features(corpus: &Corpus, n_bins: usize) -> Result<HeaderRanking, SelectError> {
    let (records, _) = labeled(corpus);
    rank_header_features_records(&records, n_bins)
}

/// [`rank_header_features`] over an explicit record subset (used by
/// cross-validation, which must rank on training folds only). Records
/// without a two-class label are skipped.
pub fn rank_header_features_records(
    records: &[&RawFeatureRecord],
    n_bins: usize,
) -> Result<HeaderRanking, SelectError> {
    let mut labels = Vec::new();
    let mut records_out = Vec::new();
    for &record in records {
        if let Some(class) = record.label.as_class() {
            records_out.push(record);
            labels.push(class);
        }
    }
    let records = records_out;
    if records.is_empty() {
        return Err(SelectError::EmptyInput);
    }
    let degenerate = labels.iter().all(|&l| l == labels[0]);

    let mut features = Vec::with_capacity(HEADER_FEATURE_NAMES.len());
    for (index, &name) in HEADER_FEATURE_NAMES.iter().enumerate() {
        let column: Vec<u64> = records
            .iter()
            .map(|r| r.header_features.values()[index])
            .collect();
        let edges = discretize_fit(&column, n_bins)?;
        let bins = discretize_apply(&column, &edges);
        let score = information_gain(&bins, &labels)?;
        features.push(RankedFeature {
            name: name.to_string(),
            family: FeatureFamily::Header,
            score,
            rank: 0,
        });
    }
    Ok(HeaderRanking {
        features: sort_ranked(features),
        degenerate,
    })
}

/// Rank DLL or API names by calling frequency: the number of records in
/// the corpus containing the name.
pub fn rank_call_frequency(corpus: &Corpus, family: FeatureFamily) -> Vec<RankedFeature> {
    let records: Vec<&RawFeatureRecord> = corpus.records().iter().collect();
    rank_call_frequency_records(&records, family)
}

/// [`rank_call_frequency`] over an explicit record subset.
pub fn rank_call_frequency_records(
    records: &[&RawFeatureRecord],
    family: FeatureFamily,
) -> Vec<RankedFeature> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for record in records {
        let names = match family {
            FeatureFamily::Dll => &record.dll_names,
            FeatureFamily::Api => &record.api_names,
            FeatureFamily::Header => return Vec::new(),
        };
        for name in names {
            *counts.entry(name).or_insert(0) += 1;
        }
    }
    sort_ranked(
        counts
            .into_iter()
            .map(|(name, count)| RankedFeature {
                name: name.to_string(),
                family,
                score: count as f64,
                rank: 0,
            })
            .collect(),
    )
}

/// Retained bin edges of one header feature, for reproducibility metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBinEdges {
    pub name: String,
    pub edges: Vec<u64>,
}

/// Chosen top-k subsets per family. The selected lists are prefixes of the
/// family rankings, of length `min(k, available)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionModel {
    pub k_header: usize,
    pub k_dll: usize,
    pub k_api: usize,
    pub selected_header: Vec<String>,
    pub selected_dll: Vec<String>,
    pub selected_api: Vec<String>,
    pub discretizer_bins: usize,
    /// Edges learned for the selected header features; metadata only
    /// (vectors carry raw values).
    pub bin_edges: Vec<FeatureBinEdges>,
}

impl SelectionModel {
    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(
            self.selected_header.clone(),
            self.selected_dll.clone(),
            self.selected_api.clone(),
        )
    }
}

/// Take the top-k prefix of each family ranking.
#[allow(clippy::too_many_arguments)]
pub fn select(
    corpus: &Corpus,
    header_ranking: &HeaderRanking,
    dll_ranking: &[RankedFeature],
    api_ranking: &[RankedFeature],
    k_header: usize,
    k_dll: usize,
    k_api: usize,
    n_bins: usize,
) -> SelectionModel {
    let (records, _) = labeled(corpus);
    select_records(
        &records,
        header_ranking,
        dll_ranking,
        api_ranking,
        k_header,
        k_dll,
        k_api,
        n_bins,
    )
}

/// [`select`] over an explicit record subset.
#[allow(clippy::too_many_arguments)]
pub fn select_records(
    records: &[&RawFeatureRecord],
    header_ranking: &HeaderRanking,
    dll_ranking: &[RankedFeature],
    api_ranking: &[RankedFeature],
    k_header: usize,
    k_dll: usize,
    k_api: usize,
    n_bins: usize,
) -> SelectionModel {
    let prefix = |ranked: &[RankedFeature], k: usize| -> Vec<String> {
        ranked.iter().take(k).map(|f| f.name.clone()).collect()
    };
    let selected_header = prefix(&header_ranking.features, k_header);

    // Recompute and retain the edges of the selected header columns.
    let mut bin_edges = Vec::with_capacity(selected_header.len());
    for name in &selected_header {
        let index = crate::features::header_feature_index(name).expect("ranked name is known");
        let column: Vec<u64> = records
            .iter()
            .map(|r| r.header_features.values()[index])
            .collect();
        let edges = discretize_fit(&column, n_bins).unwrap_or_default();
        bin_edges.push(FeatureBinEdges {
            name: name.clone(),
            edges,
        });
    }

    SelectionModel {
        k_header,
        k_dll,
        k_api,
        selected_header,
        selected_dll: prefix(dll_ranking, k_dll),
        selected_api: prefix(api_ranking, k_api),
        discretizer_bins: n_bins,
        bin_edges,
    }
}

/// Ordered feature layout: header names first, then DLL names, then API
/// names. The digest binds vectors and downstream models to this layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub header: Vec<String>,
    pub dll: Vec<String>,
    pub api: Vec<String>,
}

impl FeatureSchema {
    pub fn new(header: Vec<String>, dll: Vec<String>, api: Vec<String>) -> Self {
        Self { header, dll, api }
    }

    pub fn dimension(&self) -> usize {
        self.header.len() + self.dll.len() + self.api.len()
    }

    /// All names in vector order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.header
            .iter()
            .chain(self.dll.iter())
            .chain(self.api.iter())
            .map(|s| s.as_str())
    }

    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (tag, names) in [
            ("header", &self.header),
            ("dll", &self.dll),
            ("api", &self.api),
        ] {
            hasher.update(tag.as_bytes());
            hasher.update([0]);
            for name in names {
                hasher.update(name.as_bytes());
                hasher.update([0]);
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// A record projected onto a schema. Header positions carry the raw
/// integer value; DLL and API positions are 0/1 presence indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_id: String,
}

/// Project `record` onto `schema`. Features of the record absent from the
/// schema are ignored; schema features absent from the record read as 0.
pub fn vectorize(record: &RawFeatureRecord, schema: &FeatureSchema) -> FeatureVector {
    let mut values = Vec::with_capacity(schema.dimension());
    for name in &schema.header {
        values.push(record.header_features.get(name).unwrap_or(0) as f64);
    }
    for name in &schema.dll {
        values.push(f64::from(record.dll_names.contains(name)));
    }
    for name in &schema.api {
        values.push(f64::from(record.api_names.contains(name)));
    }
    FeatureVector {
        values,
        schema_id: schema.digest(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{content_hash, extract_raw, Label};
    use crate::pe::parse_pe;
    use crate::synth::{build_pe, PeFileSpec, SectionSpec};
    use ClassLabel::{Benign as B, Malicious as M};

    fn record(
        overrides: &[(&str, u64)],
        apis: &[(&str, &str)],
        label: Label,
        id: u8,
    ) -> crate::features::RawFeatureRecord {
        let mut spec = PeFileSpec {
            sections: vec![SectionSpec::new(".text", 4096, 512, 0x6000_0020)],
            ..Default::default()
        };
        for (k, v) in overrides {
            spec.overrides.insert(k.to_string(), *v);
        }
        for (dll, api) in apis {
            spec.imports
                .entry(dll.to_string())
                .or_default()
                .push(api.to_string());
        }
        // e_ovno doubles as a uniqueness salt so hashes differ.
        spec.overrides.insert("e_ovno".into(), id as u64);
        let bytes = build_pe(&spec).unwrap();
        let pe = parse_pe(&bytes).unwrap();
        extract_raw(&pe, label, "t.exe", content_hash(&bytes))
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[M, M, B, B]).unwrap(), 1.0);
        assert_eq!(entropy(&[M, M, M, M]).unwrap(), 0.0);
        let h = entropy(&[M, M, M, B]).unwrap();
        assert!((h - 0.8112781244591328).abs() < 1e-12);
        assert_eq!(entropy(&[]), Err(SelectError::EmptyInput));
    }

    #[test]
    fn discretize_uniform_column() {
        let column: Vec<u64> = (1..=100).collect();
        let edges = discretize_fit(&column, 10).unwrap();
        let bins = discretize_apply(&column, &edges);
        let mut counts = [0usize; 10];
        for b in bins {
            counts[b] += 1;
        }
        assert_eq!(counts, [10; 10]);
    }

    #[test]
    fn discretize_constant_column_collapses() {
        let column = vec![7u64; 40];
        let edges = discretize_fit(&column, 10).unwrap();
        assert!(edges.is_empty());
        assert!(discretize_apply(&column, &edges).iter().all(|&b| b == 0));
    }

    #[test]
    fn discretize_clamps_out_of_range() {
        let column: Vec<u64> = (0..10).collect();
        let edges = discretize_fit(&column, 5).unwrap();
        // Below range ends up in bin 0; far above in the last bin.
        assert_eq!(discretize_apply(&[0], &edges), vec![0]);
        let top = discretize_apply(&[1_000_000], &edges)[0];
        assert_eq!(top, edges.len());
    }

    #[test]
    fn information_gain_examples() {
        assert_eq!(information_gain(&[1, 1, 0, 0], &[M, M, B, B]).unwrap(), 1.0);
        assert_eq!(information_gain(&[1, 0, 1, 0], &[M, M, B, B]).unwrap(), 0.0);
        let ig = information_gain(&[1, 1, 0, 0], &[M, M, M, B]).unwrap();
        assert!((ig - 0.3112781244591328).abs() < 1e-12);
        assert_eq!(
            information_gain(&[0], &[M, B]),
            Err(SelectError::LengthMismatch(1, 2))
        );
        assert_eq!(information_gain(&[], &[]), Err(SelectError::EmptyInput));
    }

    #[test]
    fn perfectly_separating_feature_ranks_first() {
        let mut corpus = Corpus::new();
        for i in 0..6u8 {
            let label = if i < 3 {
                Label::Malicious
            } else {
                Label::Benign
            };
            let symbols = if i < 3 { 50_000 } else { 10 };
            corpus.append(record(&[("NumberOfSymbols", symbols)], &[], label, i));
        }
        let ranking = rank_header_features(&corpus, 10).unwrap();
        assert!(!ranking.degenerate);
        assert_eq!(ranking.features[0].name, "NumberOfSymbols");
        assert!(ranking.features[0].score > 0.99);
        // Everything else is constant or a uniqueness salt.
        let scored: Vec<_> = ranking
            .features
            .iter()
            .filter(|f| f.score > 1e-9)
            .map(|f| f.name.as_str())
            .collect();
        assert!(scored.len() <= 2, "unexpected scored features: {scored:?}");
    }

    #[test]
    fn single_class_corpus_is_degenerate() {
        let mut corpus = Corpus::new();
        for i in 0..4u8 {
            corpus.append(record(&[], &[], Label::Malicious, i));
        }
        let ranking = rank_header_features(&corpus, 10).unwrap();
        assert!(ranking.degenerate);
        assert!(ranking.features.iter().all(|f| f.score == 0.0));
    }

    #[test]
    fn ties_break_lexicographically() {
        let mut corpus = Corpus::new();
        // e_cs and e_ip mirror each other: identical IG.
        for i in 0..4u8 {
            let label = if i < 2 {
                Label::Malicious
            } else {
                Label::Benign
            };
            let v = if i < 2 { 100 } else { 1 };
            corpus.append(record(&[("e_cs", v), ("e_ip", v)], &[], label, i));
        }
        let ranking = rank_header_features(&corpus, 10).unwrap();
        let top2: Vec<_> = ranking.features[..2]
            .iter()
            .map(|f| f.name.as_str())
            .collect();
        assert_eq!(top2, ["e_cs", "e_ip"]);
    }

    #[test]
    fn frequency_ranking_counts_records() {
        let mut corpus = Corpus::new();
        corpus.append(record(&[], &[("kernel32.dll", "A")], Label::Malicious, 0));
        corpus.append(record(
            &[],
            &[("kernel32.dll", "A"), ("user32.dll", "B")],
            Label::Benign,
            1,
        ));
        corpus.append(record(&[], &[("kernel32.dll", "C")], Label::Benign, 2));

        let dlls = rank_call_frequency(&corpus, FeatureFamily::Dll);
        assert_eq!(dlls[0].name, "kernel32.dll");
        assert_eq!(dlls[0].score, 3.0);
        assert_eq!(dlls[0].rank, 1);
        assert_eq!(dlls[1].name, "user32.dll");
        assert_eq!(dlls[1].score, 1.0);

        let apis = rank_call_frequency(&corpus, FeatureFamily::Api);
        assert_eq!(apis[0].name, "kernel32.dll!A");
        assert_eq!(apis[0].score, 2.0);

        let empty = Corpus::new();
        assert!(rank_call_frequency(&empty, FeatureFamily::Dll).is_empty());
    }

    #[test]
    fn select_applies_min_rule() {
        let mut corpus = Corpus::new();
        corpus.append(record(&[], &[("a.dll", "X")], Label::Malicious, 0));
        corpus.append(record(
            &[],
            &[("b.dll", "Y"), ("c.dll", "Z")],
            Label::Benign,
            1,
        ));
        let headers = rank_header_features(&corpus, 10).unwrap();
        let dlls = rank_call_frequency(&corpus, FeatureFamily::Dll);
        let apis = rank_call_frequency(&corpus, FeatureFamily::Api);

        let model = select(&corpus, &headers, &dlls, &apis, 5, 5, 5, 10);
        assert_eq!(model.selected_header.len(), 5);
        assert_eq!(model.selected_dll.len(), 3);
        assert_eq!(model.selected_api.len(), 3);

        let none = select(&corpus, &headers, &dlls, &apis, 0, 5, 5, 10);
        assert!(none.selected_header.is_empty());
        assert!(!none.schema().names().any(|n| n == "e_cp"));
    }

    #[test]
    fn default_ks_select_the_published_subset_sizes() {
        // A corpus exposing 138 header, 792 DLL, and 24662 API features;
        // records are built directly since only the name sets matter here.
        let mut corpus = Corpus::new();
        let total_apis = 24662usize;
        let total_dlls = 792usize;
        let per_record = 247usize;
        let mut api = 0usize;
        let mut i = 0u64;
        while api < total_apis {
            let mut dll_names = std::collections::BTreeSet::new();
            let mut api_names = std::collections::BTreeSet::new();
            for j in api..(api + per_record).min(total_apis) {
                let dll = format!("dll{:03}.dll", j % total_dlls);
                api_names.insert(format!("{dll}!Api{j}"));
                dll_names.insert(dll);
            }
            api += per_record;
            let mut values = vec![0u64; crate::features::HEADER_FEATURE_COUNT];
            values[0] = i; // vary one column so IG is well defined
            corpus.append(crate::features::RawFeatureRecord {
                header_features: crate::features::HeaderFeatures::from_values(values).unwrap(),
                dll_names,
                api_names,
                label: if i.is_multiple_of(2) {
                    Label::Malicious
                } else {
                    Label::Benign
                },
                content_hash: format!("hash{i}"),
                source_path: String::new(),
            });
            i += 1;
        }

        let headers = rank_header_features(&corpus, DEFAULT_BINS).unwrap();
        assert_eq!(headers.features.len(), 138);
        let dlls = rank_call_frequency(&corpus, FeatureFamily::Dll);
        assert_eq!(dlls.len(), total_dlls);
        let apis = rank_call_frequency(&corpus, FeatureFamily::Api);
        assert_eq!(apis.len(), total_apis);

        let model = select(
            &corpus,
            &headers,
            &dlls,
            &apis,
            DEFAULT_K_HEADER,
            DEFAULT_K_DLL,
            DEFAULT_K_API,
            DEFAULT_BINS,
        );
        assert_eq!(model.selected_header.len(), 88);
        assert_eq!(model.selected_dll.len(), 130);
        assert_eq!(model.selected_api.len(), 2453);
        assert_eq!(model.schema().dimension(), 88 + 130 + 2453);
    }

    #[test]
    fn vectorize_projects_schema() {
        let rec = record(
            &[("e_cp", 3)],
            &[("kernel32.dll", "LoadLibraryA")],
            Label::Malicious,
            0,
        );
        let schema = FeatureSchema::new(
            vec!["e_cp".into()],
            vec!["kernel32.dll".into()],
            vec!["kernel32.dll!LoadLibraryA".into()],
        );
        let v = vectorize(&rec, &schema);
        assert_eq!(v.values, vec![3.0, 1.0, 1.0]);
        assert_eq!(v.schema_id, schema.digest());

        let bare = record(&[("e_cp", 3)], &[], Label::Benign, 1);
        assert_eq!(vectorize(&bare, &schema).values, vec![3.0, 0.0, 0.0]);

        // A DLL absent from the schema leaves the vector unchanged.
        let extra = record(
            &[("e_cp", 3)],
            &[("kernel32.dll", "LoadLibraryA"), ("other.dll", "Q")],
            Label::Malicious,
            2,
        );
        assert_eq!(vectorize(&extra, &schema).values, vec![3.0, 1.0, 1.0]);
    }
}
