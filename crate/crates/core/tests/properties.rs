//! Property tests for the module invariants: parser round-trip and
//! totality, extraction arity and monotonicity, ranking stability,
//! selection prefixes, PCA conservation laws, and fold partitioning.

use std::collections::BTreeMap;

use proptest::prelude::*;

use pescan_core::classify::{predict, train_naive_bayes, DEFAULT_VARIANCE_FLOOR};
use pescan_core::eval::stratified_folds;
use pescan_core::features::{
    content_hash, extract_raw, AppendOutcome, ClassLabel, Corpus, Label, RawFeatureRecord,
    HEADER_FEATURE_COUNT,
};
use pescan_core::pca::{pca_fit, pca_transform, PcaTarget};
use pescan_core::pe::{is_pe, parse_pe, PeError};
use pescan_core::select::{
    information_gain, rank_call_frequency, rank_header_features, select, vectorize, FeatureFamily,
    FeatureSchema, FeatureVector,
};
use pescan_core::synth::{build_pe, PeFileSpec, SectionSpec, OVERRIDABLE_FIELDS};

fn section_strategy() -> impl Strategy<Value = SectionSpec> {
    (
        "[a-z.]{1,8}",
        0u32..100_000,
        0u32..20_000,
        any::<u32>(),
        any::<u16>(),
        any::<u16>(),
        any::<u32>(),
    )
        .prop_map(
            |(name, virtual_size, raw_size, characteristics, relocs, line_numbers, reloc_ptr)| {
                SectionSpec {
                    name,
                    virtual_size,
                    raw_size,
                    characteristics,
                    number_of_relocations: relocs,
                    number_of_line_numbers: line_numbers,
                    pointer_to_relocations: reloc_ptr,
                }
            },
        )
}

fn overrides_strategy() -> impl Strategy<Value = BTreeMap<String, u64>> {
    prop::collection::vec((0usize..OVERRIDABLE_FIELDS.len(), any::<u64>()), 0..24).prop_map(
        |pairs| {
            let mut map = BTreeMap::new();
            for (index, raw) in pairs {
                let (name, bits) = OVERRIDABLE_FIELDS[index];
                let max = if bits >= 64 {
                    u64::MAX
                } else {
                    (1u64 << bits) - 1
                };
                map.insert(name.to_string(), raw & max);
            }
            map
        },
    )
}

fn api_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[A-Z][a-zA-Z0-9]{1,10}",
        1 => (1u32..=65535).prop_map(|n| format!("ord{n}")),
    ]
}

fn imports_strategy() -> impl Strategy<Value = BTreeMap<String, Vec<String>>> {
    prop::collection::btree_map(
        "[a-z]{3,8}\\.dll",
        prop::collection::vec(api_strategy(), 0..6),
        0..4,
    )
}

prop_compose! {
    fn spec_strategy()(
        sections in prop::collection::vec(section_strategy(), 1..4),
        overrides in overrides_strategy(),
        imports in imports_strategy(),
        import_tds in any::<u32>(),
    ) -> PeFileSpec {
        PeFileSpec { overrides, sections, imports, import_time_date_stamp: import_tds }
    }
}

fn record_of(spec: &PeFileSpec, label: Label) -> (Vec<u8>, RawFeatureRecord) {
    let bytes = build_pe(spec).expect("spec within builder limits");
    let pe = parse_pe(&bytes).expect("built image parses");
    let record = extract_raw(&pe, label, "prop", content_hash(&bytes));
    (bytes, record)
}

proptest! {
    // Every accepted spec builds a valid image whose parse reproduces the
    // specified fields, sections, DLLs, and APIs exactly.
    #[test]
    fn parser_round_trips_specs(spec in spec_strategy()) {
        let bytes = build_pe(&spec).unwrap();
        prop_assert!(is_pe(&bytes));
        let pe = parse_pe(&bytes).unwrap();
        let record = extract_raw(&pe, Label::Unlabeled, "prop", content_hash(&bytes));

        for (key, &want) in &spec.overrides {
            prop_assert_eq!(record.header_features.get(key), Some(want), "field {}", key);
        }
        for (i, s) in spec.sections.iter().enumerate() {
            let p = &pe.sections[i];
            prop_assert_eq!(&p.name, &s.name);
            prop_assert_eq!(p.virtual_size, s.virtual_size);
            prop_assert_eq!(p.size_of_raw_data, s.raw_size);
            prop_assert_eq!(p.characteristics, s.characteristics);
            prop_assert_eq!(p.number_of_relocations, s.number_of_relocations);
            prop_assert_eq!(p.number_of_line_numbers, s.number_of_line_numbers);
            prop_assert_eq!(p.pointer_to_relocations, s.pointer_to_relocations);
        }
        let parsed: BTreeMap<String, Vec<String>> = pe
            .imports
            .iter()
            .map(|i| (i.dll_name.clone(), i.api_names.clone()))
            .collect();
        prop_assert_eq!(&parsed, &spec.imports);
    }

    // Identical bytes parse to structurally identical results.
    #[test]
    fn parsing_is_deterministic(spec in spec_strategy()) {
        let bytes = build_pe(&spec).unwrap();
        prop_assert_eq!(parse_pe(&bytes).unwrap(), parse_pe(&bytes).unwrap());
    }

    // Arbitrary bytes never panic and always land in a declared outcome;
    // is_pe agrees with the NotPeFile boundary.
    #[test]
    fn parser_is_total_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..4096)) {
        let pe_like = is_pe(&bytes);
        match parse_pe(&bytes) {
            Ok(_) | Err(PeError::Malformed(_)) | Err(PeError::Unsupported(_)) => {
                prop_assert!(pe_like);
            }
            Err(PeError::NotPeFile(_)) => prop_assert!(!pe_like),
        }
    }

    // Mutations of valid images never panic either.
    #[test]
    fn parser_is_total_on_mutated_images(
        spec in spec_strategy(),
        flips in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 0..24),
        keep in any::<prop::sample::Index>(),
    ) {
        let mut bytes = build_pe(&spec).unwrap();
        for (index, value) in flips {
            let at = index.index(bytes.len());
            bytes[at] = value;
        }
        bytes.truncate(keep.index(bytes.len() + 1));
        let _ = parse_pe(&bytes);
    }

    // Extraction arity is fixed at 138 and API prefixes stay consistent.
    #[test]
    fn extraction_has_fixed_arity(spec in spec_strategy()) {
        let (_, record) = record_of(&spec, Label::Malicious);
        prop_assert_eq!(record.header_features.values().len(), HEADER_FEATURE_COUNT);
        for api in &record.api_names {
            let (dll, name) = api.split_once('!').expect("qualified name");
            prop_assert!(record.dll_names.contains(dll));
            prop_assert!(!name.is_empty());
        }
    }

    // Adding one fresh import changes exactly the import-table scalars.
    #[test]
    fn extraction_is_monotone_in_imports(spec in spec_strategy()) {
        let (_, before) = record_of(&spec, Label::Benign);

        let mut extended = spec.clone();
        // Names chosen outside what the generator can produce.
        extended
            .imports
            .entry("9fresh.dll".to_string())
            .or_default()
            .push("FreshlyAddedImportName".to_string());
        let (_, after) = record_of(&extended, Label::Benign);

        prop_assert_eq!(after.api_names.len(), before.api_names.len() + 1);
        let dll_growth = after.dll_names.len() - before.dll_names.len();
        prop_assert!(dll_growth <= 1);

        let import_scalars = [
            "ImportDescriptorCount",
            "ImportedApiCount",
            "DistinctDllCount",
            "BoundImportFlag",
            "MaxApisPerDll",
            "ImportTableSize",
        ];
        for ((name, a), (_, b)) in before.header_features.iter().zip(after.header_features.iter()) {
            if import_scalars.contains(&name) {
                continue;
            }
            prop_assert_eq!(a, b, "feature {} changed", name);
        }
    }

    // Byte-identical inputs hash identically; a corpus never holds two
    // records with equal hashes.
    #[test]
    fn hash_discipline(specs in prop::collection::vec(spec_strategy(), 1..5)) {
        let mut corpus = Corpus::new();
        let mut distinct = std::collections::BTreeSet::new();
        for spec in &specs {
            let (bytes, record) = record_of(spec, Label::Malicious);
            prop_assert_eq!(&content_hash(&bytes), &content_hash(&bytes.clone()));
            let fresh = distinct.insert(record.content_hash.clone());
            let outcome = corpus.append(record);
            prop_assert_eq!(outcome == AppendOutcome::Added, fresh);
        }
        prop_assert_eq!(corpus.len(), distinct.len());
    }

    // 0 ≤ IG ≤ H(labels) on arbitrary inputs.
    #[test]
    fn information_gain_bounds(
        pairs in prop::collection::vec((0usize..5, any::<bool>()), 1..80),
    ) {
        let bins: Vec<usize> = pairs.iter().map(|(b, _)| *b).collect();
        let labels: Vec<ClassLabel> = pairs
            .iter()
            .map(|(_, m)| if *m { ClassLabel::Malicious } else { ClassLabel::Benign })
            .collect();
        let ig = information_gain(&bins, &labels).unwrap();
        let h = pescan_core::select::entropy(&labels).unwrap();
        prop_assert!(ig >= 0.0);
        prop_assert!(ig <= h + 1e-12);
    }

    // Record order never changes any ranking.
    #[test]
    fn rankings_are_order_free(
        specs in prop::collection::vec(spec_strategy(), 4..10),
        seed in any::<u64>(),
    ) {
        let records: Vec<RawFeatureRecord> = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let label = if i % 2 == 0 { Label::Malicious } else { Label::Benign };
                record_of(spec, label).1
            })
            .collect();

        let mut forward = Corpus::new();
        for r in &records {
            forward.append(r.clone());
        }
        let mut shuffled_order: Vec<usize> = (0..records.len()).collect();
        // Deterministic pseudo-shuffle from the seed.
        shuffled_order.sort_by_key(|&i| (seed.wrapping_mul(i as u64 + 1)).rotate_left(17));
        let mut backward = Corpus::new();
        for &i in &shuffled_order {
            backward.append(records[i].clone());
        }

        prop_assert_eq!(
            rank_header_features(&forward, 10).unwrap().features,
            rank_header_features(&backward, 10).unwrap().features
        );
        prop_assert_eq!(
            rank_call_frequency(&forward, FeatureFamily::Dll),
            rank_call_frequency(&backward, FeatureFamily::Dll)
        );
        prop_assert_eq!(
            rank_call_frequency(&forward, FeatureFamily::Api),
            rank_call_frequency(&backward, FeatureFamily::Api)
        );
    }

    // select(k) output is a prefix of select(k') output for k ≤ k'.
    #[test]
    fn selection_prefix_property(
        specs in prop::collection::vec(spec_strategy(), 4..8),
        k_small in 0usize..10,
        extra in 0usize..10,
    ) {
        let mut corpus = Corpus::new();
        for (i, spec) in specs.iter().enumerate() {
            let label = if i % 2 == 0 { Label::Malicious } else { Label::Benign };
            corpus.append(record_of(spec, label).1);
        }
        let headers = rank_header_features(&corpus, 10).unwrap();
        let dlls = rank_call_frequency(&corpus, FeatureFamily::Dll);
        let apis = rank_call_frequency(&corpus, FeatureFamily::Api);

        let k_large = k_small + extra;
        let small = select(&corpus, &headers, &dlls, &apis, k_small, k_small, k_small, 10);
        let large = select(&corpus, &headers, &dlls, &apis, k_large, k_large, k_large, 10);
        prop_assert_eq!(&large.selected_header[..small.selected_header.len()], &small.selected_header[..]);
        prop_assert_eq!(&large.selected_dll[..small.selected_dll.len()], &small.selected_dll[..]);
        prop_assert_eq!(&large.selected_api[..small.selected_api.len()], &small.selected_api[..]);
    }

    // Vectorization depends only on the schema-named fields.
    #[test]
    fn vectorize_is_a_pure_projection(spec in spec_strategy(), salt in 1u64..=0xFFFF) {
        let schema = FeatureSchema::new(
            vec!["e_cp".into(), "NumberOfSymbols".into()],
            vec!["kernel32.dll".into()],
            vec!["kernel32.dll!LoadLibraryA".into()],
        );
        let (_, base) = record_of(&spec, Label::Benign);

        // Mutate fields outside the schema: a header field, a DLL, an API.
        let mut mutated_spec = spec.clone();
        mutated_spec.overrides.insert("e_oemid".into(), salt);
        mutated_spec
            .imports
            .entry("9other.dll".into())
            .or_default()
            .push("UnrelatedCall".into());
        let (_, mutated) = record_of(&mutated_spec, Label::Benign);

        prop_assert_eq!(vectorize(&base, &schema).values, vectorize(&mutated, &schema).values);
    }

    // Full-rank PCA conserves standardized variance; rows orthonormal.
    #[test]
    fn pca_conserves_variance(
        rows in prop::collection::vec(
            prop::collection::vec(-100.0f64..100.0, 4),
            4..32
        ),
    ) {
        let data: Vec<FeatureVector> = rows
            .iter()
            .map(|values| FeatureVector { values: values.clone(), schema_id: "p".into() })
            .collect();
        let model = pca_fit(&data, PcaTarget::Components(4)).unwrap();

        let n = data.len();
        let mut total = 0.0;
        for dim in 0..4 {
            let standardized: Vec<f64> = data
                .iter()
                .map(|v| (v.values[dim] - model.feature_means[dim]) / model.feature_stds[dim])
                .collect();
            let mean: f64 = standardized.iter().sum::<f64>() / n as f64;
            total += standardized.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        }
        let explained: f64 = model.explained_variance.iter().sum();
        prop_assert!((explained - total).abs() < 1e-6, "{} vs {}", explained, total);

        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = model.components[i]
                    .iter()
                    .zip(&model.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() < 1e-8);
            }
        }
        // Transforms are pure: repeated calls agree.
        let y1 = pca_transform(&model, &data[0]).unwrap();
        let y2 = pca_transform(&model, &data[0]).unwrap();
        prop_assert_eq!(y1, y2);
    }

    // Stratified folds partition every sample with per-class imbalance ≤ 1.
    #[test]
    fn folds_partition_with_bounded_imbalance(
        k in 2usize..8,
        extra_m in 0usize..40,
        extra_b in 0usize..40,
        seed in any::<u64>(),
    ) {
        let n_m = k + extra_m;
        let n_b = k + extra_b;
        let mut labels = vec![ClassLabel::Malicious; n_m];
        labels.extend(vec![ClassLabel::Benign; n_b]);
        let assignment = stratified_folds(&labels, k, seed).unwrap();
        prop_assert_eq!(assignment.len(), labels.len());
        for class in [ClassLabel::Malicious, ClassLabel::Benign] {
            let mut sizes = vec![0usize; k];
            for (&label, &fold) in labels.iter().zip(&assignment) {
                prop_assert!(fold < k);
                if label == class {
                    sizes[fold] += 1;
                }
            }
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            prop_assert!(spread <= 1);
        }
        prop_assert_eq!(&stratified_folds(&labels, k, seed).unwrap(), &assignment);
    }

    // Predictions are pure functions of (model, input).
    #[test]
    fn predictions_are_pure(probe in prop::collection::vec(-10.0f64..10.0, 2)) {
        let x = vec![vec![-2.0, -2.0], vec![-1.5, -1.0], vec![2.0, 1.5], vec![1.0, 2.5]];
        let y = vec![
            ClassLabel::Malicious,
            ClassLabel::Malicious,
            ClassLabel::Benign,
            ClassLabel::Benign,
        ];
        let model = train_naive_bayes(&x, &y, DEFAULT_VARIANCE_FLOOR).unwrap();
        let first = predict(&model, &probe).unwrap();
        let second = predict(&model, &probe).unwrap();
        prop_assert_eq!(first, second);
    }
}
