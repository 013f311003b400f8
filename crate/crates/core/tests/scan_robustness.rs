//! Scanning over hostile directory contents: garbage and truncated files
//! get their own entries and never disturb the entries of healthy files.

use std::collections::BTreeMap;
use std::fs;

use pescan_core::behavior::BehaviorCategoryMap;
use pescan_core::features::{content_hash, extract_raw, Corpus, Label};
use pescan_core::pca::PcaTarget;
use pescan_core::pe::parse_pe;
use pescan_core::pipeline::{
    build_pipeline, scan_directory, PipelineConfig, PipelineModel, ScanEntry, ScanOptions,
    ScanStatus,
};
use pescan_core::synth::{build_pe, profiles};

fn trained_model() -> PipelineModel {
    let (mal, ben) = profiles::separable(10, 10, 0x5C);
    let mut corpus = Corpus::new();
    for (profile, label) in [(mal, Label::Malicious), (ben, Label::Benign)] {
        for i in 0..profile.sample_count {
            let bytes = build_pe(&profile.draw_spec(i).unwrap()).unwrap();
            let pe = parse_pe(&bytes).unwrap();
            corpus.append(extract_raw(
                &pe,
                label,
                &format!("{label}/{i}"),
                content_hash(&bytes),
            ));
        }
    }
    let config = PipelineConfig {
        k_header: 20,
        k_dll: 12,
        k_api: 32,
        pca_target: PcaTarget::Components(8),
        ..Default::default()
    };
    build_pipeline(&corpus, &config).unwrap()
}

#[test]
fn garbage_files_affect_only_their_own_entries() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model();
    let map = BehaviorCategoryMap::default();

    let (mal, _) = profiles::separable(4, 4, 0x5D);
    for i in 0..4 {
        let bytes = build_pe(&mal.draw_spec(i).unwrap()).unwrap();
        fs::write(dir.path().join(format!("good_{i}.exe")), bytes).unwrap();
    }

    let before = scan_directory(dir.path(), &model, &map, ScanOptions::default()).unwrap();
    assert_eq!(before.len(), 4);
    assert!(before.iter().all(|e| e.status == ScanStatus::Classified));

    // Inject hostile content: random garbage, a truncated PE, a text file,
    // and a deeply nested garbage file.
    fs::write(dir.path().join("junk.bin"), [0u8; 64]).unwrap();
    let truncated = {
        let bytes = build_pe(&mal.draw_spec(0).unwrap()).unwrap();
        bytes[..100].to_vec()
    };
    fs::write(dir.path().join("truncated.exe"), truncated).unwrap();
    fs::write(dir.path().join("readme.txt"), "just text").unwrap();
    fs::create_dir(dir.path().join("sub")).unwrap();
    fs::write(dir.path().join("sub/more.bin"), b"MZ").unwrap();

    let after = scan_directory(dir.path(), &model, &map, ScanOptions::default()).unwrap();
    assert_eq!(after.len(), 8);

    // Traversal never aborts, and the healthy entries are bit-identical.
    let by_path = |entries: &[ScanEntry]| -> BTreeMap<String, ScanEntry> {
        entries
            .iter()
            .map(|e| (e.path.clone(), e.clone()))
            .collect()
    };
    let after_map = by_path(&after);
    for entry in &before {
        assert_eq!(Some(entry), after_map.get(&entry.path));
    }

    // The injected files landed in the right buckets.
    let junk = after.iter().find(|e| e.path.ends_with("junk.bin")).unwrap();
    assert_eq!(junk.status, ScanStatus::SkippedNotPe);
    let truncated_entry = after
        .iter()
        .find(|e| e.path.ends_with("truncated.exe"))
        .unwrap();
    assert_eq!(truncated_entry.status, ScanStatus::Error);
    assert!(truncated_entry.detail.is_some());
    let text_entry = after
        .iter()
        .find(|e| e.path.ends_with("readme.txt"))
        .unwrap();
    assert_eq!(text_entry.status, ScanStatus::SkippedNotPe);
    let nested = after.iter().find(|e| e.path.ends_with("more.bin")).unwrap();
    assert_eq!(nested.status, ScanStatus::SkippedNotPe);
}

#[test]
fn non_recursive_scan_ignores_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained_model();
    let map = BehaviorCategoryMap::default();

    let (mal, _) = profiles::separable(2, 2, 0x5E);
    fs::write(
        dir.path().join("top.exe"),
        build_pe(&mal.draw_spec(0).unwrap()).unwrap(),
    )
    .unwrap();
    fs::create_dir(dir.path().join("nested")).unwrap();
    fs::write(
        dir.path().join("nested/deep.exe"),
        build_pe(&mal.draw_spec(1).unwrap()).unwrap(),
    )
    .unwrap();

    let recursive = scan_directory(dir.path(), &model, &map, ScanOptions::default()).unwrap();
    assert_eq!(recursive.len(), 2);

    let flat = scan_directory(
        dir.path(),
        &model,
        &map,
        ScanOptions {
            recursive: false,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(flat.len(), 1);
    assert!(flat[0].path.ends_with("top.exe"));
}
