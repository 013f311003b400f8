//! Raw feature extraction: 138 named header integers plus the DLL and
//! qualified API name sets of each executable, and the line-oriented corpus
//! these records are stored in.
//!
//! The header feature order is fixed and identical for every record;
//! vectorization depends on it. Qualified API names use the form
//! `dllname!ApiName` with the DLL part lowercased and the API part
//! case-preserved.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pe::PeFile;

/// Number of named header features per record.
pub const HEADER_FEATURE_COUNT: usize = 138;

/// Fixed, documented order of the 138 header features: 31 DOS, 7 COFF,
/// 30 optional header, 16 data-directory sizes, 10 section aggregates,
/// 5 import, 11 export, 6 resource, 8 debug, 8 delay-import, 6 TLS.
pub const HEADER_FEATURE_NAMES: [&str; HEADER_FEATURE_COUNT] = [
    // DOS header (31)
    "e_magic",
    "e_cblp",
    "e_cp",
    "e_crlc",
    "e_cparhdr",
    "e_minalloc",
    "e_maxalloc",
    "e_ss",
    "e_sp",
    "e_csum",
    "e_ip",
    "e_cs",
    "e_lfarlc",
    "e_ovno",
    "e_res0",
    "e_res1",
    "e_res2",
    "e_res3",
    "e_oemid",
    "e_oeminfo",
    "e_res2_0",
    "e_res2_1",
    "e_res2_2",
    "e_res2_3",
    "e_res2_4",
    "e_res2_5",
    "e_res2_6",
    "e_res2_7",
    "e_res2_8",
    "e_res2_9",
    "e_lfanew",
    // COFF file header (7)
    "Machine",
    "NumberOfSections",
    "TimeDateStamp",
    "PointerToSymbolTable",
    "NumberOfSymbols",
    "SizeOfOptionalHeader",
    "Characteristics",
    // Optional header (30)
    "Magic",
    "MajorLinkerVersion",
    "MinorLinkerVersion",
    "SizeOfCode",
    "SizeOfInitializedData",
    "SizeOfUninitializedData",
    "AddressOfEntryPoint",
    "BaseOfCode",
    "BaseOfData",
    "ImageBase",
    "SectionAlignment",
    "FileAlignment",
    "MajorOperatingSystemVersion",
    "MinorOperatingSystemVersion",
    "MajorImageVersion",
    "MinorImageVersion",
    "MajorSubsystemVersion",
    "MinorSubsystemVersion",
    "Win32VersionValue",
    "SizeOfImage",
    "SizeOfHeaders",
    "CheckSum",
    "Subsystem",
    "DllCharacteristics",
    "SizeOfStackReserve",
    "SizeOfStackCommit",
    "SizeOfHeapReserve",
    "SizeOfHeapCommit",
    "LoaderFlags",
    "NumberOfRvaAndSizes",
    // Data directory sizes (16)
    "ExportTableSize",
    "ImportTableSize",
    "ResourceTableSize",
    "ExceptionTableSize",
    "CertificateTableSize",
    "BaseRelocationTableSize",
    "DebugDirectorySize",
    "ArchitectureSize",
    "GlobalPtrSize",
    "TlsTableSize",
    "LoadConfigTableSize",
    "BoundImportSize",
    "IatSize",
    "DelayImportDescriptorSize",
    "ClrRuntimeHeaderSize",
    "ReservedDirectorySize",
    // Section aggregates (10)
    "SectionCount",
    "VirtualSize",
    "SizeOfRawData",
    "NumberOfRelocations",
    "NumberOfLineNumbers",
    "RelocationPointerCount",
    "ExecutableSectionCount",
    "WritableSectionCount",
    "MaxVirtualSize",
    "RawToVirtualSizeRatio",
    // Import description (5)
    "ImportDescriptorCount",
    "ImportedApiCount",
    "DistinctDllCount",
    "BoundImportFlag",
    "MaxApisPerDll",
    // Export description (11)
    "ExportCharacteristics",
    "ExportTimeDateStamp",
    "ExportMajorVersion",
    "ExportMinorVersion",
    "ExportNameRva",
    "ExportOrdinalBase",
    "NumberOfExportFunctions",
    "NumberOfExportNames",
    "AddressOfFunctions",
    "AddressOfNames",
    "AddressOfNameOrdinals",
    // Resource table (6)
    "ResourceCharacteristics",
    "ResourceTimeDateStamp",
    "ResourceMajorVersion",
    "ResourceMinorVersion",
    "ResourceNamedEntryCount",
    "ResourceIdEntryCount",
    // Debug info (8)
    "DebugCharacteristics",
    "DebugTimeDateStamp",
    "DebugMajorVersion",
    "DebugMinorVersion",
    "DebugType",
    "DebugSizeOfData",
    "DebugAddressOfRawData",
    "DebugPointerToRawData",
    // Delay import (8)
    "DelayAttributes",
    "DelayDllNameRva",
    "DelayModuleHandleRva",
    "DelayImportAddressTableRva",
    "DelayImportNameTableRva",
    "DelayBoundImportAddressTableRva",
    "DelayUnloadInformationTableRva",
    "DelayTimeDateStamp",
    // TLS table (6)
    "TlsStartAddressOfRawData",
    "TlsEndAddressOfRawData",
    "TlsAddressOfIndex",
    "TlsAddressOfCallbacks",
    "TlsSizeOfZeroFill",
    "TlsCharacteristics",
];

static HEADER_FEATURE_INDEX: LazyLock<std::collections::HashMap<&'static str, usize>> =
    LazyLock::new(|| {
        HEADER_FEATURE_NAMES
            .iter()
            .enumerate()
            .map(|(i, &name)| (name, i))
            .collect()
    });

/// Index of a header feature name in the fixed order, if it exists.
pub fn header_feature_index(name: &str) -> Option<usize> {
    HEADER_FEATURE_INDEX.get(name).copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malicious,
    Benign,
    Unlabeled,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Malicious => write!(f, "malicious"),
            Label::Benign => write!(f, "benign"),
            Label::Unlabeled => write!(f, "unlabeled"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "malicious" => Ok(Label::Malicious),
            "benign" => Ok(Label::Benign),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Two-class label used by learning and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Malicious,
    Benign,
}

impl From<ClassLabel> for Label {
    fn from(c: ClassLabel) -> Label {
        match c {
            ClassLabel::Malicious => Label::Malicious,
            ClassLabel::Benign => Label::Benign,
        }
    }
}

impl Label {
    pub fn as_class(self) -> Option<ClassLabel> {
        match self {
            Label::Malicious => Some(ClassLabel::Malicious),
            Label::Benign => Some(ClassLabel::Benign),
            Label::Unlabeled => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Label::from(*self).fmt(f)
    }
}

/// The 138 header features of one record, in [`HEADER_FEATURE_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeaderFeatures(Vec<u64>);

impl HeaderFeatures {
    pub fn from_values(values: Vec<u64>) -> Result<Self, CorpusError> {
        if values.len() != HEADER_FEATURE_COUNT {
            return Err(CorpusError::Schema(format!(
                "expected {} header features, got {}",
                HEADER_FEATURE_COUNT,
                values.len()
            )));
        }
        Ok(Self(values))
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        header_feature_index(name).map(|i| self.0[i])
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, u64)> + '_ {
        HEADER_FEATURE_NAMES
            .iter()
            .copied()
            .zip(self.0.iter().copied())
    }
}

/// Per-executable extraction result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatureRecord {
    pub header_features: HeaderFeatures,
    /// Lowercase DLL names.
    pub dll_names: BTreeSet<String>,
    /// Qualified `dll!Api` names; every prefix appears in `dll_names`.
    pub api_names: BTreeSet<String>,
    pub label: Label,
    /// Hex digest of the file bytes; used for duplicate detection.
    pub content_hash: String,
    /// Provenance only; never used in learning.
    pub source_path: String,
}

/// SHA-256 hex digest of file bytes, the corpus duplicate-detection key.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

const HASH_ALGORITHM: &str = "sha256";

/// Build the raw feature record of a parsed file. Pure in its inputs; all
/// 138 header features are populated, with absent tables contributing
/// zeros.
pub fn extract_raw(
    pe: &PeFile,
    label: Label,
    source_path: &str,
    content_hash: String,
) -> RawFeatureRecord {
    let mut v = Vec::with_capacity(HEADER_FEATURE_COUNT);

    let dos = &pe.dos_header;
    v.extend([
        dos.e_magic as u64,
        dos.e_cblp as u64,
        dos.e_cp as u64,
        dos.e_crlc as u64,
        dos.e_cparhdr as u64,
        dos.e_minalloc as u64,
        dos.e_maxalloc as u64,
        dos.e_ss as u64,
        dos.e_sp as u64,
        dos.e_csum as u64,
        dos.e_ip as u64,
        dos.e_cs as u64,
        dos.e_lfarlc as u64,
        dos.e_ovno as u64,
    ]);
    v.extend(dos.e_res.iter().map(|&x| x as u64));
    v.extend([dos.e_oemid as u64, dos.e_oeminfo as u64]);
    v.extend(dos.e_res2.iter().map(|&x| x as u64));
    v.push(dos.e_lfanew as u64);

    let coff = &pe.coff_header;
    v.extend([
        coff.machine as u64,
        coff.number_of_sections as u64,
        coff.time_date_stamp as u64,
        coff.pointer_to_symbol_table as u64,
        coff.number_of_symbols as u64,
        coff.size_of_optional_header as u64,
        coff.characteristics as u64,
    ]);

    let opt = &pe.optional_header;
    v.extend([
        opt.magic as u64,
        opt.major_linker_version as u64,
        opt.minor_linker_version as u64,
        opt.size_of_code as u64,
        opt.size_of_initialized_data as u64,
        opt.size_of_uninitialized_data as u64,
        opt.address_of_entry_point as u64,
        opt.base_of_code as u64,
        opt.base_of_data as u64,
        opt.image_base,
        opt.section_alignment as u64,
        opt.file_alignment as u64,
        opt.major_operating_system_version as u64,
        opt.minor_operating_system_version as u64,
        opt.major_image_version as u64,
        opt.minor_image_version as u64,
        opt.major_subsystem_version as u64,
        opt.minor_subsystem_version as u64,
        opt.win32_version_value as u64,
        opt.size_of_image as u64,
        opt.size_of_headers as u64,
        opt.checksum as u64,
        opt.subsystem as u64,
        opt.dll_characteristics as u64,
        opt.size_of_stack_reserve,
        opt.size_of_stack_commit,
        opt.size_of_heap_reserve,
        opt.size_of_heap_commit,
        opt.loader_flags as u64,
        opt.number_of_rva_and_sizes as u64,
    ]);

    v.extend(pe.data_directories.iter().map(|d| d.size as u64));

    // Section aggregates: sums and counts are order-independent; the raw
    // to virtual ratio is scaled by 1000 and integerized.
    let sections = &pe.sections;
    let sum_virtual: u64 = sections.iter().map(|s| s.virtual_size as u64).sum();
    let sum_raw: u64 = sections.iter().map(|s| s.size_of_raw_data as u64).sum();
    v.extend([
        sections.len() as u64,
        sum_virtual,
        sum_raw,
        sections
            .iter()
            .map(|s| s.number_of_relocations as u64)
            .sum(),
        sections
            .iter()
            .map(|s| s.number_of_line_numbers as u64)
            .sum(),
        sections
            .iter()
            .filter(|s| s.pointer_to_relocations != 0)
            .count() as u64,
        sections.iter().filter(|s| s.is_executable()).count() as u64,
        sections.iter().filter(|s| s.is_writable()).count() as u64,
        sections
            .iter()
            .map(|s| s.virtual_size as u64)
            .max()
            .unwrap_or(0),
        sum_raw
            .saturating_mul(1000)
            .checked_div(sum_virtual)
            .unwrap_or(0),
    ]);

    let api_total: u64 = pe.imports.iter().map(|i| i.api_names.len() as u64).sum();
    let distinct_dlls = pe
        .imports
        .iter()
        .map(|i| i.dll_name.as_str())
        .collect::<BTreeSet<_>>()
        .len() as u64;
    v.extend([
        pe.imports.len() as u64,
        api_total,
        distinct_dlls,
        u64::from(pe.imports.iter().any(|i| i.descriptor.time_date_stamp != 0)),
        pe.imports
            .iter()
            .map(|i| i.api_names.len() as u64)
            .max()
            .unwrap_or(0),
    ]);

    let ex = &pe.exports;
    v.extend([
        ex.characteristics as u64,
        ex.time_date_stamp as u64,
        ex.major_version as u64,
        ex.minor_version as u64,
        ex.name_rva as u64,
        ex.ordinal_base as u64,
        ex.number_of_functions as u64,
        ex.number_of_names as u64,
        ex.address_of_functions as u64,
        ex.address_of_names as u64,
        ex.address_of_name_ordinals as u64,
    ]);

    let res = &pe.resource_summary;
    v.extend([
        res.characteristics as u64,
        res.time_date_stamp as u64,
        res.major_version as u64,
        res.minor_version as u64,
        res.number_of_named_entries as u64,
        res.number_of_id_entries as u64,
    ]);

    let dbg = &pe.debug_info;
    v.extend([
        dbg.characteristics as u64,
        dbg.time_date_stamp as u64,
        dbg.major_version as u64,
        dbg.minor_version as u64,
        dbg.debug_type as u64,
        dbg.size_of_data as u64,
        dbg.address_of_raw_data as u64,
        dbg.pointer_to_raw_data as u64,
    ]);

    let delay = &pe.delay_imports;
    v.extend([
        delay.attributes as u64,
        delay.dll_name_rva as u64,
        delay.module_handle_rva as u64,
        delay.import_address_table_rva as u64,
        delay.import_name_table_rva as u64,
        delay.bound_import_address_table_rva as u64,
        delay.unload_information_table_rva as u64,
        delay.time_date_stamp as u64,
    ]);

    let tls = &pe.tls_table;
    v.extend([
        tls.start_address_of_raw_data,
        tls.end_address_of_raw_data,
        tls.address_of_index,
        tls.address_of_callbacks,
        tls.size_of_zero_fill as u64,
        tls.characteristics as u64,
    ]);

    debug_assert_eq!(v.len(), HEADER_FEATURE_COUNT);

    let mut dll_names = BTreeSet::new();
    let mut api_names = BTreeSet::new();
    for import in &pe.imports {
        dll_names.insert(import.dll_name.clone());
        for api in &import.api_names {
            api_names.insert(format!("{}!{}", import.dll_name, api));
        }
    }

    RawFeatureRecord {
        header_features: HeaderFeatures(v),
        dll_names,
        api_names,
        label,
        content_hash,
        source_path: source_path.to_string(),
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
}

/// A deduplicated collection of feature records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<RawFeatureRecord>,
}

/// Outcome of one append.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Added,
    /// A record with the same content hash was already present.
    Duplicate,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[RawFeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    /// Append `record` unless its content hash is already present.
    pub fn append(&mut self, record: RawFeatureRecord) -> AppendOutcome {
        if self
            .records
            .iter()
            .any(|r| r.content_hash == record.content_hash)
        {
            AppendOutcome::Duplicate
        } else {
            self.records.push(record);
            AppendOutcome::Added
        }
    }

    /// Digest over all record hashes, identifying the corpus contents.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for record in &self.records {
            hasher.update(record.content_hash.as_bytes());
            hasher.update(*b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusFileHeader {
    format: String,
    version: u32,
    hash_algorithm: String,
    header_features: Vec<String>,
}

const CORPUS_FORMAT: &str = "pescan-corpus";
const CORPUS_VERSION: u32 = 1;

/// Write the corpus as line-oriented UTF-8 text: a self-describing header
/// line followed by one JSON record per line.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let header = CorpusFileHeader {
        format: CORPUS_FORMAT.to_string(),
        version: CORPUS_VERSION,
        hash_algorithm: HASH_ALGORITHM.to_string(),
        header_features: HEADER_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes") + "\n";
    for record in &corpus.records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a corpus file, validating the header line, per-record schema, and
/// the no-duplicate-hash invariant. An empty file is an empty corpus.
pub fn read_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path)?;
    let mut corpus = Corpus::new();
    let mut lines = text.lines().enumerate();

    let Some((_, header_line)) = lines.next() else {
        return Ok(corpus);
    };
    let header: CorpusFileHeader =
        serde_json::from_str(header_line).map_err(|e| CorpusError::Format {
            line: 1,
            message: format!("bad corpus header: {e}"),
        })?;
    if header.format != CORPUS_FORMAT || header.version != CORPUS_VERSION {
        return Err(CorpusError::Format {
            line: 1,
            message: format!(
                "unsupported corpus format {}/{} (expected {}/{})",
                header.format, header.version, CORPUS_FORMAT, CORPUS_VERSION
            ),
        });
    }
    if header.header_features != HEADER_FEATURE_NAMES {
        return Err(CorpusError::Format {
            line: 1,
            message: "header feature list does not match this build".into(),
        });
    }

    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = index + 1;
        let record: RawFeatureRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::Format {
                line: line_no,
                message: e.to_string(),
            })?;
        validate_record(&record).map_err(|message| CorpusError::Format {
            line: line_no,
            message,
        })?;
        if corpus.append(record) == AppendOutcome::Duplicate {
            return Err(CorpusError::Format {
                line: line_no,
                message: "duplicate content hash".into(),
            });
        }
    }
    Ok(corpus)
}

fn validate_record(record: &RawFeatureRecord) -> Result<(), String> {
    if record.header_features.values().len() != HEADER_FEATURE_COUNT {
        return Err(format!(
            "record has {} header features, expected {}",
            record.header_features.values().len(),
            HEADER_FEATURE_COUNT
        ));
    }
    for api in &record.api_names {
        let Some((dll, _)) = api.split_once('!') else {
            return Err(format!("API name {api:?} is not dll!api qualified"));
        };
        if !record.dll_names.contains(dll) {
            return Err(format!("API {api:?} names a DLL absent from dll_names"));
        }
    }
    if record.content_hash.is_empty() {
        return Err("empty content hash".into());
    }
    Ok(())
}
