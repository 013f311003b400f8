//! Deterministic generation of minimal, structurally valid PE32 files.
//!
//! Generated images are inert: they carry no executable code (the entry
//! point targets zero-filled section space) and exist purely as parser and
//! pipeline fixtures. Layout constants are fixed — file alignment 512,
//! section alignment 4096 — so offset arithmetic stays simple and the
//! builder's output is a pure function of its spec.
//!
//! When a spec requests imports or optional tables the builder appends one
//! fixed-capacity `.synth` data section holding them. Its size does not
//! depend on the table contents, so adding an import changes only the
//! import-table scalars of the parsed file, not section aggregates.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Label;

pub const FILE_ALIGNMENT: u32 = 512;
pub const SECTION_ALIGNMENT: u32 = 4096;
/// Fixed raw/virtual size of the appended table section.
pub const SYNTH_SECTION_CAPACITY: usize = 16384;
pub const SYNTH_SECTION_NAME: &str = ".synth";

const MAX_SECTION_RAW: u32 = 4 << 20;
const MAX_SECTION_VIRTUAL: u32 = 64 << 20;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec(msg.into())
}

/// One section of the generated image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionSpec {
    pub name: String,
    pub virtual_size: u32,
    pub raw_size: u32,
    pub characteristics: u32,
    #[serde(default)]
    pub number_of_relocations: u16,
    #[serde(default)]
    pub number_of_line_numbers: u16,
    #[serde(default)]
    pub pointer_to_relocations: u32,
}

impl SectionSpec {
    pub fn new(name: &str, virtual_size: u32, raw_size: u32, characteristics: u32) -> Self {
        Self {
            name: name.to_string(),
            virtual_size,
            raw_size,
            characteristics,
            number_of_relocations: 0,
            number_of_line_numbers: 0,
            pointer_to_relocations: 0,
        }
    }
}

/// Blueprint for one synthetic PE32 image.
///
/// `overrides` sets raw header fields by name (see [`OVERRIDABLE_FIELDS`]);
/// layout-determined fields (`e_magic`, `e_lfanew`, section counts,
/// alignments, `Magic`, `SizeOfHeaders`, `NumberOfRvaAndSizes`) are not
/// overridable. API names of the form `ord<decimal>` are encoded as
/// ordinal imports.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PeFileSpec {
    #[serde(default)]
    pub overrides: BTreeMap<String, u64>,
    pub sections: Vec<SectionSpec>,
    #[serde(default)]
    pub imports: BTreeMap<String, Vec<String>>,
    /// Written into every import descriptor; nonzero marks imports bound.
    #[serde(default)]
    pub import_time_date_stamp: u32,
}

/// Overridable header fields with their bit widths.
pub const OVERRIDABLE_FIELDS: &[(&str, u8)] = &[
    // DOS header (all but e_magic and e_lfanew)
    ("e_cblp", 16),
    ("e_cp", 16),
    ("e_crlc", 16),
    ("e_cparhdr", 16),
    ("e_minalloc", 16),
    ("e_maxalloc", 16),
    ("e_ss", 16),
    ("e_sp", 16),
    ("e_csum", 16),
    ("e_ip", 16),
    ("e_cs", 16),
    ("e_lfarlc", 16),
    ("e_ovno", 16),
    ("e_res0", 16),
    ("e_res1", 16),
    ("e_res2", 16),
    ("e_res3", 16),
    ("e_oemid", 16),
    ("e_oeminfo", 16),
    ("e_res2_0", 16),
    ("e_res2_1", 16),
    ("e_res2_2", 16),
    ("e_res2_3", 16),
    ("e_res2_4", 16),
    ("e_res2_5", 16),
    ("e_res2_6", 16),
    ("e_res2_7", 16),
    ("e_res2_8", 16),
    ("e_res2_9", 16),
    // COFF header
    ("Machine", 16),
    ("TimeDateStamp", 32),
    ("PointerToSymbolTable", 32),
    ("NumberOfSymbols", 32),
    ("Characteristics", 16),
    // Optional header
    ("MajorLinkerVersion", 8),
    ("MinorLinkerVersion", 8),
    ("SizeOfCode", 32),
    ("SizeOfInitializedData", 32),
    ("SizeOfUninitializedData", 32),
    ("AddressOfEntryPoint", 32),
    ("BaseOfCode", 32),
    ("BaseOfData", 32),
    ("ImageBase", 32),
    ("MajorOperatingSystemVersion", 16),
    ("MinorOperatingSystemVersion", 16),
    ("MajorImageVersion", 16),
    ("MinorImageVersion", 16),
    ("MajorSubsystemVersion", 16),
    ("MinorSubsystemVersion", 16),
    ("Win32VersionValue", 32),
    ("SizeOfImage", 32),
    ("CheckSum", 32),
    ("Subsystem", 16),
    ("DllCharacteristics", 16),
    ("SizeOfStackReserve", 32),
    ("SizeOfStackCommit", 32),
    ("SizeOfHeapReserve", 32),
    ("SizeOfHeapCommit", 32),
    ("LoaderFlags", 32),
    // Sizes of data directories the builder leaves unused (written with
    // a zero RVA).
    ("ExceptionTableSize", 32),
    ("CertificateTableSize", 32),
    ("BaseRelocationTableSize", 32),
    ("ArchitectureSize", 32),
    ("GlobalPtrSize", 32),
    ("LoadConfigTableSize", 32),
    ("BoundImportSize", 32),
    ("IatSize", 32),
    ("ReservedDirectorySize", 32),
    // Export directory (any override emits the 40-byte table)
    ("ExportCharacteristics", 32),
    ("ExportTimeDateStamp", 32),
    ("ExportMajorVersion", 16),
    ("ExportMinorVersion", 16),
    ("ExportNameRva", 32),
    ("ExportOrdinalBase", 32),
    ("NumberOfExportFunctions", 32),
    ("NumberOfExportNames", 32),
    ("AddressOfFunctions", 32),
    ("AddressOfNames", 32),
    ("AddressOfNameOrdinals", 32),
    // Resource directory header
    ("ResourceCharacteristics", 32),
    ("ResourceTimeDateStamp", 32),
    ("ResourceMajorVersion", 16),
    ("ResourceMinorVersion", 16),
    ("ResourceNamedEntryCount", 16),
    ("ResourceIdEntryCount", 16),
    // First debug directory entry
    ("DebugCharacteristics", 32),
    ("DebugTimeDateStamp", 32),
    ("DebugMajorVersion", 16),
    ("DebugMinorVersion", 16),
    ("DebugType", 32),
    ("DebugSizeOfData", 32),
    ("DebugAddressOfRawData", 32),
    ("DebugPointerToRawData", 32),
    // First delay-import descriptor
    ("DelayAttributes", 32),
    ("DelayDllNameRva", 32),
    ("DelayModuleHandleRva", 32),
    ("DelayImportAddressTableRva", 32),
    ("DelayImportNameTableRva", 32),
    ("DelayBoundImportAddressTableRva", 32),
    ("DelayUnloadInformationTableRva", 32),
    ("DelayTimeDateStamp", 32),
    // TLS directory
    ("TlsStartAddressOfRawData", 32),
    ("TlsEndAddressOfRawData", 32),
    ("TlsAddressOfIndex", 32),
    ("TlsAddressOfCallbacks", 32),
    ("TlsSizeOfZeroFill", 32),
    ("TlsCharacteristics", 32),
];

const EXPORT_KEYS: &[&str] = &[
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
];
const RESOURCE_KEYS: &[&str] = &[
    "ResourceCharacteristics",
    "ResourceTimeDateStamp",
    "ResourceMajorVersion",
    "ResourceMinorVersion",
    "ResourceNamedEntryCount",
    "ResourceIdEntryCount",
];
const DEBUG_KEYS: &[&str] = &[
    "DebugCharacteristics",
    "DebugTimeDateStamp",
    "DebugMajorVersion",
    "DebugMinorVersion",
    "DebugType",
    "DebugSizeOfData",
    "DebugAddressOfRawData",
    "DebugPointerToRawData",
];
const DELAY_KEYS: &[&str] = &[
    "DelayAttributes",
    "DelayDllNameRva",
    "DelayModuleHandleRva",
    "DelayImportAddressTableRva",
    "DelayImportNameTableRva",
    "DelayBoundImportAddressTableRva",
    "DelayUnloadInformationTableRva",
    "DelayTimeDateStamp",
];
const TLS_KEYS: &[&str] = &[
    "TlsStartAddressOfRawData",
    "TlsEndAddressOfRawData",
    "TlsAddressOfIndex",
    "TlsAddressOfCallbacks",
    "TlsSizeOfZeroFill",
    "TlsCharacteristics",
];

// (directory index, override key) for directories emitted without data.
const FREE_DIRECTORY_SIZES: &[(usize, &str)] = &[
    (3, "ExceptionTableSize"),
    (4, "CertificateTableSize"),
    (5, "BaseRelocationTableSize"),
    (7, "ArchitectureSize"),
    (8, "GlobalPtrSize"),
    (10, "LoadConfigTableSize"),
    (11, "BoundImportSize"),
    (12, "IatSize"),
    (15, "ReservedDirectorySize"),
];

impl PeFileSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.sections.is_empty() {
            return Err(invalid("spec must declare at least one section"));
        }
        for s in &self.sections {
            if s.name.len() > 8 {
                return Err(invalid(format!(
                    "section name {:?} exceeds 8 bytes",
                    s.name
                )));
            }
            if s.name.bytes().any(|b| b == 0) {
                return Err(invalid("section name contains NUL"));
            }
            if s.raw_size > MAX_SECTION_RAW {
                return Err(invalid("section raw size exceeds builder limit"));
            }
            if s.virtual_size > MAX_SECTION_VIRTUAL {
                return Err(invalid("section virtual size exceeds builder limit"));
            }
        }
        for (dll, apis) in &self.imports {
            if dll.is_empty() || dll.len() > 256 || dll.bytes().any(|b| b == 0) {
                return Err(invalid(format!("bad DLL name {dll:?}")));
            }
            for api in apis {
                if api.is_empty() || api.len() > 256 || api.bytes().any(|b| b == 0) {
                    return Err(invalid(format!("bad API name {api:?} in {dll}")));
                }
                if let Some(ord) = parse_ordinal_name(api) {
                    if ord > 0xFFFF {
                        return Err(invalid(format!("ordinal {ord} exceeds 16 bits")));
                    }
                }
            }
        }
        for (key, value) in &self.overrides {
            let Some(&(_, bits)) = OVERRIDABLE_FIELDS.iter().find(|(n, _)| n == key) else {
                return Err(invalid(format!("unknown override field {key:?}")));
            };
            let max = if bits == 64 {
                u64::MAX
            } else {
                (1u64 << bits) - 1
            };
            if *value > max {
                return Err(invalid(format!(
                    "override {key}={value} exceeds {bits}-bit field"
                )));
            }
        }
        Ok(())
    }

    fn any_key(&self, keys: &[&str]) -> bool {
        keys.iter().any(|k| self.overrides.contains_key(*k))
    }
}

fn parse_ordinal_name(api: &str) -> Option<u64> {
    let digits = api.strip_prefix("ord")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn align_up(value: u32, alignment: u32) -> u32 {
    value.div_ceil(alignment) * alignment
}

// Little-endian patching into a preallocated image.
struct Image {
    bytes: Vec<u8>,
}

impl Image {
    fn put_u16(&mut self, off: usize, v: u16) {
        self.bytes[off..off + 2].copy_from_slice(&v.to_le_bytes());
    }
    fn put_u32(&mut self, off: usize, v: u32) {
        self.bytes[off..off + 4].copy_from_slice(&v.to_le_bytes());
    }
    fn put_bytes(&mut self, off: usize, data: &[u8]) {
        self.bytes[off..off + data.len()].copy_from_slice(data);
    }
}

struct PlacedSection {
    virtual_address: u32,
    raw_pointer: u32,
}

/// Serialize a [`PeFileSpec`] into PE32 image bytes.
pub fn build_pe(spec: &PeFileSpec) -> Result<Vec<u8>, SynthError> {
    spec.validate()?;
    let ov = |key: &str, default: u64| spec.overrides.get(key).copied().unwrap_or(default);

    // The table section is always present and always the same size, so
    // section aggregates never depend on import or table contents.
    let total_sections = spec.sections.len() + 1;
    let section_table_off = 312usize; // 64 DOS + 4 sig + 20 COFF + 224 optional
    let headers_size = align_up(
        (section_table_off + 40 * total_sections) as u32,
        FILE_ALIGNMENT,
    );

    // Place user sections, then the fixed-capacity table section.
    let mut va_cursor: u32 = SECTION_ALIGNMENT;
    let mut raw_cursor: u32 = headers_size;
    let mut placed = Vec::with_capacity(spec.sections.len());
    for s in &spec.sections {
        let reserve = align_up(s.virtual_size.max(s.raw_size).max(1), SECTION_ALIGNMENT);
        placed.push(PlacedSection {
            virtual_address: va_cursor,
            raw_pointer: if s.raw_size > 0 { raw_cursor } else { 0 },
        });
        va_cursor = va_cursor
            .checked_add(reserve)
            .ok_or_else(|| invalid("image virtual layout overflows"))?;
        raw_cursor = raw_cursor
            .checked_add(align_up(s.raw_size, FILE_ALIGNMENT))
            .ok_or_else(|| invalid("image raw layout overflows"))?;
    }
    let synth_va = va_cursor;
    let synth_raw = raw_cursor;
    va_cursor += align_up(SYNTH_SECTION_CAPACITY as u32, SECTION_ALIGNMENT);
    raw_cursor += SYNTH_SECTION_CAPACITY as u32;

    let mut directories = [(0u32, 0u32); 16];
    for (index, key) in FREE_DIRECTORY_SIZES {
        if let Some(size) = spec.overrides.get(*key) {
            directories[*index] = (0, *size as u32);
        }
    }

    let synth_content = build_synth_section(spec, synth_va, &mut directories)?;

    let mut image = Image {
        bytes: vec![0u8; raw_cursor as usize],
    };

    // DOS header.
    image.put_u16(0, 0x5A4D);
    let dos_words: [(&str, usize); 13] = [
        ("e_cblp", 2),
        ("e_cp", 4),
        ("e_crlc", 6),
        ("e_cparhdr", 8),
        ("e_minalloc", 10),
        ("e_maxalloc", 12),
        ("e_ss", 14),
        ("e_sp", 16),
        ("e_csum", 18),
        ("e_ip", 20),
        ("e_cs", 22),
        ("e_lfarlc", 24),
        ("e_ovno", 26),
    ];
    for (key, off) in dos_words {
        image.put_u16(off, ov(key, 0) as u16);
    }
    for i in 0..4 {
        image.put_u16(28 + 2 * i, ov(&format!("e_res{i}"), 0) as u16);
    }
    image.put_u16(36, ov("e_oemid", 0) as u16);
    image.put_u16(38, ov("e_oeminfo", 0) as u16);
    for i in 0..10 {
        image.put_u16(40 + 2 * i, ov(&format!("e_res2_{i}"), 0) as u16);
    }
    image.put_u32(0x3C, 0x40);

    // Signature + COFF header.
    image.put_bytes(0x40, b"PE\0\0");
    let coff = 0x44;
    image.put_u16(coff, ov("Machine", 0x014C) as u16);
    image.put_u16(coff + 2, total_sections as u16);
    image.put_u32(coff + 4, ov("TimeDateStamp", 0) as u32);
    image.put_u32(coff + 8, ov("PointerToSymbolTable", 0) as u32);
    image.put_u32(coff + 12, ov("NumberOfSymbols", 0) as u32);
    image.put_u16(coff + 16, 224);
    image.put_u16(coff + 18, ov("Characteristics", 0x0102) as u16);

    // Optional header (PE32).
    let opt = 0x58;
    image.put_u16(opt, 0x010B);
    image.bytes[opt + 2] = ov("MajorLinkerVersion", 0) as u8;
    image.bytes[opt + 3] = ov("MinorLinkerVersion", 0) as u8;
    image.put_u32(opt + 4, ov("SizeOfCode", 0) as u32);
    image.put_u32(opt + 8, ov("SizeOfInitializedData", 0) as u32);
    image.put_u32(opt + 12, ov("SizeOfUninitializedData", 0) as u32);
    let entry_default = placed[0].virtual_address as u64;
    image.put_u32(opt + 16, ov("AddressOfEntryPoint", entry_default) as u32);
    image.put_u32(opt + 20, ov("BaseOfCode", entry_default) as u32);
    image.put_u32(opt + 24, ov("BaseOfData", 0) as u32);
    image.put_u32(opt + 28, ov("ImageBase", 0x0040_0000) as u32);
    image.put_u32(opt + 32, SECTION_ALIGNMENT);
    image.put_u32(opt + 36, FILE_ALIGNMENT);
    image.put_u16(opt + 40, ov("MajorOperatingSystemVersion", 0) as u16);
    image.put_u16(opt + 42, ov("MinorOperatingSystemVersion", 0) as u16);
    image.put_u16(opt + 44, ov("MajorImageVersion", 0) as u16);
    image.put_u16(opt + 46, ov("MinorImageVersion", 0) as u16);
    image.put_u16(opt + 48, ov("MajorSubsystemVersion", 0) as u16);
    image.put_u16(opt + 50, ov("MinorSubsystemVersion", 0) as u16);
    image.put_u32(opt + 52, ov("Win32VersionValue", 0) as u32);
    image.put_u32(opt + 56, ov("SizeOfImage", va_cursor as u64) as u32);
    image.put_u32(opt + 60, headers_size);
    image.put_u32(opt + 64, ov("CheckSum", 0) as u32);
    image.put_u16(opt + 68, ov("Subsystem", 3) as u16);
    image.put_u16(opt + 70, ov("DllCharacteristics", 0) as u16);
    image.put_u32(opt + 72, ov("SizeOfStackReserve", 0x0010_0000) as u32);
    image.put_u32(opt + 76, ov("SizeOfStackCommit", 0x1000) as u32);
    image.put_u32(opt + 80, ov("SizeOfHeapReserve", 0x0010_0000) as u32);
    image.put_u32(opt + 84, ov("SizeOfHeapCommit", 0x1000) as u32);
    image.put_u32(opt + 88, ov("LoaderFlags", 0) as u32);
    image.put_u32(opt + 92, 16);

    let dirs_off = opt + 96;
    for (i, (va, size)) in directories.iter().enumerate() {
        image.put_u32(dirs_off + 8 * i, *va);
        image.put_u32(dirs_off + 8 * i + 4, *size);
    }

    // Section table.
    for (i, s) in spec.sections.iter().enumerate() {
        let off = section_table_off + 40 * i;
        write_section_header(
            &mut image,
            off,
            &s.name,
            s.virtual_size,
            placed[i].virtual_address,
            s.raw_size,
            placed[i].raw_pointer,
            s.pointer_to_relocations,
            s.number_of_relocations,
            s.number_of_line_numbers,
            s.characteristics,
        );
    }
    // Initialized data, readable.
    let off = section_table_off + 40 * spec.sections.len();
    write_section_header(
        &mut image,
        off,
        SYNTH_SECTION_NAME,
        SYNTH_SECTION_CAPACITY as u32,
        synth_va,
        SYNTH_SECTION_CAPACITY as u32,
        synth_raw,
        0,
        0,
        0,
        0x4000_0040,
    );
    image.put_bytes(synth_raw as usize, &synth_content);

    Ok(image.bytes)
}

#[allow(clippy::too_many_arguments)]
fn write_section_header(
    image: &mut Image,
    off: usize,
    name: &str,
    virtual_size: u32,
    virtual_address: u32,
    raw_size: u32,
    raw_pointer: u32,
    pointer_to_relocations: u32,
    number_of_relocations: u16,
    number_of_line_numbers: u16,
    characteristics: u32,
) {
    let mut name_bytes = [0u8; 8];
    name_bytes[..name.len()].copy_from_slice(name.as_bytes());
    image.put_bytes(off, &name_bytes);
    image.put_u32(off + 8, virtual_size);
    image.put_u32(off + 12, virtual_address);
    image.put_u32(off + 16, raw_size);
    image.put_u32(off + 20, raw_pointer);
    image.put_u32(off + 24, pointer_to_relocations);
    image.put_u32(off + 28, 0);
    image.put_u16(off + 32, number_of_relocations);
    image.put_u16(off + 34, number_of_line_numbers);
    image.put_u32(off + 36, characteristics);
}

/// Lay out the import table and any requested optional tables inside the
/// fixed-capacity synth section. Returns the section content and fills in
/// the matching data-directory entries.
fn build_synth_section(
    spec: &PeFileSpec,
    base_va: u32,
    directories: &mut [(u32, u32); 16],
) -> Result<Vec<u8>, SynthError> {
    let mut buf: Vec<u8> = Vec::new();
    let ov = |key: &str| spec.overrides.get(key).copied().unwrap_or(0);

    if !spec.imports.is_empty() {
        let dll_count = spec.imports.len();
        let desc_len = 20 * (dll_count + 1);
        buf.resize(desc_len, 0);

        for (index, (dll, apis)) in spec.imports.iter().enumerate() {
            // Thunk arrays first (INT, then an identical IAT).
            align_to(&mut buf, 4);
            let int_off = buf.len();
            buf.resize(int_off + 4 * (apis.len() + 1), 0);
            let iat_off = buf.len();
            buf.resize(iat_off + 4 * (apis.len() + 1), 0);

            for (slot, api) in apis.iter().enumerate() {
                let thunk = if let Some(ordinal) = parse_ordinal_name(api) {
                    0x8000_0000 | ordinal as u32
                } else {
                    align_to(&mut buf, 2);
                    let hint_off = buf.len();
                    buf.extend_from_slice(&[0, 0]); // hint
                    buf.extend_from_slice(api.as_bytes());
                    buf.push(0);
                    base_va + hint_off as u32
                };
                let le = thunk.to_le_bytes();
                buf[int_off + 4 * slot..int_off + 4 * slot + 4].copy_from_slice(&le);
                buf[iat_off + 4 * slot..iat_off + 4 * slot + 4].copy_from_slice(&le);
            }

            let name_off = buf.len();
            buf.extend_from_slice(dll.as_bytes());
            buf.push(0);

            let d = 20 * index;
            buf[d..d + 4].copy_from_slice(&(base_va + int_off as u32).to_le_bytes());
            buf[d + 4..d + 8].copy_from_slice(&spec.import_time_date_stamp.to_le_bytes());
            buf[d + 12..d + 16].copy_from_slice(&(base_va + name_off as u32).to_le_bytes());
            buf[d + 16..d + 20].copy_from_slice(&(base_va + iat_off as u32).to_le_bytes());
        }
        directories[1] = (base_va, desc_len as u32);
    }

    if spec.any_key(EXPORT_KEYS) {
        align_to(&mut buf, 4);
        let off = buf.len();
        push_u32(&mut buf, ov("ExportCharacteristics") as u32);
        push_u32(&mut buf, ov("ExportTimeDateStamp") as u32);
        push_u16(&mut buf, ov("ExportMajorVersion") as u16);
        push_u16(&mut buf, ov("ExportMinorVersion") as u16);
        push_u32(&mut buf, ov("ExportNameRva") as u32);
        push_u32(&mut buf, ov("ExportOrdinalBase") as u32);
        push_u32(&mut buf, ov("NumberOfExportFunctions") as u32);
        push_u32(&mut buf, ov("NumberOfExportNames") as u32);
        push_u32(&mut buf, ov("AddressOfFunctions") as u32);
        push_u32(&mut buf, ov("AddressOfNames") as u32);
        push_u32(&mut buf, ov("AddressOfNameOrdinals") as u32);
        directories[0] = (base_va + off as u32, 40);
    }

    if spec.any_key(RESOURCE_KEYS) {
        align_to(&mut buf, 4);
        let off = buf.len();
        push_u32(&mut buf, ov("ResourceCharacteristics") as u32);
        push_u32(&mut buf, ov("ResourceTimeDateStamp") as u32);
        push_u16(&mut buf, ov("ResourceMajorVersion") as u16);
        push_u16(&mut buf, ov("ResourceMinorVersion") as u16);
        push_u16(&mut buf, ov("ResourceNamedEntryCount") as u16);
        push_u16(&mut buf, ov("ResourceIdEntryCount") as u16);
        directories[2] = (base_va + off as u32, 16);
    }

    if spec.any_key(DEBUG_KEYS) {
        align_to(&mut buf, 4);
        let off = buf.len();
        push_u32(&mut buf, ov("DebugCharacteristics") as u32);
        push_u32(&mut buf, ov("DebugTimeDateStamp") as u32);
        push_u16(&mut buf, ov("DebugMajorVersion") as u16);
        push_u16(&mut buf, ov("DebugMinorVersion") as u16);
        push_u32(&mut buf, ov("DebugType") as u32);
        push_u32(&mut buf, ov("DebugSizeOfData") as u32);
        push_u32(&mut buf, ov("DebugAddressOfRawData") as u32);
        push_u32(&mut buf, ov("DebugPointerToRawData") as u32);
        directories[6] = (base_va + off as u32, 28);
    }

    if spec.any_key(TLS_KEYS) {
        align_to(&mut buf, 4);
        let off = buf.len();
        push_u32(&mut buf, ov("TlsStartAddressOfRawData") as u32);
        push_u32(&mut buf, ov("TlsEndAddressOfRawData") as u32);
        push_u32(&mut buf, ov("TlsAddressOfIndex") as u32);
        push_u32(&mut buf, ov("TlsAddressOfCallbacks") as u32);
        push_u32(&mut buf, ov("TlsSizeOfZeroFill") as u32);
        push_u32(&mut buf, ov("TlsCharacteristics") as u32);
        directories[9] = (base_va + off as u32, 24);
    }

    if spec.any_key(DELAY_KEYS) {
        align_to(&mut buf, 4);
        let off = buf.len();
        push_u32(&mut buf, ov("DelayAttributes") as u32);
        push_u32(&mut buf, ov("DelayDllNameRva") as u32);
        push_u32(&mut buf, ov("DelayModuleHandleRva") as u32);
        push_u32(&mut buf, ov("DelayImportAddressTableRva") as u32);
        push_u32(&mut buf, ov("DelayImportNameTableRva") as u32);
        push_u32(&mut buf, ov("DelayBoundImportAddressTableRva") as u32);
        push_u32(&mut buf, ov("DelayUnloadInformationTableRva") as u32);
        push_u32(&mut buf, ov("DelayTimeDateStamp") as u32);
        directories[13] = (base_va + off as u32, 32);
    }

    if buf.len() > SYNTH_SECTION_CAPACITY {
        return Err(invalid(format!(
            "import/table data ({} bytes) exceeds synth section capacity {}",
            buf.len(),
            SYNTH_SECTION_CAPACITY
        )));
    }
    buf.resize(SYNTH_SECTION_CAPACITY, 0);
    Ok(buf)
}

fn align_to(buf: &mut Vec<u8>, alignment: usize) {
    while !buf.len().is_multiple_of(alignment) {
        buf.push(0);
    }
}

fn push_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// One pool entry: `api` under `dll`, imported with probability `prob`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiPoolEntry {
    pub dll: String,
    pub api: String,
    pub prob: f64,
}

impl ApiPoolEntry {
    pub fn new(dll: &str, api: &str, prob: f64) -> Self {
        Self {
            dll: dll.to_string(),
            api: api.to_string(),
            prob,
        }
    }
}

/// Per-label generation profile: uniform ranges for header fields and an
/// API pool with inclusion probabilities. Generation is a pure function of
/// `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusProfile {
    pub sample_count: usize,
    pub seed: u64,
    /// Inclusive uniform ranges, keyed by overridable field name.
    #[serde(default)]
    pub header_ranges: BTreeMap<String, (u64, u64)>,
    pub api_pool: Vec<ApiPoolEntry>,
}

impl CorpusProfile {
    fn validate(&self) -> Result<(), SynthError> {
        if self.api_pool.is_empty() {
            return Err(invalid("profile API pool must be non-empty"));
        }
        for entry in &self.api_pool {
            if !(0.0..=1.0).contains(&entry.prob) {
                return Err(invalid(format!(
                    "inclusion probability {} out of [0, 1]",
                    entry.prob
                )));
            }
        }
        for (key, (lo, hi)) in &self.header_ranges {
            if lo > hi {
                return Err(invalid(format!("empty range for {key}: {lo}..={hi}")));
            }
        }
        Ok(())
    }

    /// Draw one file spec. Pure in (`self`, `index`).
    pub fn draw_spec(&self, index: usize) -> Result<PeFileSpec, SynthError> {
        self.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(self.seed, index as u64));

        let mut overrides = BTreeMap::new();
        for (key, (lo, hi)) in &self.header_ranges {
            overrides.insert(key.clone(), rng.gen_range(*lo..=*hi));
        }

        let mut imports: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for entry in &self.api_pool {
            if rng.gen_bool(entry.prob) {
                imports
                    .entry(entry.dll.clone())
                    .or_default()
                    .push(entry.api.clone());
            }
        }

        let text_size = rng.gen_range(512u32..4096);
        let data_size = rng.gen_range(512u32..4096);
        Ok(PeFileSpec {
            overrides,
            sections: vec![
                SectionSpec::new(".text", text_size, align_up(text_size, 512), 0x6000_0020),
                SectionSpec::new(".data", data_size, align_up(data_size, 512), 0xC000_0040),
            ],
            imports,
            import_time_date_stamp: 0,
        })
    }
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the (seed, index) pair
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Write `malicious.sample_count + benign.sample_count` PE files under
/// `out_dir/malicious` and `out_dir/benign`, plus a `manifest.tsv` of
/// `path<TAB>label` lines. Returns the manifest entries in written order.
pub fn gen_corpus(
    malicious: &CorpusProfile,
    benign: &CorpusProfile,
    out_dir: &Path,
) -> Result<Vec<(PathBuf, Label)>, SynthError> {
    malicious.validate()?;
    benign.validate()?;

    let mut manifest = Vec::new();
    for (profile, label, subdir, stem) in [
        (malicious, Label::Malicious, "malicious", "mal"),
        (benign, Label::Benign, "benign", "ben"),
    ] {
        let dir = out_dir.join(subdir);
        fs::create_dir_all(&dir)?;
        for index in 0..profile.sample_count {
            let spec = profile.draw_spec(index)?;
            let bytes = build_pe(&spec)?;
            let path = dir.join(format!("{stem}_{index:04}.exe"));
            fs::write(&path, bytes)?;
            manifest.push((path, label));
        }
    }

    let mut lines = String::new();
    for (path, label) in &manifest {
        let rel = path.strip_prefix(out_dir).unwrap_or(path);
        lines.push_str(&format!("{}\t{}\n", rel.display(), label));
    }
    fs::write(out_dir.join("manifest.tsv"), lines)?;
    Ok(manifest)
}

/// Ready-made profiles for pipeline exercises and tests.
pub mod profiles {
    use super::*;

    fn shared_pool(prob_scale: f64) -> Vec<ApiPoolEntry> {
        let entries = [
            ("kernel32.dll", "LoadLibraryA", 0.95),
            ("kernel32.dll", "GetProcAddress", 0.95),
            ("kernel32.dll", "CreateFileA", 0.7),
            ("kernel32.dll", "ReadFile", 0.7),
            ("kernel32.dll", "WriteFile", 0.6),
            ("kernel32.dll", "CloseHandle", 0.8),
            ("kernel32.dll", "VirtualAlloc", 0.4),
            ("kernel32.dll", "ExitProcess", 0.9),
            ("user32.dll", "MessageBoxA", 0.5),
            ("user32.dll", "GetKeyboardType", 0.3),
            ("user32.dll", "ShowWindow", 0.4),
            ("advapi32.dll", "RegOpenKeyExA", 0.4),
            ("advapi32.dll", "RegQueryValueExA", 0.4),
            ("gdi32.dll", "BitBlt", 0.3),
            ("shell32.dll", "ShellExecuteA", 0.3),
            ("ole32.dll", "CoInitialize", 0.25),
        ];
        entries
            .iter()
            .map(|(dll, api, p)| ApiPoolEntry::new(dll, api, p * prob_scale))
            .collect()
    }

    fn noise_ranges() -> BTreeMap<String, (u64, u64)> {
        let mut ranges = BTreeMap::new();
        ranges.insert("e_cblp".into(), (0, 512));
        ranges.insert("e_cp".into(), (1, 64));
        ranges.insert("TimeDateStamp".into(), (1_000_000_000, 1_700_000_000));
        ranges.insert("SizeOfCode".into(), (512, 65536));
        ranges.insert("CheckSum".into(), (0, u32::MAX as u64));
        ranges
    }

    /// Disjoint API vocabularies and disjoint header ranges per class;
    /// a decision tree should separate the classes perfectly.
    pub fn separable(
        n_malicious: usize,
        n_benign: usize,
        seed: u64,
    ) -> (CorpusProfile, CorpusProfile) {
        let mut mal_pool = shared_pool(1.0);
        for (api, prob) in [
            ("InjectThread", 1.0),
            ("PersistRun", 1.0),
            ("BeaconHome", 1.0),
            ("ExfilData", 0.8),
            ("HookKeyboard", 0.7),
            ("CloakProcess", 0.6),
        ] {
            mal_pool.push(ApiPoolEntry::new("implant32.dll", api, prob));
        }
        for (api, prob) in [("recv", 0.9), ("send", 0.9), ("socket", 0.8)] {
            mal_pool.push(ApiPoolEntry::new("wsock32.dll", api, prob));
        }

        let mut ben_pool = shared_pool(1.0);
        for (api, prob) in [
            ("DrawGlyph", 1.0),
            ("LayoutText", 1.0),
            ("SpoolPage", 1.0),
            ("RenderFrame", 0.8),
            ("LoadTheme", 0.7),
        ] {
            ben_pool.push(ApiPoolEntry::new("officeui.dll", api, prob));
        }

        let mut mal_ranges = noise_ranges();
        mal_ranges.insert("NumberOfSymbols".into(), (40_000, 90_000));
        mal_ranges.insert("SizeOfInitializedData".into(), (8_000_000, 60_000_000));
        let mut ben_ranges = noise_ranges();
        ben_ranges.insert("NumberOfSymbols".into(), (100, 2_000));
        ben_ranges.insert("SizeOfInitializedData".into(), (10_000, 400_000));

        (
            CorpusProfile {
                sample_count: n_malicious,
                seed: mix_seed(seed, 0xA),
                header_ranges: mal_ranges,
                api_pool: mal_pool,
            },
            CorpusProfile {
                sample_count: n_benign,
                seed: mix_seed(seed, 0xB),
                header_ranges: ben_ranges,
                api_pool: ben_pool,
            },
        )
    }

    /// Identical distributions for both labels: no learnable signal.
    pub fn null_signal(
        n_malicious: usize,
        n_benign: usize,
        seed: u64,
    ) -> (CorpusProfile, CorpusProfile) {
        let make = |count, stream| CorpusProfile {
            sample_count: count,
            seed: mix_seed(seed, stream),
            header_ranges: noise_ranges(),
            api_pool: shared_pool(1.0),
        };
        (make(n_malicious, 0xA), make(n_benign, 0xB))
    }

    /// Class signal lives in header fields only; DLL/API pools are shared.
    pub fn header_signal(
        n_malicious: usize,
        n_benign: usize,
        seed: u64,
    ) -> (CorpusProfile, CorpusProfile) {
        let mut mal_ranges = noise_ranges();
        mal_ranges.insert("NumberOfSymbols".into(), (50_000, 120_000));
        mal_ranges.insert("e_minalloc".into(), (900, 1_400));
        mal_ranges.insert("SizeOfInitializedData".into(), (20_000_000, 80_000_000));
        let mut ben_ranges = noise_ranges();
        ben_ranges.insert("NumberOfSymbols".into(), (50, 900));
        ben_ranges.insert("e_minalloc".into(), (0, 12));
        ben_ranges.insert("SizeOfInitializedData".into(), (1_000, 700_000));

        (
            CorpusProfile {
                sample_count: n_malicious,
                seed: mix_seed(seed, 0xA),
                header_ranges: mal_ranges,
                api_pool: shared_pool(1.0),
            },
            CorpusProfile {
                sample_count: n_benign,
                seed: mix_seed(seed, 0xB),
                header_ranges: ben_ranges,
                api_pool: shared_pool(1.0),
            },
        )
    }
}
