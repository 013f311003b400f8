//! Hardened parser for the Windows Portable Executable format.
//!
//! Parses the DOS, COFF and optional headers, the 16 data directories, the
//! section table, and walks the import table (including ordinal imports).
//! The export, resource, debug, delay-import and TLS tables are reduced to
//! their directory scalars; a table whose data-directory entry is zero (or
//! whose RVA cannot be resolved) comes back zero-filled so downstream
//! feature vectors keep a fixed arity.
//!
//! Every count and offset read from the file is validated against the input
//! length before use. Inputs are hostile by default: `parse_pe` never
//! panics, never reads out of bounds, and never allocates proportionally to
//! unvalidated length fields.

use thiserror::Error;

/// DOS magic "MZ".
pub const DOS_MAGIC: u16 = 0x5A4D;
/// Optional header magic for PE32.
pub const PE32_MAGIC: u16 = 0x010B;
/// Optional header magic for PE32+.
pub const PE32PLUS_MAGIC: u16 = 0x020B;

/// Walk caps for hostile inputs. Exceeding either is `Malformed`.
pub const MAX_IMPORT_DESCRIPTORS: usize = 4096;
pub const MAX_APIS_PER_DLL: usize = 65535;
const MAX_NAME_LEN: usize = 4096;

const SECTION_HEADER_LEN: usize = 40;
const IMPORT_DESCRIPTOR_LEN: usize = 20;

/// Section characteristic bits used by the packer heuristic.
pub const SCN_MEM_EXECUTE: u32 = 0x2000_0000;
pub const SCN_MEM_WRITE: u32 = 0x8000_0000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PeError {
    /// Not a PE at all: missing MZ magic, unreadable `e_lfanew`, or a
    /// readable 4-byte signature that is not "PE\0\0". Directory scans
    /// skip these files silently.
    #[error("not a PE file: {0}")]
    NotPeFile(String),
    /// Structurally a PE but truncated or internally inconsistent.
    #[error("malformed PE file: {0}")]
    Malformed(String),
    /// Optional-header magic is neither PE32 nor PE32+.
    #[error("unsupported PE variant: optional header magic {0:#06x}")]
    Unsupported(u16),
}

/// All 31 DOS-header fields.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DosHeader {
    pub e_magic: u16,
    pub e_cblp: u16,
    pub e_cp: u16,
    pub e_crlc: u16,
    pub e_cparhdr: u16,
    pub e_minalloc: u16,
    pub e_maxalloc: u16,
    pub e_ss: u16,
    pub e_sp: u16,
    pub e_csum: u16,
    pub e_ip: u16,
    pub e_cs: u16,
    pub e_lfarlc: u16,
    pub e_ovno: u16,
    pub e_res: [u16; 4],
    pub e_oemid: u16,
    pub e_oeminfo: u16,
    pub e_res2: [u16; 10],
    pub e_lfanew: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoffHeader {
    pub machine: u16,
    pub number_of_sections: u16,
    pub time_date_stamp: u32,
    pub pointer_to_symbol_table: u32,
    pub number_of_symbols: u32,
    pub size_of_optional_header: u16,
    pub characteristics: u16,
}

/// The 30 optional-header scalars, shared between PE32 and PE32+.
/// `base_of_data` is 0 for PE32+ (the field does not exist there).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OptionalHeader {
    pub magic: u16,
    pub major_linker_version: u8,
    pub minor_linker_version: u8,
    pub size_of_code: u32,
    pub size_of_initialized_data: u32,
    pub size_of_uninitialized_data: u32,
    pub address_of_entry_point: u32,
    pub base_of_code: u32,
    pub base_of_data: u32,
    pub image_base: u64,
    pub section_alignment: u32,
    pub file_alignment: u32,
    pub major_operating_system_version: u16,
    pub minor_operating_system_version: u16,
    pub major_image_version: u16,
    pub minor_image_version: u16,
    pub major_subsystem_version: u16,
    pub minor_subsystem_version: u16,
    pub win32_version_value: u32,
    pub size_of_image: u32,
    pub size_of_headers: u32,
    pub checksum: u32,
    pub subsystem: u16,
    pub dll_characteristics: u16,
    pub size_of_stack_reserve: u64,
    pub size_of_stack_commit: u64,
    pub size_of_heap_reserve: u64,
    pub size_of_heap_commit: u64,
    pub loader_flags: u32,
    pub number_of_rva_and_sizes: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DataDirectory {
    pub virtual_address: u32,
    pub size: u32,
}

/// Data-directory indices (subset the crate reads).
pub mod directory_index {
    pub const EXPORT: usize = 0;
    pub const IMPORT: usize = 1;
    pub const RESOURCE: usize = 2;
    pub const TLS: usize = 9;
    pub const DELAY_IMPORT: usize = 13;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectionHeader {
    /// Raw 8-byte name with trailing NULs stripped.
    pub name: String,
    pub virtual_size: u32,
    pub virtual_address: u32,
    pub size_of_raw_data: u32,
    pub pointer_to_raw_data: u32,
    pub pointer_to_relocations: u32,
    pub pointer_to_line_numbers: u32,
    pub number_of_relocations: u16,
    pub number_of_line_numbers: u16,
    pub characteristics: u32,
}

impl SectionHeader {
    pub fn is_executable(&self) -> bool {
        self.characteristics & SCN_MEM_EXECUTE != 0
    }

    pub fn is_writable(&self) -> bool {
        self.characteristics & SCN_MEM_WRITE != 0
    }
}

/// Scalar fields of one IMAGE_IMPORT_DESCRIPTOR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImportDescriptor {
    pub original_first_thunk: u32,
    pub time_date_stamp: u32,
    pub forwarder_chain: u32,
    pub name_rva: u32,
    pub first_thunk: u32,
}

/// One imported DLL with its resolved API names, in descriptor order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportedDll {
    /// Lowercased DLL name, always non-empty.
    pub dll_name: String,
    /// API names as written in the file (case preserved); ordinal imports
    /// are rendered `ord<decimal>`. Never contains empty strings.
    pub api_names: Vec<String>,
    pub descriptor: ImportDescriptor,
}

/// The 11 export-directory scalars, zero-filled when absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportDirectory {
    pub characteristics: u32,
    pub time_date_stamp: u32,
    pub major_version: u16,
    pub minor_version: u16,
    pub name_rva: u32,
    pub ordinal_base: u32,
    pub number_of_functions: u32,
    pub number_of_names: u32,
    pub address_of_functions: u32,
    pub address_of_names: u32,
    pub address_of_name_ordinals: u32,
}

/// The 6 resource-directory header scalars, zero-filled when absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResourceSummary {
    pub characteristics: u32,
    pub time_date_stamp: u32,
    pub major_version: u16,
    pub minor_version: u16,
    pub number_of_named_entries: u16,
    pub number_of_id_entries: u16,
}

/// The 8 scalars of the first debug-directory entry, zero-filled when absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DebugInfo {
    pub characteristics: u32,
    pub time_date_stamp: u32,
    pub major_version: u16,
    pub minor_version: u16,
    pub debug_type: u32,
    pub size_of_data: u32,
    pub address_of_raw_data: u32,
    pub pointer_to_raw_data: u32,
}

/// The 8 scalars of the first delay-import descriptor, zero-filled when absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DelayImportDescriptor {
    pub attributes: u32,
    pub dll_name_rva: u32,
    pub module_handle_rva: u32,
    pub import_address_table_rva: u32,
    pub import_name_table_rva: u32,
    pub bound_import_address_table_rva: u32,
    pub unload_information_table_rva: u32,
    pub time_date_stamp: u32,
}

/// The 6 TLS-directory scalars, zero-filled when absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TlsTable {
    pub start_address_of_raw_data: u64,
    pub end_address_of_raw_data: u64,
    pub address_of_index: u64,
    pub address_of_callbacks: u64,
    pub size_of_zero_fill: u32,
    pub characteristics: u32,
}

/// Fully parsed PE structure. Immutable after construction and safe to
/// share between threads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PeFile {
    pub dos_header: DosHeader,
    pub coff_header: CoffHeader,
    pub optional_header: OptionalHeader,
    /// Always exactly 16 entries; absent trailing directories zero-filled.
    pub data_directories: Vec<DataDirectory>,
    pub sections: Vec<SectionHeader>,
    pub imports: Vec<ImportedDll>,
    pub exports: ExportDirectory,
    pub resource_summary: ResourceSummary,
    pub debug_info: DebugInfo,
    pub delay_imports: DelayImportDescriptor,
    pub tls_table: TlsTable,
}

/// Result of the packed-file heuristic that stands in for unpacking:
/// likely packed files are reported (and by default skipped) instead of
/// being decompressed with external tools.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackerHint {
    pub likely_packed: bool,
    /// Matched section names / anomaly descriptions; non-empty iff
    /// `likely_packed`.
    pub evidence: Vec<String>,
}

/// Section names planted by common packers.
pub const PACKER_SECTION_NAMES: &[&str] = &[
    "UPX0", "UPX1", "UPX2", ".aspack", ".adata", "pec1", "PEC2", ".packed", ".petite", "MEW",
    ".MPRESS1", ".MPRESS2", ".themida", ".vmp0", ".vmp1",
];

// Bounds-checked little-endian reads over the raw input.
struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data }
    }

    fn len(&self) -> usize {
        self.data.len()
    }

    fn u16(&self, off: usize) -> Option<u16> {
        let b = self.data.get(off..off.checked_add(2)?)?;
        Some(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&self, off: usize) -> Option<u32> {
        let b = self.data.get(off..off.checked_add(4)?)?;
        Some(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&self, off: usize) -> Option<u64> {
        let b = self.data.get(off..off.checked_add(8)?)?;
        let mut raw = [0u8; 8];
        raw.copy_from_slice(b);
        Some(u64::from_le_bytes(raw))
    }

    fn u8(&self, off: usize) -> Option<u8> {
        self.data.get(off).copied()
    }

    /// NUL-terminated string starting at `off`, capped at `MAX_NAME_LEN`.
    /// Returns None when the terminator is missing before EOF or cap.
    fn cstr(&self, off: usize) -> Option<String> {
        let tail = self.data.get(off..)?;
        let limit = tail.len().min(MAX_NAME_LEN + 1);
        let nul = tail[..limit].iter().position(|&b| b == 0)?;
        Some(String::from_utf8_lossy(&tail[..nul]).into_owned())
    }
}

fn malformed(msg: &str) -> PeError {
    PeError::Malformed(msg.to_string())
}

/// Cheap format gate: true iff `parse_pe` would not return `NotPeFile`.
/// A file with MZ magic whose signature lies beyond EOF is treated as a
/// truncated PE (hence `true` here; `parse_pe` reports `Malformed`).
pub fn is_pe(bytes: &[u8]) -> bool {
    let r = Reader::new(bytes);
    let Some(magic) = r.u16(0) else { return false };
    if magic != DOS_MAGIC {
        return false;
    }
    let Some(e_lfanew) = r.u32(0x3C) else {
        return false;
    };
    match r.u32(e_lfanew as usize) {
        // Signature readable: must match exactly.
        Some(sig) => sig == 0x0000_4550,
        // Signature past EOF: structurally truncated, not "not a PE".
        None => true,
    }
}

/// Parse `bytes` into a [`PeFile`]. Pure and deterministic: identical bytes
/// produce structurally identical results, with import order preserved as
/// encountered in the descriptor table.
pub fn parse_pe(bytes: &[u8]) -> Result<PeFile, PeError> {
    let r = Reader::new(bytes);

    let dos_header = parse_dos_header(&r)?;
    let pe_off = dos_header.e_lfanew as usize;
    match r.u32(pe_off) {
        Some(0x0000_4550) => {}
        Some(sig) => {
            return Err(PeError::NotPeFile(format!(
                "signature {sig:#010x} at e_lfanew is not PE\\0\\0"
            )))
        }
        None => return Err(malformed("PE signature extends past end of file")),
    }

    let coff_off = pe_off + 4;
    let coff_header = parse_coff_header(&r, coff_off)?;

    let opt_off = coff_off + 20;
    let magic = r
        .u16(opt_off)
        .ok_or_else(|| malformed("optional header extends past end of file"))?;
    let plus = match magic {
        PE32_MAGIC => false,
        PE32PLUS_MAGIC => true,
        other => return Err(PeError::Unsupported(other)),
    };
    let (optional_header, dirs_off) = parse_optional_header(&r, opt_off, plus)?;
    let data_directories = parse_data_directories(&r, dirs_off, &optional_header);

    let section_table_off = opt_off
        .checked_add(coff_header.size_of_optional_header as usize)
        .ok_or_else(|| malformed("section table offset overflows"))?;
    let sections = parse_sections(&r, section_table_off, coff_header.number_of_sections)?;

    let imports = parse_imports(
        &r,
        &sections,
        &data_directories[directory_index::IMPORT],
        plus,
    )?;

    let exports = parse_exports(&r, &sections, &data_directories[directory_index::EXPORT]);
    let resource_summary =
        parse_resource_summary(&r, &sections, &data_directories[directory_index::RESOURCE]);
    let debug_info = parse_debug_info(&r, &sections, &data_directories[6]);
    let delay_imports = parse_delay_imports(
        &r,
        &sections,
        &data_directories[directory_index::DELAY_IMPORT],
    );
    let tls_table = parse_tls(&r, &sections, &data_directories[directory_index::TLS], plus);

    Ok(PeFile {
        dos_header,
        coff_header,
        optional_header,
        data_directories,
        sections,
        imports,
        exports,
        resource_summary,
        debug_info,
        delay_imports,
        tls_table,
    })
}

/// Flag likely-packed files from section names and section-size anomalies.
pub fn detect_packer(pe: &PeFile) -> PackerHint {
    let mut evidence = Vec::new();
    for section in &pe.sections {
        if PACKER_SECTION_NAMES.contains(&section.name.as_str()) {
            evidence.push(format!("packer section name {:?}", section.name));
        }
        if section.size_of_raw_data == 0 && section.virtual_size > 0 && section.is_executable() {
            evidence.push(format!(
                "executable section {:?} has virtual size {} but no raw data",
                section.name, section.virtual_size
            ));
        }
    }
    PackerHint {
        likely_packed: !evidence.is_empty(),
        evidence,
    }
}

fn parse_dos_header(r: &Reader) -> Result<DosHeader, PeError> {
    let magic = r
        .u16(0)
        .ok_or_else(|| PeError::NotPeFile("shorter than the MZ magic".into()))?;
    if magic != DOS_MAGIC {
        return Err(PeError::NotPeFile(format!(
            "DOS magic {magic:#06x} is not MZ"
        )));
    }
    if r.len() < 0x40 {
        return Err(PeError::NotPeFile(
            "DOS header truncated before e_lfanew".into(),
        ));
    }
    let word = |i: usize| r.u16(i * 2).unwrap_or(0);
    let mut e_res = [0u16; 4];
    for (i, slot) in e_res.iter_mut().enumerate() {
        *slot = word(14 + i);
    }
    let mut e_res2 = [0u16; 10];
    for (i, slot) in e_res2.iter_mut().enumerate() {
        *slot = word(20 + i);
    }
    Ok(DosHeader {
        e_magic: magic,
        e_cblp: word(1),
        e_cp: word(2),
        e_crlc: word(3),
        e_cparhdr: word(4),
        e_minalloc: word(5),
        e_maxalloc: word(6),
        e_ss: word(7),
        e_sp: word(8),
        e_csum: word(9),
        e_ip: word(10),
        e_cs: word(11),
        e_lfarlc: word(12),
        e_ovno: word(13),
        e_res,
        e_oemid: word(18),
        e_oeminfo: word(19),
        e_res2,
        e_lfanew: r.u32(0x3C).unwrap_or(0),
    })
}

fn parse_coff_header(r: &Reader, off: usize) -> Result<CoffHeader, PeError> {
    if off.checked_add(20).is_none_or(|end| end > r.len()) {
        return Err(malformed("COFF header extends past end of file"));
    }
    Ok(CoffHeader {
        machine: r.u16(off).unwrap_or(0),
        number_of_sections: r.u16(off + 2).unwrap_or(0),
        time_date_stamp: r.u32(off + 4).unwrap_or(0),
        pointer_to_symbol_table: r.u32(off + 8).unwrap_or(0),
        number_of_symbols: r.u32(off + 12).unwrap_or(0),
        size_of_optional_header: r.u16(off + 16).unwrap_or(0),
        characteristics: r.u16(off + 18).unwrap_or(0),
    })
}

fn parse_optional_header(
    r: &Reader,
    off: usize,
    plus: bool,
) -> Result<(OptionalHeader, usize), PeError> {
    let fixed_len = if plus { 112 } else { 96 };
    if off.checked_add(fixed_len).is_none_or(|end| end > r.len()) {
        return Err(malformed("optional header extends past end of file"));
    }
    let u16f = |o: usize| r.u16(off + o).unwrap_or(0);
    let u32f = |o: usize| r.u32(off + o).unwrap_or(0);
    let u64f = |o: usize| r.u64(off + o).unwrap_or(0);

    let header = OptionalHeader {
        magic: u16f(0),
        major_linker_version: r.u8(off + 2).unwrap_or(0),
        minor_linker_version: r.u8(off + 3).unwrap_or(0),
        size_of_code: u32f(4),
        size_of_initialized_data: u32f(8),
        size_of_uninitialized_data: u32f(12),
        address_of_entry_point: u32f(16),
        base_of_code: u32f(20),
        base_of_data: if plus { 0 } else { u32f(24) },
        image_base: if plus { u64f(24) } else { u32f(28) as u64 },
        section_alignment: u32f(32),
        file_alignment: u32f(36),
        major_operating_system_version: u16f(40),
        minor_operating_system_version: u16f(42),
        major_image_version: u16f(44),
        minor_image_version: u16f(46),
        major_subsystem_version: u16f(48),
        minor_subsystem_version: u16f(50),
        win32_version_value: u32f(52),
        size_of_image: u32f(56),
        size_of_headers: u32f(60),
        checksum: u32f(64),
        subsystem: u16f(68),
        dll_characteristics: u16f(70),
        size_of_stack_reserve: if plus { u64f(72) } else { u32f(72) as u64 },
        size_of_stack_commit: if plus { u64f(80) } else { u32f(76) as u64 },
        size_of_heap_reserve: if plus { u64f(88) } else { u32f(80) as u64 },
        size_of_heap_commit: if plus { u64f(96) } else { u32f(84) as u64 },
        loader_flags: if plus { u32f(104) } else { u32f(88) },
        number_of_rva_and_sizes: if plus { u32f(108) } else { u32f(92) },
    };
    Ok((header, off + fixed_len))
}

fn parse_data_directories(r: &Reader, off: usize, header: &OptionalHeader) -> Vec<DataDirectory> {
    let mut dirs = vec![DataDirectory::default(); 16];
    // Counts above 16 are clamped; entries past EOF stay zero.
    let count = (header.number_of_rva_and_sizes as usize).min(16);
    for (i, dir) in dirs.iter_mut().enumerate().take(count) {
        let Some(entry_off) = off.checked_add(i * 8) else {
            break;
        };
        if let (Some(va), Some(size)) = (r.u32(entry_off), r.u32(entry_off + 4)) {
            *dir = DataDirectory {
                virtual_address: va,
                size,
            };
        }
    }
    dirs
}

fn parse_sections(r: &Reader, off: usize, count: u16) -> Result<Vec<SectionHeader>, PeError> {
    let table_len = count as usize * SECTION_HEADER_LEN;
    if off.checked_add(table_len).is_none_or(|end| end > r.len()) {
        return Err(malformed("section table extends past end of file"));
    }
    let mut sections = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let s = off + i * SECTION_HEADER_LEN;
        let raw_name = &r.data[s..s + 8];
        let end = raw_name.iter().position(|&b| b == 0).unwrap_or(8);
        sections.push(SectionHeader {
            name: String::from_utf8_lossy(&raw_name[..end]).into_owned(),
            virtual_size: r.u32(s + 8).unwrap_or(0),
            virtual_address: r.u32(s + 12).unwrap_or(0),
            size_of_raw_data: r.u32(s + 16).unwrap_or(0),
            pointer_to_raw_data: r.u32(s + 20).unwrap_or(0),
            pointer_to_relocations: r.u32(s + 24).unwrap_or(0),
            pointer_to_line_numbers: r.u32(s + 28).unwrap_or(0),
            number_of_relocations: r.u16(s + 32).unwrap_or(0),
            number_of_line_numbers: r.u16(s + 34).unwrap_or(0),
            characteristics: r.u32(s + 36).unwrap_or(0),
        });
    }
    Ok(sections)
}

/// Map an RVA to a file offset through the section that contains it.
/// RVAs below the first section (header region) map identically.
pub fn rva_to_offset(sections: &[SectionHeader], rva: u32, file_len: usize) -> Option<usize> {
    for s in sections {
        let span = if s.virtual_size != 0 {
            s.virtual_size
        } else {
            s.size_of_raw_data
        };
        if rva >= s.virtual_address && (rva - s.virtual_address) < span {
            let delta = rva - s.virtual_address;
            if delta >= s.size_of_raw_data {
                return None; // virtual-only tail of the section
            }
            let off = s.pointer_to_raw_data as u64 + delta as u64;
            return (off < file_len as u64).then_some(off as usize);
        }
    }
    let first_va = sections.iter().map(|s| s.virtual_address).min();
    match first_va {
        Some(min_va) if rva >= min_va => None,
        _ => ((rva as usize) < file_len).then_some(rva as usize),
    }
}

fn parse_imports(
    r: &Reader,
    sections: &[SectionHeader],
    dir: &DataDirectory,
    plus: bool,
) -> Result<Vec<ImportedDll>, PeError> {
    if dir.virtual_address == 0 || dir.size == 0 {
        return Ok(Vec::new());
    }
    let base = rva_to_offset(sections, dir.virtual_address, r.len())
        .ok_or_else(|| malformed("import directory RVA resolves outside file"))?;

    let mut imports = Vec::new();
    for index in 0.. {
        if index > MAX_IMPORT_DESCRIPTORS {
            return Err(malformed("import descriptor walk exceeded cap"));
        }
        let d = base
            .checked_add(index * IMPORT_DESCRIPTOR_LEN)
            .ok_or_else(|| malformed("import descriptor offset overflows"))?;
        let descriptor = ImportDescriptor {
            original_first_thunk: r
                .u32(d)
                .ok_or_else(|| malformed("import descriptor extends past end of file"))?,
            time_date_stamp: r.u32(d + 4).unwrap_or(0),
            forwarder_chain: r.u32(d + 8).unwrap_or(0),
            name_rva: r
                .u32(d + 12)
                .ok_or_else(|| malformed("import descriptor extends past end of file"))?,
            first_thunk: r
                .u32(d + 16)
                .ok_or_else(|| malformed("import descriptor extends past end of file"))?,
        };
        let all_zero = descriptor.original_first_thunk == 0
            && descriptor.time_date_stamp == 0
            && descriptor.forwarder_chain == 0
            && descriptor.name_rva == 0
            && descriptor.first_thunk == 0;
        if all_zero {
            break;
        }

        let name_off = rva_to_offset(sections, descriptor.name_rva, r.len())
            .ok_or_else(|| malformed("import DLL name RVA resolves outside file"))?;
        let raw_name = r
            .cstr(name_off)
            .ok_or_else(|| malformed("import DLL name is unterminated"))?;
        if raw_name.is_empty() {
            return Err(malformed("import DLL name is empty"));
        }

        let thunk_rva = if descriptor.original_first_thunk != 0 {
            descriptor.original_first_thunk
        } else {
            descriptor.first_thunk
        };
        let api_names = if thunk_rva == 0 {
            Vec::new()
        } else {
            parse_thunks(r, sections, thunk_rva, plus)?
        };

        imports.push(ImportedDll {
            dll_name: raw_name.to_ascii_lowercase(),
            api_names,
            descriptor,
        });
    }
    Ok(imports)
}

fn parse_thunks(
    r: &Reader,
    sections: &[SectionHeader],
    thunk_rva: u32,
    plus: bool,
) -> Result<Vec<String>, PeError> {
    let base = rva_to_offset(sections, thunk_rva, r.len())
        .ok_or_else(|| malformed("import thunk RVA resolves outside file"))?;
    let entry_len = if plus { 8 } else { 4 };
    let mut names = Vec::new();
    for index in 0.. {
        if index > MAX_APIS_PER_DLL {
            return Err(malformed("import thunk walk exceeded cap"));
        }
        let off = base
            .checked_add(index * entry_len)
            .ok_or_else(|| malformed("import thunk offset overflows"))?;
        let (value, ordinal_bit) = if plus {
            let v = r
                .u64(off)
                .ok_or_else(|| malformed("import thunk extends past end of file"))?;
            (v, v & (1 << 63) != 0)
        } else {
            let v = r
                .u32(off)
                .ok_or_else(|| malformed("import thunk extends past end of file"))?;
            (v as u64, v & (1 << 31) != 0)
        };
        if value == 0 {
            break;
        }
        if ordinal_bit {
            names.push(format!("ord{}", value & 0xFFFF));
        } else {
            // Hint/name entry: u16 hint then the NUL-terminated name.
            let hint_rva = (value & 0x7FFF_FFFF) as u32;
            let name_off = rva_to_offset(sections, hint_rva, r.len())
                .ok_or_else(|| malformed("import hint/name RVA resolves outside file"))?;
            let name = r
                .cstr(name_off + 2)
                .ok_or_else(|| malformed("import API name is unterminated"))?;
            if name.is_empty() {
                return Err(malformed("import API name is empty"));
            }
            names.push(name);
        }
    }
    Ok(names)
}

// Optional tables below are forgiving: a zero directory entry or an
// unresolvable RVA yields zero-filled scalars, keeping feature arity fixed.

fn table_offset(
    r: &Reader,
    sections: &[SectionHeader],
    dir: &DataDirectory,
    min_len: usize,
) -> Option<usize> {
    if dir.virtual_address == 0 {
        return None;
    }
    let off = rva_to_offset(sections, dir.virtual_address, r.len())?;
    (off.checked_add(min_len)? <= r.len()).then_some(off)
}

fn parse_exports(r: &Reader, sections: &[SectionHeader], dir: &DataDirectory) -> ExportDirectory {
    let Some(off) = table_offset(r, sections, dir, 40) else {
        return ExportDirectory::default();
    };
    ExportDirectory {
        characteristics: r.u32(off).unwrap_or(0),
        time_date_stamp: r.u32(off + 4).unwrap_or(0),
        major_version: r.u16(off + 8).unwrap_or(0),
        minor_version: r.u16(off + 10).unwrap_or(0),
        name_rva: r.u32(off + 12).unwrap_or(0),
        ordinal_base: r.u32(off + 16).unwrap_or(0),
        number_of_functions: r.u32(off + 20).unwrap_or(0),
        number_of_names: r.u32(off + 24).unwrap_or(0),
        address_of_functions: r.u32(off + 28).unwrap_or(0),
        address_of_names: r.u32(off + 32).unwrap_or(0),
        address_of_name_ordinals: r.u32(off + 36).unwrap_or(0),
    }
}

fn parse_resource_summary(
    r: &Reader,
    sections: &[SectionHeader],
    dir: &DataDirectory,
) -> ResourceSummary {
    let Some(off) = table_offset(r, sections, dir, 16) else {
        return ResourceSummary::default();
    };
    ResourceSummary {
        characteristics: r.u32(off).unwrap_or(0),
        time_date_stamp: r.u32(off + 4).unwrap_or(0),
        major_version: r.u16(off + 8).unwrap_or(0),
        minor_version: r.u16(off + 10).unwrap_or(0),
        number_of_named_entries: r.u16(off + 12).unwrap_or(0),
        number_of_id_entries: r.u16(off + 14).unwrap_or(0),
    }
}

fn parse_debug_info(r: &Reader, sections: &[SectionHeader], dir: &DataDirectory) -> DebugInfo {
    let Some(off) = table_offset(r, sections, dir, 28) else {
        return DebugInfo::default();
    };
    DebugInfo {
        characteristics: r.u32(off).unwrap_or(0),
        time_date_stamp: r.u32(off + 4).unwrap_or(0),
        major_version: r.u16(off + 8).unwrap_or(0),
        minor_version: r.u16(off + 10).unwrap_or(0),
        debug_type: r.u32(off + 12).unwrap_or(0),
        size_of_data: r.u32(off + 16).unwrap_or(0),
        address_of_raw_data: r.u32(off + 20).unwrap_or(0),
        pointer_to_raw_data: r.u32(off + 24).unwrap_or(0),
    }
}

fn parse_delay_imports(
    r: &Reader,
    sections: &[SectionHeader],
    dir: &DataDirectory,
) -> DelayImportDescriptor {
    let Some(off) = table_offset(r, sections, dir, 32) else {
        return DelayImportDescriptor::default();
    };
    DelayImportDescriptor {
        attributes: r.u32(off).unwrap_or(0),
        dll_name_rva: r.u32(off + 4).unwrap_or(0),
        module_handle_rva: r.u32(off + 8).unwrap_or(0),
        import_address_table_rva: r.u32(off + 12).unwrap_or(0),
        import_name_table_rva: r.u32(off + 16).unwrap_or(0),
        bound_import_address_table_rva: r.u32(off + 20).unwrap_or(0),
        unload_information_table_rva: r.u32(off + 24).unwrap_or(0),
        time_date_stamp: r.u32(off + 28).unwrap_or(0),
    }
}

fn parse_tls(r: &Reader, sections: &[SectionHeader], dir: &DataDirectory, plus: bool) -> TlsTable {
    let min_len = if plus { 40 } else { 24 };
    let Some(off) = table_offset(r, sections, dir, min_len) else {
        return TlsTable::default();
    };
    if plus {
        TlsTable {
            start_address_of_raw_data: r.u64(off).unwrap_or(0),
            end_address_of_raw_data: r.u64(off + 8).unwrap_or(0),
            address_of_index: r.u64(off + 16).unwrap_or(0),
            address_of_callbacks: r.u64(off + 24).unwrap_or(0),
            size_of_zero_fill: r.u32(off + 32).unwrap_or(0),
            characteristics: r.u32(off + 36).unwrap_or(0),
        }
    } else {
        TlsTable {
            start_address_of_raw_data: r.u32(off).unwrap_or(0) as u64,
            end_address_of_raw_data: r.u32(off + 4).unwrap_or(0) as u64,
            address_of_index: r.u32(off + 8).unwrap_or(0) as u64,
            address_of_callbacks: r.u32(off + 12).unwrap_or(0) as u64,
            size_of_zero_fill: r.u32(off + 16).unwrap_or(0),
            characteristics: r.u32(off + 20).unwrap_or(0),
        }
    }
}
