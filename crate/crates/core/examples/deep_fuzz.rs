//! Extended fuzz pass (not part of the test suite): 2M structured and
//! unstructured inputs through the parser, plus hostile shapes the
//! acceptance fuzz keeps small: huge section counts, deep e_lfanew,
//! self-referential import tables.

use pescan_core::pe::{is_pe, parse_pe, PeError};
use pescan_core::synth::{build_pe, PeFileSpec, SectionSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xDEEF);
    let mut spec = PeFileSpec {
        sections: vec![SectionSpec::new(".text", 8192, 4096, 0x6000_0020)],
        ..Default::default()
    };
    let mut imports = BTreeMap::new();
    imports.insert(
        "kernel32.dll".to_string(),
        vec![
            "LoadLibraryA".to_string(),
            "GetProcAddress".to_string(),
            "ord5".to_string(),
        ],
    );
    spec.imports = imports;
    let base = build_pe(&spec).unwrap();

    let start = std::time::Instant::now();
    let mut outcomes = [0usize; 4];
    for case in 0..2_000_000usize {
        let input: Vec<u8> = match case % 5 {
            0 => {
                let len = rng.gen_range(0..2048);
                (0..len).map(|_| rng.gen()).collect()
            }
            1 => {
                let mut v = base.clone();
                for _ in 0..rng.gen_range(1..=32) {
                    let at = rng.gen_range(0..v.len());
                    v[at] = rng.gen();
                }
                v
            }
            2 => {
                // Hostile structural fields: giant section count, wild
                // optional-header size, e_lfanew pointing everywhere.
                let mut v = base.clone();
                let lfanew: u32 = rng.gen_range(0..v.len() as u32 + 64);
                v[0x3C..0x40].copy_from_slice(&lfanew.to_le_bytes());
                let nsec: u16 = rng.gen();
                if v.len() > 0x48 {
                    v[0x46..0x48].copy_from_slice(&nsec.to_le_bytes());
                }
                let optsz: u16 = rng.gen();
                if v.len() > 0x56 {
                    v[0x54..0x56].copy_from_slice(&optsz.to_le_bytes());
                }
                v
            }
            3 => {
                // Import directory pointed at random RVAs, thunks cycled.
                let mut v = base.clone();
                let dirs = 0x58 + 96;
                let va: u32 = rng.gen_range(0..0x20000);
                v[dirs + 8..dirs + 12].copy_from_slice(&va.to_le_bytes());
                v[dirs + 12..dirs + 16].copy_from_slice(&40u32.to_le_bytes());
                v
            }
            _ => {
                let mut v = base.clone();
                v.truncate(rng.gen_range(0..=v.len()));
                v
            }
        };
        let _ = is_pe(&input);
        match parse_pe(&input) {
            Ok(_) => outcomes[0] += 1,
            Err(PeError::NotPeFile(_)) => outcomes[1] += 1,
            Err(PeError::Malformed(_)) => outcomes[2] += 1,
            Err(PeError::Unsupported(_)) => outcomes[3] += 1,
        }
    }
    println!(
        "2M inputs in {:.1}s: ok {} / not-pe {} / malformed {} / unsupported {}",
        start.elapsed().as_secs_f64(),
        outcomes[0],
        outcomes[1],
        outcomes[2],
        outcomes[3]
    );
}
