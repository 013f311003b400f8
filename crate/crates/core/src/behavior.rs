//! Seven-category tagging of imported API functions for scan reports:
//! file, process, memory, registry, network, windows_service, other.
//!
//! The mapping ships as an editable text config (one `category = patterns`
//! line per category) so the pattern lists stay auditable; the compiled-in
//! default lives in `assets/behavior_map.txt`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Category names in match order. An API is tested against each category's
/// patterns in this order and the first match wins.
pub const CATEGORY_NAMES: [&str; 7] = [
    "file",
    "process",
    "memory",
    "registry",
    "network",
    "windows_service",
    "other",
];

const DEFAULT_MAP_TEXT: &str = include_str!("../assets/behavior_map.txt");

#[derive(Debug, Error)]
pub enum BehaviorMapError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("behavior map line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("behavior map is missing category {0:?}")]
    MissingCategory(String),
}

/// Ordered category → pattern list. Patterns are matched case-insensitively
/// as substrings of the unqualified API name, and every category holds at
/// least one pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorCategoryMap {
    categories: Vec<(String, Vec<String>)>,
}

impl Default for BehaviorCategoryMap {
    fn default() -> Self {
        Self::parse(DEFAULT_MAP_TEXT).expect("embedded behavior map is valid")
    }
}

impl fmt::Display for BehaviorCategoryMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (category, patterns) in &self.categories {
            writeln!(f, "{category} = {}", patterns.join(", "))?;
        }
        Ok(())
    }
}

impl BehaviorCategoryMap {
    pub fn parse(text: &str) -> Result<Self, BehaviorMapError> {
        let mut found: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((name, patterns)) = line.split_once('=') else {
                return Err(BehaviorMapError::Parse {
                    line: index + 1,
                    message: "expected `category = pattern, ...`".into(),
                });
            };
            let name = name.trim().to_string();
            if !CATEGORY_NAMES.contains(&name.as_str()) {
                return Err(BehaviorMapError::Parse {
                    line: index + 1,
                    message: format!("unknown category {name:?}"),
                });
            }
            if found.contains_key(&name) {
                return Err(BehaviorMapError::Parse {
                    line: index + 1,
                    message: format!("category {name:?} declared twice"),
                });
            }
            let patterns: Vec<String> = patterns
                .split(',')
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty())
                .collect();
            if patterns.is_empty() {
                return Err(BehaviorMapError::Parse {
                    line: index + 1,
                    message: format!("category {name:?} has no patterns"),
                });
            }
            found.insert(name, patterns);
        }
        let mut categories = Vec::with_capacity(CATEGORY_NAMES.len());
        for name in CATEGORY_NAMES {
            let Some(patterns) = found.remove(name) else {
                return Err(BehaviorMapError::MissingCategory(name.to_string()));
            };
            categories.push((name.to_string(), patterns));
        }
        Ok(Self { categories })
    }

    pub fn load(path: &Path) -> Result<Self, BehaviorMapError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Category of one qualified (`dll!Api`) or bare API name.
    pub fn categorize(&self, api_name: &str) -> &str {
        let bare = api_name.rsplit('!').next().unwrap_or(api_name);
        let lower = bare.to_ascii_lowercase();
        for (category, patterns) in &self.categories {
            if patterns
                .iter()
                .any(|p| lower.contains(&p.to_ascii_lowercase()))
            {
                return category;
            }
        }
        "other"
    }
}

/// Count matches per category over a set of qualified API names. Every
/// category appears in the result, zero when unmatched.
pub fn categorize_behaviors(
    api_names: &BTreeSet<String>,
    map: &BehaviorCategoryMap,
) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> =
        CATEGORY_NAMES.iter().map(|&c| (c.to_string(), 0)).collect();
    for api in api_names {
        *counts.get_mut(map.categorize(api)).expect("known category") += 1;
    }
    counts
}
