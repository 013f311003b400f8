//! Static malware detection for Windows PE files.
//!
//! The crate mines structural features from PE binaries (header scalars,
//! imported DLL names, imported API functions), ranks them by information
//! gain and calling frequency, reduces them with PCA, and classifies with
//! naive Bayes, a C4.5-style decision tree, or a linear SVM. Everything is
//! deterministic given a seed: corpora, trained models, and scan reports
//! reproduce byte-for-byte.

pub mod behavior;
pub mod classify;
pub mod eval;
pub mod features;
pub mod pca;
pub mod pe;
pub mod pipeline;
pub mod report;
pub mod select;
pub mod synth;
