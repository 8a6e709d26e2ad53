//! Soundness auditing for Android data-leak detectors.
//!
//! The pipeline seeds uniquely tagged source→sink leaks into a Java/Android
//! source corpus, keeps the ones a runtime trace shows were executed, and
//! groups the ones a detector misses into flaw-class hypotheses:
//!
//! 1. [`model`] parses the corpus into classes, methods, callbacks and
//!    registration edges.
//! 2. [`operators`] instantiates leak (or SSL-misuse) templates with ids.
//! 3. [`schemes`] enumerates injection points per mutation scheme.
//! 4. [`mutator`] writes one mutated tree plus a ledger of every mutant.
//! 5. [`exec_filter`] partitions mutants by observed `leak-<id>` log tags.
//! 6. [`analyzer`] is a reference detector with switchable blind spots.
//! 7. [`evaluator`] computes survivors, survival rates, flaw classes and
//!    minimal reproducing examples.

use std::path::{Path, PathBuf};

pub mod analyzer;
pub mod evaluator;
pub mod exec_filter;
pub mod ledger;
pub mod model;
pub mod mutator;
pub mod operators;
pub mod schemes;

pub use model::unit::Diagnostic;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Parse(Diagnostic),
    #[error("duplicate mutant id {0}")]
    DuplicateId(u32),
    #[error("injection point {point}: {message}")]
    Injection { point: String, message: String },
    #[error("cannot synthesize {plan}: {message}")]
    Synthesis { plan: String, message: String },
    #[error("ledger: {0}")]
    Ledger(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
