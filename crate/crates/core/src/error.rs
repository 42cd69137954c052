use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("cannot encode an empty token stream")]
    EmptyStream,
    #[error("unknown term {0:?}")]
    UnknownTerm(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed artifact: {0}")]
    Format(String),
    #[error("empty sample")]
    EmptySample,
    #[error("could only seed {found} of {wanted} bugs")]
    NotEnoughMutants { found: usize, wanted: usize },
    #[error(transparent)]
    Parse(#[from] petit::ParseError),
    #[error("unresolved names or types:\n{0}")]
    Check(String),
    #[error("no Petit sources under {0}")]
    NoSources(PathBuf),
    #[error("missing {path}; run `ingrepair {hint}` first")]
    MissingArtifact { path: PathBuf, hint: &'static str },
    #[error("nothing to repair: every test passes")]
    NothingToRepair,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status for this error: 3 when there is nothing to
    /// repair, 2 for every input or artifact problem.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::NothingToRepair => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
