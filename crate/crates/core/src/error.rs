use std::io;

use thiserror::Error;

/// Errors produced by the metadata cache and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid name: {0}")]
    InvalidName(String),

    #[error("invalid parent path: {0}")]
    InvalidParent(String),

    #[error("corrupt value encoding: {0}")]
    CorruptValue(&'static str),

    #[error("invalid inode record: {0}")]
    InvalidRecord(&'static str),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("WAL sequence gap: expected {expected}, got {got}")]
    SeqGap { expected: u64, got: u64 },

    #[error("SSTable input is not strictly sorted or is empty")]
    UnsortedInput,

    #[error("corrupt SSTable {file}: {reason}")]
    CorruptTable { file: String, reason: String },

    #[error("inline data of {len} bytes exceeds threshold {threshold}")]
    InlineTooLarge { len: usize, threshold: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("is a directory: {0}")]
    IsDirectory(String),

    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),

    #[error("malformed trace at line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },

    #[error("reports come from different traces")]
    TraceMismatch,

    /// Raised by a test failpoint to abandon a flush or compaction midway.
    #[error("injected crash at {0:?}")]
    InjectedCrash(crate::store::CrashPoint),
}

impl Error {
    /// Process exit code for the CLI, one per error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::InvalidName(_) | Error::InvalidParent(_) => 3,
            Error::CorruptValue(_) | Error::CorruptTable { .. } => 4,
            Error::InvalidSpec(_) | Error::InvalidConfig(_) => 5,
            Error::MalformedTrace { .. } => 6,
            Error::TraceMismatch => 7,
            Error::NotFound(_) | Error::IsDirectory(_) => 8,
            Error::InlineTooLarge { .. } | Error::InvalidRecord(_) => 9,
            Error::SeqGap { .. } | Error::UnsortedInput | Error::InjectedCrash(_) => 10,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
