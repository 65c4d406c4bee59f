//! Error types for the engine.

use thiserror::Error;

use crate::oracle::OracleRole;

/// Errors from loading or slicing storylines.
#[derive(Debug, Error)]
pub enum StorylineError {
    #[error("failed to read storyline file: {0}")]
    Io(#[from] std::io::Error),
    #[error("storyline file is empty")]
    Empty,
    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: field `{field}` must be non-empty")]
    EmptyField { line: usize, field: &'static str },
    #[error("action index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("character `{0}` not found in storyline")]
    UnknownCharacter(String),
    #[error("character `{character}` appears only {count} time(s); need at least 2 to split")]
    TooFewActions { character: String, count: usize },
}

/// Errors from bookmark bank operations and persistence.
#[derive(Debug, Error)]
pub enum BankError {
    #[error("behavioral bookmark requires a subject character")]
    MissingSubject,
    #[error("bookmark id {0} not found in bank")]
    UnknownBookmark(u64),
    #[error("failed to read/write bank file: {0}")]
    Io(#[from] std::io::Error),
    #[error("bank file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported bank schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Errors from the oracle gateway and its backends.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("scripted backend has no fixture or rule for {role} call (prompt hash {prompt_hash})")]
    Unscripted { role: OracleRole, prompt_hash: String },
    #[error("oracle backend error for {role}: {message}")]
    Backend { role: OracleRole, message: String },
    #[error("network error after {attempts} attempt(s) for {role}: {message}")]
    Network {
        role: OracleRole,
        attempts: u32,
        message: String,
    },
    #[error("cache I/O error: {0}")]
    CacheIo(std::io::Error),
    #[error("environment variable `{0}` with the API credential is not set")]
    MissingCredential(String),
}

/// Errors from synchronization. Durable partial progress is recorded on the
/// bookmark itself before this error surfaces.
#[derive(Debug, Error)]
pub enum SyncError {
    #[error("sync target {target} below bookmark position {position}")]
    TargetBehind { target: usize, position: usize },
    #[error("sync target {target} beyond storyline length {len}")]
    TargetBeyondStory { target: usize, len: usize },
    #[error("behavioral bookmark has no subject character")]
    MissingSubject,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Errors from config parsing.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `key = value`")]
    MalformedLine { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("unknown oracle role name `{0}`")]
    UnknownRole(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("missing required config key `{0}`")]
    MissingKey(&'static str),
}

/// Errors from the evaluation harness.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Storyline(#[from] StorylineError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trace I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace file {path} cannot be resumed: {reason}")]
    Unresumable { path: String, reason: String },
    #[error("haystack generation invariant violated: {0}")]
    HaystackInvariant(String),
    #[error("haystack evaluation supports method `bookmarks` only, got `{0}`")]
    HaystackMethod(String),
    #[error("report I/O error: {0}")]
    Report(String),
}
