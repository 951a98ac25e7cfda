// SPDX-License-Identifier: Apache-2.0

use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid ciphertext: {0}")]
    InvalidCiphertext(String),
    /// Operands were produced under different keys.
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// No query term maps to a concept of the ontology.
    #[error("query maps to no concept")]
    EmptyTrapdoor,
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),
    #[error("not found: {0}")]
    NotFound(String),
    /// A caller broke an input contract (e.g. passed unsorted lists).
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid result: {0}")]
    InvalidResult(String),
    #[error("authenticated decryption failed")]
    Decryption,
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
