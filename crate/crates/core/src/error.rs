use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    FieldCount(usize),
    BadNumber(&'static str, String),
    UnknownOp(String),
    ZeroSize,
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            ParseErrorKind::FieldCount(n) => write!(f, "expected 7 fields, found {n}"),
            ParseErrorKind::BadNumber(field, v) => write!(f, "{field} is not a number: {v:?}"),
            ParseErrorKind::UnknownOp(op) => write!(f, "unknown request type {op:?}"),
            ParseErrorKind::ZeroSize => write!(f, "zero-length request"),
            ParseErrorKind::Json(e) => write!(f, "invalid JSON record: {e}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("{skipped} of {total} trace lines malformed, above the {limit} limit")]
    TooManyMalformed { skipped: usize, total: usize, limit: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("accounting error: {0}")]
    Accounting(String),
    #[error("invariant violated after request {request_index}: {message}")]
    Invariant { request_index: usize, message: String },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Parse(_) | Error::TooManyMalformed { .. } => 3,
            Error::Accounting(_) | Error::Invariant { .. } => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
