use std::fmt;

use thiserror::Error;

/// Literal-grammar error with a 1-based line/column into the literal text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl ParseError {
    pub fn new(message: impl Into<String>, line: usize, column: usize) -> Self {
        ParseError { message: message.into(), line, column }
    }

    /// Re-anchors a position-less error at byte offset `offset` of `text`.
    pub fn at(mut self, text: &str, offset: usize) -> Self {
        if self.line == 0 {
            let (line, column) = line_col(text, offset);
            self.line = line;
            self.column = column;
        }
        self
    }
}

pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}:{}: {}", self.line, self.column, self.message)
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("overlapping components: {0} and {1}")]
    OverlappingComponents(String, String),
    #[error("set {set} is not contained in {hull}")]
    NotContained { set: String, hull: String },
    #[error("set {set} lies outside the domain [{lo},{hi}]")]
    SetOutsideDomain { set: String, lo: String, hi: String },
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("point {point} outside [{lo},{hi}]")]
    OutOfDomain { point: String, lo: String, hi: String },
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("no {side} limit at {point}")]
    NoOneSidedLimit { point: String, side: &'static str },
    #[error("closed form unsupported: {0}")]
    UnsupportedClass(String),
    #[error("no convergence after {iterations} refinements (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid gauge: {0}")]
    InvalidGauge(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("cover elements {0} and {1} overlap")]
    GeneratorOverlap(usize, usize),
    #[error("no tail estimate available")]
    TailUnbounded,
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
