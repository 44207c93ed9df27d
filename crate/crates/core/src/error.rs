use thiserror::Error;

use crate::trace::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid trace: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("{what} has {size} events, above the cap of {cap}")]
    Cap {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("search exceeded its budget of {0} states")]
    Budget(usize),
    #[error("{path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("{0}")]
    Poset(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Query(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
