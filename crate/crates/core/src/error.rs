use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input does not crash basic target {program}")]
    NotACrash { program: String },

    #[error("historical trace failed validation: {}", render_violations(.0))]
    ValidationFailed(Vec<Violation>),

    #[error("no viable guidance: every path was dropped and the dictionary is empty")]
    NoViablePath,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("harness contract violated by {program}: {message}")]
    Harness { program: String, message: String },

    #[error("unknown target {0}")]
    UnknownTarget(String),

    #[error("unsupported trace format_version {0}")]
    UnsupportedVersion(u32),

    #[error("malformed trace file: {0}")]
    Format(String),

    #[error("malformed bench csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn render_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
