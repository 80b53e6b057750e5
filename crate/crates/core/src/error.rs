use thiserror::Error;

use crate::data::Violation;

#[derive(Debug, Error)]
pub enum GlfmError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("no data in column {0}")]
    EmptyColumn(String),
    #[error("invalid dataset: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("value {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },
    #[error("row {row}, column {column}: cannot parse {text:?}")]
    Parse {
        row: usize,
        column: String,
        text: String,
    },
    #[error("schema hash mismatch: fit was produced on {expected}, data has {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    let mut s: Vec<String> = v.iter().take(10).map(ToString::to_string).collect();
    if v.len() > 10 {
        s.push(format!("... and {} more", v.len() - 10));
    }
    s.join("; ")
}

pub type Result<T, E = GlfmError> = std::result::Result<T, E>;
