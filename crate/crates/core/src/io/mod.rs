//! Files in and out: schema and CSV ingestion, run configuration, fit
//! artifacts, report files.

mod artifact;
mod config;
mod table;
mod schema;

pub use artifact::{read_fit, write_fit, FIT_FORMAT_VERSION};
pub use config::RunConfig;
pub use table::{format_value, load, load_with_schema, parse_cell, write_csv};
pub use schema::{schema_hash, Schema, SchemaEntry, DEFAULT_MISSING};
