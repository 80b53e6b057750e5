use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Attribute, AttributeType};
use crate::error::{GlfmError, Result};

/// Cell texts treated as missing unless a column overrides them.
pub const DEFAULT_MISSING: [&str; 2] = ["", "NA"];

/// One attribute record of a schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing: Option<Vec<String>>,
}

/// Schema file: `{"attributes": [{"name": ..., "type": "cat", "labels": [...]}, ...]}`
/// with type tags real, posreal, cat, ord, count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<SchemaEntry>,
}

impl Schema {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: Schema = serde_json::from_str(&text)?;
        schema.attribute_types()?;
        Ok(schema)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn from_attributes(attributes: &[Attribute]) -> Self {
        Schema {
            attributes: attributes
                .iter()
                .map(|a| SchemaEntry {
                    name: a.name.clone(),
                    tag: a.kind.tag().to_string(),
                    labels: a.kind.labels().map(<[String]>::to_vec),
                    missing: None,
                })
                .collect(),
        }
    }

    pub fn attribute_types(&self) -> Result<Vec<Attribute>> {
        let mut seen = std::collections::HashSet::new();
        self.attributes
            .iter()
            .map(|e| {
                if !seen.insert(e.name.as_str()) {
                    return Err(GlfmError::Schema(format!("duplicate attribute {}", e.name)));
                }
                let labels = || {
                    e.labels
                        .clone()
                        .ok_or_else(|| GlfmError::Schema(format!("{}: {} needs labels", e.name, e.tag)))
                };
                let kind = match e.tag.as_str() {
                    "real" => AttributeType::Real,
                    "posreal" => AttributeType::PositiveReal,
                    "count" => AttributeType::Count,
                    "cat" => AttributeType::Categorical { labels: labels()? },
                    "ord" => AttributeType::Ordinal { labels: labels()? },
                    other => {
                        return Err(GlfmError::Schema(format!("{}: unknown type tag {other:?}", e.name)))
                    }
                };
                kind.check().map_err(|m| GlfmError::Schema(format!("{}: {m}", e.name)))?;
                Ok(Attribute::new(e.name.clone(), kind))
            })
            .collect()
    }

    /// Missing markers for attribute `d`.
    pub fn missing_markers(&self, d: usize) -> Vec<String> {
        self.attributes[d]
            .missing
            .clone()
            .unwrap_or_else(|| DEFAULT_MISSING.iter().map(|s| s.to_string()).collect())
    }
}

/// Hex SHA-256 of the canonical JSON encoding of the attribute list.
pub fn schema_hash(attributes: &[Attribute]) -> String {
    let canonical = serde_json::to_vec(attributes).expect("attributes serialize");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}
