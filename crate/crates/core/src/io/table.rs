use std::io::{Read, Write};
use std::path::Path;

use crate::data::{AttributeType, HeterogeneousDataset, Value};
use crate::error::{GlfmError, Result};

use super::schema::Schema;

/// Loads a CSV file (RFC 4180, header row) against a schema file.
pub fn load(csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<HeterogeneousDataset> {
    let schema = Schema::read(schema_path)?;
    let file = std::fs::File::open(csv_path)?;
    load_with_schema(file, &schema)
}

/// Header names must match the schema names (in any order); columns are
/// reordered to schema order.
pub fn load_with_schema<R: Read>(reader: R, schema: &Schema) -> Result<HeterogeneousDataset> {
    let attributes = schema.attribute_types()?;
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut position = Vec::with_capacity(attributes.len());
    for attr in &attributes {
        let idx = header
            .iter()
            .position(|h| *h == attr.name)
            .ok_or_else(|| GlfmError::Schema(format!("column {} missing from the data file", attr.name)))?;
        position.push(idx);
    }
    if let Some(extra) = header.iter().find(|h| !attributes.iter().any(|a| &a.name == *h)) {
        return Err(GlfmError::Schema(format!("unknown column {extra}")));
    }
    let markers: Vec<Vec<String>> = (0..attributes.len()).map(|d| schema.missing_markers(d)).collect();
    let mut columns: Vec<Vec<Option<Value>>> = vec![Vec::new(); attributes.len()];
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        for (d, attr) in attributes.iter().enumerate() {
            let text = record.get(position[d]).unwrap_or("");
            let cell = parse_cell(text, &attr.kind, &markers[d]).ok_or_else(|| GlfmError::Parse {
                row: row + 1,
                column: attr.name.clone(),
                text: text.to_string(),
            })?;
            columns[d].push(cell);
        }
    }
    HeterogeneousDataset::new(attributes, columns)
}

/// Parses one cell; `None` when the text is not a valid value of the type.
pub fn parse_cell(text: &str, kind: &AttributeType, missing: &[String]) -> Option<Option<Value>> {
    let t = text.trim();
    if missing.iter().any(|m| m == t) {
        return Some(None);
    }
    let value = match kind {
        AttributeType::Real | AttributeType::PositiveReal => {
            let x: f64 = t.parse().ok()?;
            x.is_finite().then_some(Value::Real(x))?
        }
        AttributeType::Count => match t.parse::<u64>() {
            Ok(v) => Value::Count(v),
            Err(_) => {
                let x: f64 = t.parse().ok()?;
                (x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64).then_some(Value::Count(x as u64))?
            }
        },
        AttributeType::Categorical { labels } | AttributeType::Ordinal { labels } => {
            Value::Category(labels.iter().position(|l| l == t)? + 1)
        }
    };
    Some(Some(value))
}

/// Canonical text of a cell: shortest round-trip decimal for reals, labels
/// for categories, "NA" for missing.
pub fn format_value(value: Option<Value>, kind: &AttributeType) -> String {
    match (value, kind.labels()) {
        (None, _) => "NA".to_string(),
        (Some(Value::Category(r)), Some(labels)) => labels[r - 1].clone(),
        (Some(Value::Real(x)), _) => format!("{x:?}"),
        (Some(Value::Count(v)), _) => v.to_string(),
        (Some(Value::Category(r)), None) => r.to_string(),
    }
}

pub fn write_csv<W: Write>(data: &HeterogeneousDataset, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(data.attributes().iter().map(|a| a.name.as_str()))?;
    for n in 0..data.n_objects() {
        out.write_record(
            data.attributes()
                .iter()
                .enumerate()
                .map(|(d, a)| format_value(data.get(n, d), &a.kind)),
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Attribute;
    use proptest::prelude::*;

    fn schema() -> Schema {
        Schema::from_attributes(&[
            Attribute::new("level", AttributeType::ordinal(["low", "medium", "high"])),
            Attribute::new("n", AttributeType::Count),
            Attribute::new("x", AttributeType::Real),
        ])
    }

    #[test]
    fn markers_labels_and_column_order() {
        let text = "x,n,level\n1.5,NA,medium\n,3,low\n";
        let ds = load_with_schema(text.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.n_objects(), 2);
        assert_eq!(ds.get(0, 0), Some(Value::Category(2)));
        assert!(ds.is_missing(0, 1));
        assert!(ds.is_missing(1, 2));
        assert_eq!(ds.get(1, 1), Some(Value::Count(3)));
    }

    #[test]
    fn parse_errors_name_row_and_column() {
        let err = load_with_schema("x,n,level\n1.5,2,huge\n".as_bytes(), &schema()).unwrap_err();
        match err {
            GlfmError::Parse { row, column, text } => {
                assert_eq!((row, column.as_str(), text.as_str()), (1, "level", "huge"));
            }
            e => panic!("unexpected {e}"),
        }
        assert!(load_with_schema("x,n,level,extra\n1,2,low,0\n".as_bytes(), &schema()).is_err());
        assert!(load_with_schema("x,level\n1,low\n".as_bytes(), &schema()).is_err());
        assert!(load_with_schema("x,n,level\n1,-2,low\n".as_bytes(), &schema()).is_err());
    }

    #[test]
    fn integral_float_counts_are_accepted() {
        let kind = AttributeType::Count;
        assert_eq!(parse_cell("4.0", &kind, &[]), Some(Some(Value::Count(4))));
        assert_eq!(parse_cell("4.5", &kind, &[]), None);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in prop::collection::vec(
                (prop::option::of(any::<f64>().prop_filter("finite", |x| x.is_finite())),
                 prop::option::of(any::<u64>()),
                 prop::option::of(1usize..=3)),
                1..20)
        ) {
            let attrs = vec![
                Attribute::new("x", AttributeType::Real),
                Attribute::new("n", AttributeType::Count),
                Attribute::new("level", AttributeType::ordinal(["low", "medium", "high"])),
            ];
            let columns = vec![
                rows.iter().map(|r| r.0.map(Value::Real)).collect(),
                rows.iter().map(|r| r.1.map(Value::Count)).collect(),
                rows.iter().map(|r| r.2.map(Value::Category)).collect(),
            ];
            let ds = HeterogeneousDataset::new(attrs.clone(), columns).unwrap();
            let mut buf = Vec::new();
            write_csv(&ds, &mut buf).unwrap();
            let back = load_with_schema(buf.as_slice(), &Schema::from_attributes(&attrs)).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
