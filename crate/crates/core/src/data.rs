//! Heterogeneous dataset container, attribute types and the latent-structure
//! containers shared by the rest of the crate.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GlfmError, Result};

/// The observation space of one attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AttributeType {
    Real,
    #[serde(rename = "posreal")]
    PositiveReal,
    #[serde(rename = "cat")]
    Categorical { labels: Vec<String> },
    #[serde(rename = "ord")]
    Ordinal { labels: Vec<String> },
    Count,
}

impl AttributeType {
    pub fn categorical<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        AttributeType::Categorical {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    pub fn ordinal<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        AttributeType::Ordinal {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    /// Categorical/ordinal with generated labels "1".."R".
    pub fn categorical_n(r: usize) -> Self {
        Self::categorical((1..=r).map(|i| i.to_string()))
    }

    pub fn ordinal_n(r: usize) -> Self {
        Self::ordinal((1..=r).map(|i| i.to_string()))
    }

    /// Number of categories or levels for discrete finite types.
    pub fn levels(&self) -> Option<usize> {
        match self {
            AttributeType::Categorical { labels } | AttributeType::Ordinal { labels } => {
                Some(labels.len())
            }
            _ => None,
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        match self {
            AttributeType::Categorical { labels } | AttributeType::Ordinal { labels } => {
                Some(labels)
            }
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, AttributeType::Real | AttributeType::PositiveReal)
    }

    /// Number of pseudo-observation channels: R for categorical, 1 otherwise.
    pub fn channels(&self) -> usize {
        match self {
            AttributeType::Categorical { labels } => labels.len(),
            _ => 1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            AttributeType::Real => "real",
            AttributeType::PositiveReal => "posreal",
            AttributeType::Categorical { .. } => "cat",
            AttributeType::Ordinal { .. } => "ord",
            AttributeType::Count => "count",
        }
    }

    /// Checks the type's own invariants (R ≥ 2, distinct labels).
    pub fn check(&self) -> std::result::Result<(), String> {
        if let Some(labels) = self.labels() {
            if labels.len() < 2 {
                return Err(format!("{} needs at least 2 labels", self.tag()));
            }
            let distinct: HashSet<&String> = labels.iter().collect();
            if distinct.len() != labels.len() {
                return Err("labels must be distinct".into());
            }
        }
        Ok(())
    }
}

/// A single observed cell. Categories and ordinal levels are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Count(u64),
    Real(f64),
    Category(usize),
}

impl Value {
    /// Numeric view used by summaries.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Real(x) => x,
            Value::Count(v) => v as f64,
            Value::Category(r) => r as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeType,
}

impl Attribute {
    pub fn new(name: impl Into<String>, kind: AttributeType) -> Self {
        Attribute {
            name: name.into(),
            kind,
        }
    }
}

/// N×D table of mixed-type observations, stored column-major. A `None` cell
/// is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousDataset {
    attributes: Vec<Attribute>,
    columns: Vec<Vec<Option<Value>>>,
    n_objects: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub column: usize,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}, column {}: {}", self.row, self.column, self.reason)
    }
}

impl HeterogeneousDataset {
    /// Builds a dataset from columns. Only shape is checked here; value
    /// conformance is reported by [`HeterogeneousDataset::validate`].
    pub fn new(attributes: Vec<Attribute>, columns: Vec<Vec<Option<Value>>>) -> Result<Self> {
        if attributes.len() != columns.len() {
            return Err(GlfmError::Shape(format!(
                "{} attributes but {} columns",
                attributes.len(),
                columns.len()
            )));
        }
        let n_objects = columns.first().map_or(0, Vec::len);
        if let Some((d, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n_objects) {
            return Err(GlfmError::Shape(format!(
                "column {d} has {} rows, expected {n_objects}",
                c.len()
            )));
        }
        let mut names = HashSet::new();
        for a in &attributes {
            if !names.insert(a.name.as_str()) {
                return Err(GlfmError::Schema(format!("duplicate attribute name {}", a.name)));
            }
            a.kind.check().map_err(|e| GlfmError::Schema(format!("{}: {e}", a.name)))?;
        }
        Ok(HeterogeneousDataset {
            attributes,
            columns,
            n_objects,
        })
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, d: usize) -> &Attribute {
        &self.attributes[d]
    }

    pub fn column(&self, d: usize) -> &[Option<Value>] {
        &self.columns[d]
    }

    pub fn get(&self, n: usize, d: usize) -> Option<Value> {
        self.columns[d][n]
    }

    pub fn is_missing(&self, n: usize, d: usize) -> bool {
        self.columns[d][n].is_none()
    }

    /// N×D missing mask, row-major.
    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        (0..self.n_objects)
            .map(|n| (0..self.n_attributes()).map(|d| self.is_missing(n, d)).collect())
            .collect()
    }

    /// Returns a copy with one cell replaced.
    pub fn with_cell(&self, n: usize, d: usize, value: Option<Value>) -> Self {
        let mut out = self.clone();
        out.columns[d][n] = value;
        out
    }

    pub(crate) fn columns_mut(&mut self) -> &mut [Vec<Option<Value>>] {
        &mut self.columns
    }

    /// Empty list iff every observed cell conforms to its column's type.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (d, (attr, col)) in self.attributes.iter().zip(&self.columns).enumerate() {
            for (n, cell) in col.iter().enumerate() {
                let Some(v) = cell else { continue };
                if let Some(reason) = nonconformance(&attr.kind, v) {
                    out.push(Violation {
                        row: n,
                        column: d,
                        reason,
                    });
                }
            }
        }
        out
    }

    pub fn column_summary(&self, d: usize) -> Result<ColumnSummary> {
        if d >= self.n_attributes() {
            return Err(GlfmError::Shape(format!("attribute index {d} out of range")));
        }
        let attr = &self.attributes[d];
        let observed: Vec<Value> = self.columns[d].iter().flatten().copied().collect();
        if observed.is_empty() {
            return Err(GlfmError::EmptyColumn(attr.name.clone()));
        }
        let xs: Vec<f64> = observed.iter().map(Value::as_f64).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let frequencies = attr.kind.levels().map(|r| {
            let mut f = vec![0.0; r];
            for v in &observed {
                if let Value::Category(c) = v {
                    f[c - 1] += 1.0;
                }
            }
            f.iter_mut().for_each(|x| *x /= n);
            f
        });
        Ok(ColumnSummary {
            observed: observed.len(),
            min,
            max,
            mean,
            frequencies,
            missing_fraction: 1.0 - n / self.n_objects as f64,
        })
    }
}

fn nonconformance(kind: &AttributeType, v: &Value) -> Option<String> {
    match (kind, v) {
        (AttributeType::Real, Value::Real(x)) => {
            (!x.is_finite()).then(|| format!("non-finite real {x}"))
        }
        (AttributeType::PositiveReal, Value::Real(x)) => {
            (!(x.is_finite() && *x > 0.0)).then(|| format!("positive real must be > 0, got {x}"))
        }
        (AttributeType::Count, Value::Count(_)) => None,
        (AttributeType::Categorical { labels } | AttributeType::Ordinal { labels }, Value::Category(r)) => {
            (*r < 1 || *r > labels.len())
                .then(|| format!("category index {r} outside 1..{}", labels.len()))
        }
        (kind, v) => Some(format!("{v:?} does not conform to type {}", kind.tag())),
    }
}

/// Statistics over the observed cells of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    pub observed: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Relative frequency of each category (categorical/ordinal only).
    pub frequencies: Option<Vec<f64>>,
    pub missing_fraction: f64,
}

/// N×(1+K) binary feature matrix. Column 0 is the always-on bias feature.
/// Stored by column so that features can be appended and pruned cheaply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentMatrix {
    n_rows: usize,
    columns: Vec<Vec<u8>>,
}

impl LatentMatrix {
    /// Bias-only matrix (K = 0).
    pub fn bias_only(n_rows: usize) -> Self {
        LatentMatrix {
            n_rows,
            columns: vec![vec![1; n_rows]],
        }
    }

    /// Builds from non-bias columns; empty columns are pruned.
    pub fn from_features(n_rows: usize, features: Vec<Vec<u8>>) -> Self {
        let mut z = Self::bias_only(n_rows);
        for col in features {
            assert_eq!(col.len(), n_rows, "feature column length");
            z.push_feature(col);
        }
        z.prune();
        z
    }

    /// Builds from rows of length 1+K (bias included).
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let width = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != width || r[0] != 1) {
            return Err(GlfmError::Shape("rows must share a width and start with the bias bit".into()));
        }
        let columns = (0..width).map(|k| rows.iter().map(|r| r[k]).collect()).collect();
        Ok(LatentMatrix { n_rows: n, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Number of non-bias features K.
    pub fn k(&self) -> usize {
        self.columns.len() - 1
    }

    /// 1 + K
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, n: usize, k: usize) -> u8 {
        self.columns[k][n]
    }

    pub(crate) fn set(&mut self, n: usize, k: usize, bit: u8) {
        debug_assert!(k > 0, "bias column is fixed");
        self.columns[k][n] = bit;
    }

    pub fn row(&self, n: usize) -> Vec<u8> {
        self.columns.iter().map(|c| c[n]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.n_rows).map(|n| self.row(n)).collect()
    }

    pub fn column(&self, k: usize) -> &[u8] {
        &self.columns[k]
    }

    pub fn column_sum(&self, k: usize) -> usize {
        self.columns[k].iter().map(|&b| b as usize).sum()
    }

    pub(crate) fn push_feature(&mut self, col: Vec<u8>) {
        self.columns.push(col);
    }

    pub(crate) fn remove_feature(&mut self, k: usize) {
        assert!(k > 0, "cannot remove the bias column");
        self.columns.remove(k);
    }

    /// Removes empty non-bias columns, returning the removed indices in
    /// ascending order (indices refer to the matrix before removal).
    pub fn prune(&mut self) -> Vec<usize> {
        let empty: Vec<usize> = (1..self.width()).filter(|&k| self.column_sum(k) == 0).collect();
        for &k in empty.iter().rev() {
            self.columns.remove(k);
        }
        empty
    }

    /// Invariants: bias column all ones, no empty non-bias column.
    pub fn is_well_formed(&self) -> bool {
        self.columns[0].iter().all(|&b| b == 1)
            && (1..self.width()).all(|k| self.column_sum(k) > 0)
            && self.columns.iter().all(|c| c.len() == self.n_rows && c.iter().all(|&b| b <= 1))
    }
}

/// Model and run hyperparameters. Variances, not standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub sigma_b2: f64,
    pub sigma_u2: f64,
    pub sample_alpha: bool,
    pub alpha_prior: (f64, f64),
    pub k_new_max: usize,
    pub k_init: usize,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            alpha: 1.0,
            sigma_b2: 1.0,
            sigma_u2: 0.01,
            sample_alpha: true,
            alpha_prior: (1.0, 1.0),
            k_new_max: 3,
            k_init: 1,
            n_iterations: 1000,
            burn_in: 500,
            thinning: 5,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.alpha > 0.0) {
            problems.push("alpha must be > 0");
        }
        if !(self.sigma_b2 > 0.0) {
            problems.push("sigma_b2 must be > 0");
        }
        if !(self.sigma_u2 > 0.0 && self.sigma_u2 < 1.0) {
            problems.push("sigma_u2 must lie in (0, 1)");
        }
        if !(self.alpha_prior.0 > 0.0 && self.alpha_prior.1 > 0.0) {
            problems.push("alpha prior shape and rate must be > 0");
        }
        if self.k_new_max < 1 {
            problems.push("k_new_max must be >= 1");
        }
        if self.burn_in >= self.n_iterations {
            problems.push("burn_in must be < n_iterations");
        }
        if self.thinning < 1 {
            problems.push("thinning must be >= 1");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GlfmError::Config(problems.join("; ")))
        }
    }

    /// Number of samples a run retains.
    pub fn retained(&self) -> usize {
        (self.n_iterations - self.burn_in) / self.thinning
    }

    /// 1/σ_B²
    pub fn lambda(&self) -> f64 {
        1.0 / self.sigma_b2
    }
}
