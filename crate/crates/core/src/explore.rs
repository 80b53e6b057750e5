//! Effect reports: per-pattern attribute distributions read against the
//! empirical baseline of each attribute.
//!
//! A pattern is a full row of Z (bias bit first). Its distribution for
//! attribute d uses the pseudo mean m = pattern·B̂_d with total sd
//! s = √(1 + σ_u²). B̂ is the posterior mean of B over the trailing run of
//! retained samples whose K equals the last sample's K, so that feature
//! labels are comparable across the averaged samples.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Attribute, AttributeType, HeterogeneousDataset, Value};
use crate::error::{GlfmError, Result};
use crate::math::std_normal_pdf;
use crate::sampler::{FitResult, Sample};
use crate::transforms::{categorical_probs, TransformSpec};

pub const GRID_POINTS: usize = 200;
pub const REPORT_FORMAT_VERSION: u32 = 1;
const GRID_PAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern(Vec<u8>);

impl Pattern {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.first() != Some(&1) || bits.iter().any(|&b| b > 1) {
            return Err(GlfmError::Shape("a pattern is binary with the bias bit set".into()));
        }
        Ok(Pattern(bits))
    }

    pub fn bias_only(k: usize) -> Self {
        let mut bits = vec![0; k + 1];
        bits[0] = 1;
        Pattern(bits)
    }

    /// Bias plus feature k (1-based).
    pub fn one_hot(k_total: usize, k: usize) -> Self {
        let mut p = Self::bias_only(k_total);
        p.0[k] = 1;
        p
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len() - 1
    }

    /// Bias plus at most one feature.
    pub fn is_canonical(&self) -> bool {
        self.0[1..].iter().filter(|&&b| b == 1).count() <= 1
    }

    /// File-name friendly form: the feature bits, or "bias" when K = 0.
    pub fn key(&self) -> String {
        if self.k() == 0 {
            "bias".into()
        } else {
            self.0[1..].iter().map(|b| char::from(b'0' + b)).collect()
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for b in &self.0[1..] {
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCount {
    pub pattern: String,
    pub bits: Vec<u8>,
    pub count: usize,
    pub canonical: bool,
}

/// Patterns of the last retained Z with at least `min_count` rows, sorted by
/// count (descending, ties by bits), plus every canonical pattern.
pub fn list_patterns(fit: &FitResult, min_count: usize) -> Result<Vec<PatternCount>> {
    let last = fit.last().ok_or_else(|| GlfmError::Config("the fit retained no samples".into()))?;
    let mut counts: BTreeMap<Pattern, usize> = BTreeMap::new();
    for row in &last.z {
        *counts.entry(Pattern::new(row.clone())?).or_default() += 1;
    }
    let k = last.k();
    let canonical: Vec<Pattern> = std::iter::once(Pattern::bias_only(k))
        .chain((1..=k).map(|j| Pattern::one_hot(k, j)))
        .collect();
    let mut out: Vec<PatternCount> = counts
        .iter()
        .filter(|(p, &c)| c >= min_count || canonical.contains(p))
        .map(|(p, &c)| pattern_count(p, c))
        .collect();
    for p in &canonical {
        if !counts.contains_key(p) {
            out.push(pattern_count(p, 0));
        }
    }
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.bits.cmp(&b.bits)));
    Ok(out)
}

fn pattern_count(p: &Pattern, count: usize) -> PatternCount {
    PatternCount {
        pattern: p.to_string(),
        bits: p.bits().to_vec(),
        count,
        canonical: p.is_canonical(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlugIn {
    /// Distribution at the posterior mean of B (and of the thresholds).
    #[default]
    PosteriorMean,
    /// Average of the per-sample distributions.
    SampleAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Table {
    Discrete { labels: Vec<String>, probabilities: Vec<f64> },
    Continuous { grid: Vec<f64>, density: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    pub attribute_index: usize,
    pub attribute: String,
    /// Pattern display string, or "baseline".
    pub pattern: String,
    #[serde(flatten)]
    pub table: Table,
}

impl DistributionTable {
    /// CSV rows: value, probability or density, pattern, attribute.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let (values, numbers, column): (Vec<String>, &[f64], &str) = match &self.table {
            Table::Discrete { labels, probabilities } => (labels.clone(), probabilities, "probability"),
            Table::Continuous { grid, density } => (grid.iter().map(|g| format!("{g:?}")).collect(), density, "density"),
        };
        out.write_record(["value", column, "pattern", "attribute"])?;
        for (v, p) in values.iter().zip(numbers) {
            out.write_record([v.as_str(), &format!("{p:?}"), &self.pattern, &self.attribute])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Shared evaluation grid of a continuous attribute: [min, max] of the
/// observed data padded by 10% of the range on each side (clipped at 0 for
/// positive reals).
pub fn grid(kind: &AttributeType, min: f64, max: f64) -> Vec<f64> {
    let range = max - min;
    let pad = if range > 0.0 { GRID_PAD * range } else { GRID_PAD * min.abs().max(1.0) };
    let mut lo = min - pad;
    if matches!(kind, AttributeType::PositiveReal) {
        lo = lo.max(0.0);
    }
    let hi = max + pad;
    (0..GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

/// Count display support: labels "0".."max−1" plus a final "≥max" bucket.
fn count_labels(max: u64) -> Vec<String> {
    let mut labels: Vec<String> = (0..max).map(|v| v.to_string()).collect();
    labels.push(format!("≥{max}"));
    labels
}

/// Distribution of attribute d averaged over (transform, channel means)
/// pairs. `display_range` is the observed (min, max) of the column.
pub fn distribution_for_means(
    attr: &Attribute,
    display_range: (f64, f64),
    components: &[(TransformSpec, Vec<f64>)],
    s: f64,
) -> Table {
    let weight = 1.0 / components.len() as f64;
    match &attr.kind {
        AttributeType::Real | AttributeType::PositiveReal => {
            let grid = grid(&attr.kind, display_range.0, display_range.1);
            let density = grid
                .iter()
                .map(|&x| {
                    components
                        .iter()
                        .map(|(spec, m)| {
                            spec.observation_logdensity(Value::Real(x), m, s).map_or(0.0, f64::exp)
                        })
                        .sum::<f64>()
                        * weight
                })
                .collect();
            Table::Continuous { grid, density }
        }
        AttributeType::Categorical { labels } => {
            let mut probabilities = vec![0.0; labels.len()];
            for (_, m) in components {
                for (acc, p) in probabilities.iter_mut().zip(categorical_probs(m, s)) {
                    *acc += weight * p;
                }
            }
            Table::Discrete { labels: labels.clone(), probabilities: normalized(probabilities) }
        }
        AttributeType::Ordinal { labels } => {
            let mut probabilities = vec![0.0; labels.len()];
            for (spec, m) in components {
                for (r, acc) in probabilities.iter_mut().enumerate() {
                    *acc += weight
                        * spec
                            .observation_logdensity(Value::Category(r + 1), m, s)
                            .map_or(0.0, f64::exp);
                }
            }
            Table::Discrete { labels: labels.clone(), probabilities: normalized(probabilities) }
        }
        AttributeType::Count => {
            let max = display_range.1.max(0.0) as u64;
            let mut probabilities = vec![0.0; max as usize + 1];
            for (spec, m) in components {
                let mut below = 0.0;
                for v in 0..max {
                    let p = spec.observation_logdensity(Value::Count(v), m, s).map_or(0.0, f64::exp);
                    probabilities[v as usize] += weight * p;
                    below += p;
                }
                probabilities[max as usize] += weight * (1.0 - below).max(0.0);
            }
            Table::Discrete { labels: count_labels(max), probabilities: normalized(probabilities) }
        }
    }
}

fn normalized(mut p: Vec<f64>) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

/// Trailing retained samples sharing the last sample's K.
fn window(fit: &FitResult) -> &[Sample] {
    let Some(last) = fit.last() else { return &[] };
    let k = last.k();
    let start = fit.samples.iter().rposition(|s| s.k() != k).map_or(0, |i| i + 1);
    &fit.samples[start..]
}

fn sample_spec(fit: &FitResult, d: usize, thresholds: &[f64]) -> TransformSpec {
    match &fit.specs[d] {
        TransformSpec::Ordinal { .. } => TransformSpec::Ordinal { thresholds: thresholds.to_vec() },
        spec => spec.clone(),
    }
}

/// Distribution of attribute d for rows carrying `pattern`, which must have
/// the last sample's width.
pub fn pattern_distribution(fit: &FitResult, pattern: &Pattern, d: usize, plug_in: PlugIn) -> Result<DistributionTable> {
    let samples = window(fit);
    let width = samples.first().map_or(0, |s| s.k() + 1);
    if samples.is_empty() || pattern.bits().len() != width {
        return Err(GlfmError::Shape(format!(
            "pattern {pattern} does not match the fit's {} features",
            width.saturating_sub(1)
        )));
    }
    let range = fit.layout().range(d);
    let mean_of = |b: &[Vec<f64>]| -> Vec<f64> {
        range
            .clone()
            .map(|c| pattern.bits().iter().zip(&b[c]).map(|(&z, w)| z as f64 * w).sum())
            .collect()
    };
    let components: Vec<(TransformSpec, Vec<f64>)> = match plug_in {
        PlugIn::SampleAverage => samples
            .iter()
            .map(|s| (sample_spec(fit, d, &s.thresholds[d]), mean_of(&s.b)))
            .collect(),
        PlugIn::PosteriorMean => {
            let count = samples.len() as f64;
            let b_hat: Vec<Vec<f64>> = (0..samples[0].b.len())
                .map(|c| (0..width).map(|k| samples.iter().map(|s| s.b[c][k]).sum::<f64>() / count).collect())
                .collect();
            let th_hat: Vec<f64> = (0..samples[0].thresholds[d].len())
                .map(|i| samples.iter().map(|s| s.thresholds[d][i]).sum::<f64>() / count)
                .collect();
            vec![(sample_spec(fit, d, &th_hat), mean_of(&b_hat))]
        }
    };
    let s = (1.0 + fit.hyper.sigma_u2).sqrt();
    let attr = &fit.schema[d];
    Ok(DistributionTable {
        attribute_index: d,
        attribute: attr.name.clone(),
        pattern: pattern.to_string(),
        table: distribution_for_means(attr, fit.column_ranges[d], &components, s),
    })
}

/// Empirical distribution of attribute d: relative frequencies for discrete
/// types, a Gaussian KDE with Silverman's bandwidth on the shared grid for
/// continuous ones.
pub fn empirical_baseline(data: &HeterogeneousDataset, d: usize) -> Result<DistributionTable> {
    let attr = data.attribute(d);
    let summary = data.column_summary(d)?;
    let xs: Vec<f64> = data.column(d).iter().flatten().map(Value::as_f64).collect();
    let n = xs.len() as f64;
    let table = match &attr.kind {
        AttributeType::Real | AttributeType::PositiveReal => {
            let grid = grid(&attr.kind, summary.min, summary.max);
            let h = silverman_bandwidth(&xs);
            let density = grid
                .iter()
                .map(|&g| xs.iter().map(|&x| std_normal_pdf((g - x) / h)).sum::<f64>() / (n * h))
                .collect();
            Table::Continuous { grid, density }
        }
        AttributeType::Categorical { labels } | AttributeType::Ordinal { labels } => {
            let mut p = vec![0.0; labels.len()];
            for &x in &xs {
                p[x as usize - 1] += 1.0 / n;
            }
            Table::Discrete { labels: labels.clone(), probabilities: p }
        }
        AttributeType::Count => {
            let max = summary.max as u64;
            let mut p = vec![0.0; max as usize + 1];
            for &x in &xs {
                p[(x as u64).min(max) as usize] += 1.0 / n;
            }
            Table::Discrete { labels: count_labels(max), probabilities: p }
        }
    };
    Ok(DistributionTable {
        attribute_index: d,
        attribute: attr.name.clone(),
        pattern: "baseline".into(),
        table,
    })
}

/// h = 0.9·min(sd, IQR/1.34)·n^(−1/5), falling back to whichever spread is
/// nonzero, and to 1 for a constant column.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return 1.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub retained_samples: usize,
    /// Samples in the trailing same-K window behind B̂.
    pub window_samples: usize,
    pub k: usize,
    pub n_objects: usize,
    pub min_count: usize,
    pub plug_in: PlugIn,
    pub schema_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeInfo {
    pub name: String,
    #[serde(rename = "type")]
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsReport {
    pub format_version: u32,
    pub metadata: ReportMetadata,
    pub attributes: Vec<AttributeInfo>,
    pub patterns: Vec<PatternCount>,
    pub tables: Vec<DistributionTable>,
    pub baselines: Vec<DistributionTable>,
}

impl EffectsReport {
    pub fn table(&self, pattern: &str, attribute: &str) -> Option<&DistributionTable> {
        self.tables.iter().find(|t| t.pattern == pattern && t.attribute == attribute)
    }

    pub fn baseline(&self, attribute: &str) -> Option<&DistributionTable> {
        self.baselines.iter().find(|t| t.attribute == attribute)
    }

    /// Writes `report.json` and, under `tables/`, one CSV per (pattern,
    /// attribute) table named `{d}-{pattern bits}.csv` and one baseline CSV
    /// per attribute named `{d}-baseline.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let tables_dir = dir.join("tables");
        std::fs::create_dir_all(&tables_dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(self)?)?;
        for (t, p) in self.tables.iter().zip(self.table_patterns()) {
            let file = std::fs::File::create(tables_dir.join(format!("{}-{}.csv", t.attribute_index, p.key())))?;
            t.write_csv(file)?;
        }
        for t in &self.baselines {
            let file = std::fs::File::create(tables_dir.join(format!("{}-baseline.csv", t.attribute_index)))?;
            t.write_csv(file)?;
        }
        Ok(())
    }

    fn table_patterns(&self) -> Vec<Pattern> {
        let by_name: BTreeMap<&str, &[u8]> = self.patterns.iter().map(|p| (p.pattern.as_str(), p.bits.as_slice())).collect();
        self.tables
            .iter()
            .map(|t| Pattern(by_name[t.pattern.as_str()].to_vec()))
            .collect()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Listed patterns × attributes plus the baselines. Pure in its inputs.
pub fn build_report(
    fit: &FitResult,
    data: &HeterogeneousDataset,
    min_count: usize,
    plug_in: PlugIn,
) -> Result<EffectsReport> {
    check_schema(fit, data)?;
    let patterns = list_patterns(fit, min_count)?;
    let mut tables = Vec::with_capacity(patterns.len() * data.n_attributes());
    for p in &patterns {
        let pattern = Pattern::new(p.bits.clone())?;
        for d in 0..data.n_attributes() {
            tables.push(pattern_distribution(fit, &pattern, d, plug_in)?);
        }
    }
    let baselines = (0..data.n_attributes())
        .map(|d| empirical_baseline(data, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(EffectsReport {
        format_version: REPORT_FORMAT_VERSION,
        metadata: ReportMetadata {
            seed: fit.hyper.seed,
            n_iterations: fit.hyper.n_iterations,
            burn_in: fit.hyper.burn_in,
            thinning: fit.hyper.thinning,
            retained_samples: fit.samples.len(),
            window_samples: window(fit).len(),
            k: fit.last().map_or(0, Sample::k),
            n_objects: fit.n_objects,
            min_count,
            plug_in,
            schema_hash: fit.schema_hash.clone(),
        },
        attributes: data
            .attributes()
            .iter()
            .map(|a| AttributeInfo { name: a.name.clone(), tag: a.kind.tag().into() })
            .collect(),
        patterns,
        tables,
        baselines,
    })
}

/// A fit may only be explored or used for imputation on data with the same schema.
pub fn check_schema(fit: &FitResult, data: &HeterogeneousDataset) -> Result<()> {
    let found = crate::io::schema_hash(data.attributes());
    if found != fit.schema_hash {
        return Err(GlfmError::SchemaMismatch { expected: fit.schema_hash.clone(), found });
    }
    Ok(())
}
