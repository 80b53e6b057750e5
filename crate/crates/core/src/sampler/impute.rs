//! Posterior predictive imputation of missing cells.

use crate::data::{AttributeType, HeterogeneousDataset, Value};
use crate::math::{softplus, std_normal_interval};
use crate::transforms::{categorical_probs, TransformSpec};

use super::{mixture_cdf, FitResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Uncertainty {
    /// Predictive entropy in nats (discrete types).
    Entropy(f64),
    /// Central 90% predictive interval (continuous types).
    Interval { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPrediction {
    pub row: usize,
    pub column: usize,
    pub value: Value,
    pub uncertainty: Uncertainty,
    /// Predictive probabilities over the support (discrete types only);
    /// counts are indexed from 0.
    pub probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ImputeResult {
    pub completed: HeterogeneousDataset,
    pub cells: Vec<CellPrediction>,
}

/// Fills every missing cell with its posterior predictive point estimate:
/// the mode for discrete types and the median for continuous ones. The
/// predictive distribution averages over all retained samples.
pub fn impute(fit: &FitResult, data: &HeterogeneousDataset) -> ImputeResult {
    let layout = fit.layout();
    let s = (1.0 + fit.hyper.sigma_u2).sqrt();
    let mut completed = data.clone();
    let mut cells = Vec::new();
    for d in 0..data.n_attributes() {
        let range = layout.range(d);
        for n in 0..data.n_objects() {
            if !data.is_missing(n, d) || fit.samples.is_empty() {
                continue;
            }
            // per-sample pseudo means for this cell
            let means: Vec<Vec<f64>> = fit
                .samples
                .iter()
                .map(|smp| {
                    range
                        .clone()
                        .map(|c| smp.z[n].iter().zip(&smp.b[c]).map(|(&z, b)| z as f64 * b).sum())
                        .collect()
                })
                .collect();
            let spec = &fit.specs[d];
            let prediction = match &data.attribute(d).kind {
                AttributeType::Categorical { .. } => {
                    let mut probs = vec![0.0; range.len()];
                    for m in &means {
                        for (acc, p) in probs.iter_mut().zip(categorical_probs(m, s)) {
                            *acc += p;
                        }
                    }
                    discrete_prediction(n, d, probs, means.len(), 1)
                }
                AttributeType::Ordinal { labels } => {
                    let mut probs = vec![0.0; labels.len()];
                    for (m, smp) in means.iter().zip(&fit.samples) {
                        let th = TransformSpec::Ordinal {
                            thresholds: smp.thresholds[d].clone(),
                        };
                        for (r, acc) in probs.iter_mut().enumerate() {
                            *acc += std_normal_interval(
                                (th.threshold(r) - m[0]) / s,
                                (th.threshold(r + 1) - m[0]) / s,
                            );
                        }
                    }
                    discrete_prediction(n, d, probs, means.len(), 1)
                }
                AttributeType::Count => {
                    let top = means.iter().map(|m| spec.count_support_max(m[0], s)).max().unwrap_or(0);
                    let mut probs = vec![0.0; top as usize + 1];
                    for m in &means {
                        for (v, acc) in probs.iter_mut().enumerate() {
                            *acc += spec
                                .observation_logdensity(Value::Count(v as u64), m, s)
                                .expect("count cell")
                                .exp();
                        }
                    }
                    discrete_prediction(n, d, probs, means.len(), 0)
                }
                AttributeType::Real | AttributeType::PositiveReal => {
                    let centers: Vec<f64> = means.iter().map(|m| m[0]).collect();
                    let to_x = |t: f64| match spec {
                        TransformSpec::Real { mu, w } => w * t + mu,
                        TransformSpec::PositiveReal { w } => softplus(t) / w,
                        _ => unreachable!("continuous transform"),
                    };
                    let q = |p: f64| to_x(mixture_quantile(&centers, s, p));
                    let value = Value::Real(q(0.5));
                    CellPrediction {
                        row: n,
                        column: d,
                        value,
                        uncertainty: Uncertainty::Interval {
                            lower: q(0.05),
                            upper: q(0.95),
                        },
                        probabilities: None,
                    }
                }
            };
            completed.columns_mut()[d][n] = Some(prediction.value);
            cells.push(prediction);
        }
    }
    ImputeResult { completed, cells }
}

fn discrete_prediction(n: usize, d: usize, mut probs: Vec<f64>, samples: usize, first: usize) -> CellPrediction {
    probs.iter_mut().for_each(|p| *p /= samples as f64);
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    let mut mode = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[mode] {
            mode = i;
        }
    }
    let entropy = -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
    let value = if first == 0 {
        Value::Count(mode as u64)
    } else {
        Value::Category(mode + 1)
    };
    CellPrediction {
        row: n,
        column: d,
        value,
        uncertainty: Uncertainty::Entropy(entropy),
        probabilities: Some(probs),
    }
}

/// Quantile of an equally weighted Gaussian mixture with common sd, by bisection.
pub(crate) fn mixture_quantile(means: &[f64], s: f64, p: f64) -> f64 {
    let lo0 = means.iter().copied().fold(f64::INFINITY, f64::min) - 10.0 * s;
    let hi0 = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 10.0 * s;
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mixture_cdf(means, s, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_quantile_of_single_component() {
        let q = mixture_quantile(&[1.5], 2.0, 0.5);
        assert!((q - 1.5).abs() < 1e-9);
        let q = mixture_quantile(&[0.0], 1.0, 0.95);
        assert!((q - 1.6448536269514722).abs() < 1e-8);
    }

    #[test]
    fn uniform_discrete_predictive_takes_first_category() {
        let p = discrete_prediction(0, 0, vec![1.0, 1.0, 1.0], 3, 1);
        assert_eq!(p.value, Value::Category(1));
        let Uncertainty::Entropy(h) = p.uncertainty else { panic!() };
        assert!((h - 3f64.ln()).abs() < 1e-12);
    }
}
