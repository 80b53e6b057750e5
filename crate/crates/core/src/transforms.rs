//! Per-attribute maps between the real line (pseudo-observation space) and
//! each attribute's observation space.
//!
//! | type        | forward map x = f(y)                 | parameters            |
//! |-------------|--------------------------------------|-----------------------|
//! | real        | w·y + μ                              | μ = mean, w = std     |
//! | posreal     | log(1 + eʸ) / w                      | w = 2 / max(x)        |
//! | count       | ⌊log(1 + eʸ) / w⌋                    | w = 2 / max(x)        |
//! | ordinal     | r such that θ_{r−1} < y ≤ θ_r        | θ_1 = 0 < θ_2 < …     |
//! | categorical | argmax over R channels               | R                     |
//!
//! With w = 2/max(x) the inverse image of the largest observation is
//! log(e² − 1) ≈ 1.85, so pseudo-observations stay O(1).

use serde::{Deserialize, Serialize};

use crate::data::{AttributeType, Value};
use crate::error::{GlfmError, Result};
use crate::math::{
    gauss_hermite, normal_ln_pdf, softplus, softplus_inv, std_normal_cdf, std_normal_interval,
    std_normal_quantile,
};

/// Upper-tail mass below which the count support is truncated.
pub const COUNT_TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TransformSpec {
    Real {
        mu: f64,
        w: f64,
    },
    #[serde(rename = "posreal")]
    PositiveReal {
        w: f64,
    },
    Count {
        w: f64,
    },
    /// `thresholds` holds the finite cut points θ_1..θ_{R−1}; θ_1 = 0.
    #[serde(rename = "ord")]
    Ordinal {
        thresholds: Vec<f64>,
    },
    #[serde(rename = "cat")]
    Categorical {
        r: usize,
    },
}

/// {y : f(y) = x}. A zero-width interval marks the continuous types, whose
/// inverse image is a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PseudoInterval {
    pub fn point(y: f64) -> Self {
        PseudoInterval { lower: y, upper: y }
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    /// Membership using the half-open convention of the owning type: counts
    /// are [lower, upper), ordinal levels (lower, upper].
    pub fn contains_closed(&self, y: f64) -> bool {
        y >= self.lower && y <= self.upper
    }

    pub fn midpoint_or_offset(&self) -> f64 {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) => 0.5 * (self.lower + self.upper),
            (true, false) => self.lower + 1.0,
            (false, true) => self.upper - 1.0,
            (false, false) => 0.0,
        }
    }
}

fn domain(what: &'static str, value: f64) -> GlfmError {
    GlfmError::Domain { what, value }
}

impl TransformSpec {
    /// Initial parameters from the observed cells of a column.
    pub fn fit(column: &[Option<Value>], kind: &AttributeType) -> Result<Self> {
        let xs: Vec<f64> = column.iter().flatten().map(Value::as_f64).collect();
        if xs.is_empty() {
            return Err(GlfmError::EmptyColumn(kind.tag().into()));
        }
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let positive_scale = if max > 0.0 { 2.0 / max } else { 1.0 };
        Ok(match kind {
            AttributeType::Real => {
                let n = xs.len() as f64;
                let mu = xs.iter().sum::<f64>() / n;
                let var = if xs.len() > 1 {
                    xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                let w = if var > 0.0 { var.sqrt() } else { 1.0 };
                TransformSpec::Real { mu, w }
            }
            AttributeType::PositiveReal => TransformSpec::PositiveReal { w: positive_scale },
            AttributeType::Count => TransformSpec::Count { w: positive_scale },
            AttributeType::Ordinal { labels } => TransformSpec::Ordinal {
                thresholds: (0..labels.len() - 1).map(|i| i as f64).collect(),
            },
            AttributeType::Categorical { labels } => TransformSpec::Categorical { r: labels.len() },
        })
    }

    /// Number of pseudo-observation channels.
    pub fn channels(&self) -> usize {
        match self {
            TransformSpec::Categorical { r } => *r,
            _ => 1,
        }
    }

    /// Category or level count for the finite discrete types.
    pub fn levels(&self) -> Option<usize> {
        match self {
            TransformSpec::Categorical { r } => Some(*r),
            TransformSpec::Ordinal { thresholds } => Some(thresholds.len() + 1),
            _ => None,
        }
    }

    /// θ_i for i in 0..=R with θ_0 = −∞ and θ_R = +∞.
    pub fn threshold(&self, i: usize) -> f64 {
        match self {
            TransformSpec::Ordinal { thresholds } => {
                if i == 0 {
                    f64::NEG_INFINITY
                } else if i > thresholds.len() {
                    f64::INFINITY
                } else {
                    thresholds[i - 1]
                }
            }
            _ => panic!("threshold() on a non-ordinal transform"),
        }
    }

    /// x = f(y) for the single-channel types.
    pub fn forward(&self, y: f64) -> Result<Value> {
        Ok(match self {
            TransformSpec::Real { mu, w } => Value::Real(w * y + mu),
            TransformSpec::PositiveReal { w } => Value::Real(softplus(y) / w),
            TransformSpec::Count { w } => Value::Count((softplus(y) / w).floor() as u64),
            TransformSpec::Ordinal { thresholds } => {
                Value::Category(1 + thresholds.iter().take_while(|&&t| y > t).count())
            }
            TransformSpec::Categorical { .. } => {
                return Err(GlfmError::Shape(
                    "categorical forward needs the full channel vector".into(),
                ))
            }
        })
    }

    /// f⁻¹ for the continuous types.
    pub fn inverse_point(&self, x: f64) -> Result<f64> {
        match self {
            TransformSpec::Real { mu, w } => Ok((x - mu) / w),
            TransformSpec::PositiveReal { w } => {
                if !(x > 0.0) {
                    return Err(domain("positive real", x));
                }
                Ok(softplus_inv(w * x))
            }
            _ => Err(GlfmError::Shape("inverse_point on a discrete transform".into())),
        }
    }

    /// The set of pseudo-observations mapping to `x`.
    pub fn inverse_interval(&self, x: Value) -> Result<PseudoInterval> {
        match (self, x) {
            (TransformSpec::Real { .. }, Value::Real(v)) => {
                Ok(PseudoInterval::point(self.inverse_point(v)?))
            }
            (TransformSpec::PositiveReal { .. }, Value::Real(v)) => {
                Ok(PseudoInterval::point(self.inverse_point(v)?))
            }
            (TransformSpec::Count { w }, Value::Count(v)) => Ok(PseudoInterval {
                lower: count_boundary(*w, v),
                upper: count_boundary(*w, v + 1),
            }),
            (TransformSpec::Ordinal { thresholds }, Value::Category(r)) => {
                if r < 1 || r > thresholds.len() + 1 {
                    return Err(domain("ordinal level", r as f64));
                }
                Ok(PseudoInterval {
                    lower: self.threshold(r - 1),
                    upper: self.threshold(r),
                })
            }
            (TransformSpec::Categorical { .. }, _) => Err(GlfmError::Shape(
                "categorical values have no single-channel inverse".into(),
            )),
            (_, v) => Err(GlfmError::Shape(format!("{v:?} does not match transform {self:?}"))),
        }
    }

    /// log p(x | pseudo mean m, total sd s): a density for the continuous
    /// types and a probability for the discrete ones. `mean` has one entry
    /// per channel. Impossible observations give −∞, never NaN.
    pub fn observation_logdensity(&self, x: Value, mean: &[f64], s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(domain("total standard deviation", s));
        }
        if mean.len() != self.channels() {
            return Err(GlfmError::Shape(format!(
                "{} channel means for a {}-channel transform",
                mean.len(),
                self.channels()
            )));
        }
        let m = mean[0];
        Ok(match (self, x) {
            (TransformSpec::Real { mu, w }, Value::Real(v)) => normal_ln_pdf((v - mu) / w, m, s) - w.ln(),
            (TransformSpec::PositiveReal { w }, Value::Real(v)) => {
                if !(v > 0.0) {
                    return Ok(f64::NEG_INFINITY);
                }
                let t = w * v;
                let y = softplus_inv(t);
                // d/dx log(e^{wx} − 1) = w·e^{wx}/(e^{wx} − 1)
                normal_ln_pdf(y, m, s) + w.ln() + t - y
            }
            (TransformSpec::Count { .. } | TransformSpec::Ordinal { .. }, _) => {
                let iv = self.inverse_interval(x)?;
                std_normal_interval((iv.lower - m) / s, (iv.upper - m) / s).ln()
            }
            (TransformSpec::Categorical { r }, Value::Category(c)) => {
                if c < 1 || c > *r {
                    return Err(domain("category", c as f64));
                }
                categorical_prob(mean, s, c - 1).ln()
            }
            (_, v) => return Err(GlfmError::Shape(format!("{v:?} does not match transform {self:?}"))),
        })
    }

    /// Smallest count v with P(X > v) < [`COUNT_TAIL_MASS`] under pseudo mean m, sd s.
    pub fn count_support_max(&self, m: f64, s: f64) -> u64 {
        let TransformSpec::Count { w } = self else {
            panic!("count_support_max on a non-count transform");
        };
        let z = -std_normal_quantile(COUNT_TAIL_MASS);
        let mut v = ((softplus(m + z * s) / w) - 1.0).ceil().max(0.0) as u64;
        // settle rounding in either direction
        let tail = |v: u64| std_normal_interval((count_boundary(*w, v + 1) - m) / s, f64::INFINITY);
        while v > 0 && tail(v - 1) < COUNT_TAIL_MASS {
            v -= 1;
        }
        while tail(v) >= COUNT_TAIL_MASS {
            v += 1;
        }
        v
    }

    /// P(X ≤ x) for the count and ordinal types.
    pub fn cdf(&self, x: Value, m: f64, s: f64) -> Result<f64> {
        let iv = self.inverse_interval(x)?;
        Ok(std_normal_cdf((iv.upper - m) / s))
    }
}

/// f⁻¹(v) = log(e^{w·v} − 1) for the count map, with f⁻¹(0) = −∞.
pub fn count_boundary(w: f64, v: u64) -> f64 {
    if v == 0 {
        f64::NEG_INFINITY
    } else {
        softplus_inv(w * v as f64)
    }
}

/// Argmax over channels with ties broken toward the lowest index; returns a
/// 1-based category.
pub fn forward_categorical(channels: &[f64]) -> usize {
    let mut best = 0;
    for (i, &y) in channels.iter().enumerate() {
        if y > channels[best] {
            best = i;
        }
    }
    best + 1
}

/// P(argmax = r) (0-based r) when channel j ~ N(means[j], s²) independently:
/// ∫ φ(t) ∏_{j≠r} Φ(t + (m_r − m_j)/s) dt by Gauss–Hermite quadrature.
pub fn categorical_prob(means: &[f64], s: f64, r: usize) -> f64 {
    let (nodes, weights) = gauss_hermite();
    let mr = means[r];
    let mut total = 0.0;
    for (x, wt) in nodes.iter().zip(weights) {
        let t = std::f64::consts::SQRT_2 * x;
        let mut prod = 1.0;
        for (j, &mj) in means.iter().enumerate() {
            if j != r {
                prod *= std_normal_cdf(t + (mr - mj) / s);
            }
        }
        total += wt * prod;
    }
    (total / std::f64::consts::PI.sqrt()).clamp(0.0, 1.0)
}

/// All R categorical probabilities.
pub fn categorical_probs(means: &[f64], s: f64) -> Vec<f64> {
    (0..means.len()).map(|r| categorical_prob(means, s, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ord3() -> TransformSpec {
        TransformSpec::Ordinal {
            thresholds: vec![0.0, 1.0],
        }
    }

    fn col(xs: &[f64]) -> Vec<Option<Value>> {
        xs.iter().map(|&x| Some(Value::Real(x))).collect()
    }

    #[test]
    fn fit_rules() {
        let spec = TransformSpec::fit(&col(&[1.0, 3.0]), &AttributeType::Real).unwrap();
        let TransformSpec::Real { mu, w } = spec else { panic!() };
        assert_eq!(mu, 2.0);
        assert!((w - 2f64.sqrt()).abs() < 1e-15);

        let counts: Vec<Option<Value>> = [0u64, 3, 10, 7].iter().map(|&v| Some(Value::Count(v))).collect();
        let spec = TransformSpec::fit(&counts, &AttributeType::Count).unwrap();
        assert_eq!(spec, TransformSpec::Count { w: 0.2 });
        // the largest count maps to a moderate pseudo value, log(e² − 1)
        let top = spec.inverse_interval(Value::Count(10)).unwrap().lower;
        assert!((top - (2f64.exp() - 1.0).ln()).abs() < 1e-12);

        let spec = TransformSpec::fit(&[Some(Value::Category(2))], &AttributeType::ordinal_n(3)).unwrap();
        assert_eq!(spec, ord3());
        assert_eq!(spec.threshold(0), f64::NEG_INFINITY);
        assert_eq!(spec.threshold(3), f64::INFINITY);

        let spec = TransformSpec::fit(&col(&[4.0]), &AttributeType::Real).unwrap();
        assert_eq!(spec, TransformSpec::Real { mu: 4.0, w: 1.0 });
        assert!(TransformSpec::fit(&[None], &AttributeType::Real).is_err());
    }

    #[test]
    fn forward_examples() {
        let pos = TransformSpec::PositiveReal { w: 1.0 };
        let Value::Real(x) = pos.forward(0.0).unwrap() else { panic!() };
        assert!((x - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(ord3().forward(0.5).unwrap(), Value::Category(2));
        assert_eq!(ord3().forward(0.0).unwrap(), Value::Category(1));
        assert_eq!(ord3().forward(7.0).unwrap(), Value::Category(3));
        let real = TransformSpec::Real { mu: 2.0, w: 2f64.sqrt() };
        assert_eq!(real.forward(0.0).unwrap(), Value::Real(2.0));
        assert!(TransformSpec::Categorical { r: 2 }.forward(0.0).is_err());
    }

    #[test]
    fn categorical_forward_argmax_and_ties() {
        assert_eq!(forward_categorical(&[0.1, 0.9, -2.0]), 2);
        assert_eq!(forward_categorical(&[0.5, 0.5]), 1);
    }

    #[test]
    fn inverse_interval_examples() {
        let count = TransformSpec::Count { w: 1.0 };
        let iv = count.inverse_interval(Value::Count(0)).unwrap();
        assert_eq!(iv.lower, f64::NEG_INFINITY);
        assert!((iv.upper - 0.541325).abs() < 1e-6);
        // upper boundary maps back onto the count-1 edge
        assert!((softplus(iv.upper) - 1.0).abs() < 1e-12);

        let iv = ord3().inverse_interval(Value::Category(1)).unwrap();
        assert_eq!((iv.lower, iv.upper), (f64::NEG_INFINITY, 0.0));

        let pos = TransformSpec::PositiveReal { w: 1.0 };
        let iv = pos.inverse_interval(Value::Real(2f64.ln())).unwrap();
        assert!(iv.is_point() && iv.lower.abs() < 1e-12);
        assert!(pos.inverse_interval(Value::Real(-1.0)).is_err());
        assert!(pos.inverse_interval(Value::Real(0.0)).is_err());
    }

    #[test]
    fn logdensity_examples() {
        let ord2 = TransformSpec::Ordinal { thresholds: vec![0.0] };
        let lp = ord2.observation_logdensity(Value::Category(1), &[0.0], 1.0).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-15);

        let cat3 = TransformSpec::Categorical { r: 3 };
        for r in 1..=3 {
            let lp = cat3.observation_logdensity(Value::Category(r), &[0.0; 3], 1.0).unwrap();
            assert!((lp - (1.0f64 / 3.0).ln()).abs() < 1e-9, "{lp}");
        }

        // P(X = 0) = Φ(log(e − 1))
        let count = TransformSpec::Count { w: 1.0 };
        let lp = count.observation_logdensity(Value::Count(0), &[0.0], 1.0).unwrap();
        assert!((lp - 0.705_858_154f64.ln()).abs() < 1e-8);

        assert!(count.observation_logdensity(Value::Count(0), &[0.0], 0.0).is_err());
        let far = count.observation_logdensity(Value::Count(0), &[80.0], 1.0).unwrap();
        assert!(!far.is_nan());
    }

    #[test]
    fn count_support_cut() {
        let count = TransformSpec::Count { w: 0.5 };
        let v = count.count_support_max(0.3, 1.2);
        let tail = |v: u64| std_normal_interval((count_boundary(0.5, v + 1) - 0.3) / 1.2, f64::INFINITY);
        assert!(tail(v) < COUNT_TAIL_MASS);
        assert!(v == 0 || tail(v - 1) >= COUNT_TAIL_MASS);
    }

    #[test]
    fn specs_serialize_with_type_tags() {
        let s = serde_json::to_string(&ord3()).unwrap();
        assert_eq!(s, r#"{"type":"ord","thresholds":[0.0,1.0]}"#);
        let back: TransformSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ord3());
    }
}
