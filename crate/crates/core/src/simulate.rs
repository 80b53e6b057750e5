//! Forward simulation from the generative model: Z from the IBP plus a bias
//! column, B ~ N(0, σ_B²), Y ~ N(ZB, 1) and x = f(y + u) with u ~ N(0, σ_u²).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Attribute, AttributeType, HeterogeneousDataset, Hyperparameters, LatentMatrix, Value};
use crate::error::Result;
use crate::ibp::sample_ibp;
use crate::math::sample_std_normal;
use crate::sampler::ChannelLayout;
use crate::transforms::{forward_categorical, TransformSpec};

/// Parameters and latent variables behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Rows of Z, bias bit first.
    pub z: Vec<Vec<u8>>,
    /// Weight vector (length 1+K) per pseudo-observation channel.
    pub b: Vec<Vec<f64>>,
    pub specs: Vec<TransformSpec>,
    pub alpha: f64,
}

impl GroundTruth {
    pub fn latent(&self) -> LatentMatrix {
        LatentMatrix::from_rows(&self.z).expect("ground truth rows are rectangular")
    }

    /// (1+K) × C weight matrix.
    pub fn weights(&self) -> DMatrix<f64> {
        let width = self.z.first().map_or(1, Vec::len);
        DMatrix::from_fn(width, self.b.len(), |k, c| self.b[c][k])
    }
}

/// Transforms used for simulation when none are given: unit scales, a count
/// scale of 1/4 so counts spread over a few tens of values, and unit-spaced
/// ordinal thresholds.
pub fn default_specs(attributes: &[Attribute]) -> Vec<TransformSpec> {
    attributes
        .iter()
        .map(|a| match &a.kind {
            AttributeType::Real => TransformSpec::Real { mu: 0.0, w: 1.0 },
            AttributeType::PositiveReal => TransformSpec::PositiveReal { w: 1.0 },
            AttributeType::Count => TransformSpec::Count { w: 0.25 },
            AttributeType::Ordinal { labels } => TransformSpec::Ordinal {
                thresholds: (0..labels.len() - 1).map(|i| i as f64).collect(),
            },
            AttributeType::Categorical { labels } => TransformSpec::Categorical { r: labels.len() },
        })
        .collect()
}

/// x = f(y + u) for one attribute; `y` and `u` have one entry per channel.
pub fn emit(spec: &TransformSpec, y: &[f64], u: &[f64]) -> Value {
    let shifted: Vec<f64> = y.iter().zip(u).map(|(y, u)| y + u).collect();
    match spec {
        TransformSpec::Categorical { .. } => Value::Category(forward_categorical(&shifted)),
        TransformSpec::PositiveReal { .. } => match spec.forward(shifted[0]).expect("single channel") {
            // softplus underflows to 0 far in the left tail
            Value::Real(x) => Value::Real(x.max(f64::MIN_POSITIVE)),
            v => v,
        },
        _ => spec.forward(shifted[0]).expect("single channel"),
    }
}

/// B ~ N(0, σ_B²) with the pinned categorical channels set to zero.
pub fn draw_weights<R: Rng + ?Sized>(
    width: usize,
    specs: &[TransformSpec],
    sigma_b2: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let layout = ChannelLayout::new(specs);
    let sd = sigma_b2.sqrt();
    let mut b = DMatrix::zeros(width, layout.total());
    for c in 0..layout.total() {
        if layout.is_pinned(c) {
            continue;
        }
        for k in 0..width {
            b[(k, c)] = sd * sample_std_normal(rng);
        }
    }
    b
}

/// A simulated dataset with the pseudo-observations behind it.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: HeterogeneousDataset,
    pub y: DMatrix<f64>,
}

/// Y ~ N(ZB, 1), then x = f(y + u) cell by cell.
pub fn simulate_from<R: Rng + ?Sized>(
    attributes: Vec<Attribute>,
    specs: &[TransformSpec],
    z: &LatentMatrix,
    b: &DMatrix<f64>,
    sigma_u2: f64,
    rng: &mut R,
) -> Result<Simulated> {
    let layout = ChannelLayout::new(specs);
    let n = z.n_rows();
    let zd = DMatrix::from_fn(n, z.width(), |i, k| z.get(i, k) as f64);
    let mut y = zd * b;
    y.iter_mut().for_each(|v| *v += sample_std_normal(rng));
    let noise = Normal::new(0.0, sigma_u2.sqrt()).expect("finite noise sd");
    let mut columns = Vec::with_capacity(specs.len());
    for (d, spec) in specs.iter().enumerate() {
        let range = layout.range(d);
        let column = (0..n)
            .map(|i| {
                let yc: Vec<f64> = range.clone().map(|c| y[(i, c)]).collect();
                let u: Vec<f64> = yc.iter().map(|_| noise.sample(rng)).collect();
                Some(emit(spec, &yc, &u))
            })
            .collect();
        columns.push(column);
    }
    Ok(Simulated {
        data: HeterogeneousDataset::new(attributes, columns)?,
        y,
    })
}

/// Full forward draw with Z ~ IBP(α) and the default transforms.
pub fn simulate<R: Rng + ?Sized>(
    n: usize,
    attributes: Vec<Attribute>,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<(HeterogeneousDataset, GroundTruth)> {
    let specs = default_specs(&attributes);
    let draw = sample_ibp(n, hyper.alpha, rng);
    let z = LatentMatrix::from_features(n, draw.features);
    let b = draw_weights(z.width(), &specs, hyper.sigma_b2, rng);
    let sim = simulate_from(attributes, &specs, &z, &b, hyper.sigma_u2, rng)?;
    let truth = GroundTruth {
        z: z.rows(),
        b: (0..b.ncols()).map(|c| b.column(c).iter().copied().collect()).collect(),
        specs,
        alpha: hyper.alpha,
    };
    Ok((sim.data, truth))
}
