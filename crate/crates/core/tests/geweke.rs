//! Joint-distribution (Geweke) check of the full kernel on every data type:
//! forward draws of (Z, B, Y) against successive-conditional simulation
//! that alternates x ~ p(x | Z, B) with one pass of the sampler.

use glfm::data::{Attribute, AttributeType, HeterogeneousDataset, Hyperparameters, LatentMatrix};
use glfm::ibp::sample_ibp;
use glfm::math::sample_std_normal;
use glfm::simulate::{draw_weights, emit};
use glfm::{SamplerState, TransformSpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 10;
const CHANNELS: usize = 7;

fn attributes() -> Vec<Attribute> {
    vec![
        Attribute::new("real", AttributeType::Real),
        Attribute::new("posreal", AttributeType::PositiveReal),
        Attribute::new("cat", AttributeType::categorical_n(3)),
        Attribute::new("ord", AttributeType::ordinal_n(3)),
        Attribute::new("count", AttributeType::Count),
    ]
}

fn specs() -> Vec<TransformSpec> {
    vec![
        TransformSpec::Real { mu: 0.5, w: 2.0 },
        TransformSpec::PositiveReal { w: 1.0 },
        TransformSpec::Categorical { r: 3 },
        TransformSpec::Ordinal { thresholds: vec![0.0, 1.0] },
        TransformSpec::Count { w: 0.5 },
    ]
}

/// Continuous cells carry the auxiliary noise u; discrete cells are the
/// deterministic image of y, as in the sampler's augmentation.
fn emit_data(specs: &[TransformSpec], y: &DMatrix<f64>, sigma_u: f64, rng: &mut ChaCha8Rng) -> HeterogeneousDataset {
    let channels = [0..1, 1..2, 2..5, 5..6, 6..7];
    let columns = specs
        .iter()
        .zip(channels)
        .map(|(spec, range)| {
            (0..N)
                .map(|i| {
                    let yc: Vec<f64> = range.clone().map(|c| y[(i, c)]).collect();
                    let u: Vec<f64> = match spec {
                        TransformSpec::Real { .. } | TransformSpec::PositiveReal { .. } => {
                            vec![sigma_u * sample_std_normal(rng)]
                        }
                        _ => vec![0.0; yc.len()],
                    };
                    Some(emit(spec, &yc, &u))
                })
                .collect()
        })
        .collect();
    HeterogeneousDataset::new(attributes(), columns).unwrap()
}

fn stats(k: usize, y: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let mut s = vec![k as f64, b.iter().map(|w| w * w).sum::<f64>() / b.len() as f64];
    s.extend((0..CHANNELS).map(|c| y.column(c).mean()));
    s
}

fn batch_mean_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (var / batches as f64).sqrt())
}

#[test]
fn mixed_type_kernel_preserves_the_joint_distribution() {
    let specs = specs();
    let hyper = Hyperparameters {
        alpha: 1.0,
        sample_alpha: false,
        sigma_b2: 1.0,
        sigma_u2: 0.25,
        seed: 21,
        ..Hyperparameters::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 200_000;
    let forward = |rng: &mut ChaCha8Rng| {
        let z = LatentMatrix::from_features(N, sample_ibp(N, hyper.alpha, rng).features);
        let b = draw_weights(z.width(), &specs, hyper.sigma_b2, rng);
        let zd = DMatrix::from_fn(N, z.width(), |i, k| z.get(i, k) as f64);
        let y = zd * &b + DMatrix::from_fn(N, CHANNELS, |_, _| sample_std_normal(rng));
        (z, b, y)
    };

    let mut fwd: Vec<Vec<f64>> = (0..2 + CHANNELS).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        let (z, b, y) = forward(&mut rng);
        for (acc, s) in fwd.iter_mut().zip(stats(z.k(), &y, &b)) {
            acc.push(s);
        }
    }

    let (z, b, y) = forward(&mut rng);
    let mut state = SamplerState::from_parts(&hyper, specs.clone(), z, y, Some(b)).unwrap();
    let mut chain: Vec<Vec<f64>> = (0..2 + CHANNELS).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        let fresh = state.pseudo_means() + DMatrix::from_fn(N, CHANNELS, |_, _| sample_std_normal(&mut rng));
        let data = emit_data(&specs, &fresh, hyper.sigma_u2.sqrt(), &mut rng);
        // the categorical update is a single-site pass, valid only from a
        // state whose argmax already matches the data
        state.set_pseudo(fresh);
        state.resample_pseudo(&data);
        state.sweep_z();
        state.resample_weights();
        for (acc, s) in chain.iter_mut().zip(stats(state.k(), state.pseudo(), state.weights())) {
            acc.push(s);
        }
    }

    for (i, (f, c)) in fwd.iter().zip(&chain).enumerate() {
        let (mf, sf) = batch_mean_se(f, 100);
        let (mc, sc) = batch_mean_se(c, 100);
        let z = (mf - mc) / (sf * sf + sc * sc).sqrt();
        // nine statistics, so a slightly wider band than a single 3σ check
        assert!(z.abs() < 3.5, "statistic {i}: forward {mf:.4} ± {sf:.4}, chain {mc:.4} ± {sc:.4}");
    }
}
