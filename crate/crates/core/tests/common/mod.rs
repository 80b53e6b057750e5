//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::io::Write;

use glfm::simulate::{default_specs, draw_weights, simulate_from};
use glfm::{Attribute, AttributeType, HeterogeneousDataset, LatentMatrix, TransformSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes one acceptance verdict line straight to stderr, bypassing the
/// test harness's output capture.
pub fn verdict(id: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] {id} {status}: {detail}");
}

pub fn mixed_attributes() -> Vec<Attribute> {
    vec![
        Attribute::new("real", AttributeType::Real),
        Attribute::new("posreal", AttributeType::PositiveReal),
        Attribute::new("cat", AttributeType::categorical(["a", "b", "c"])),
        Attribute::new("ord", AttributeType::ordinal(["low", "mid", "high"])),
        Attribute::new("count", AttributeType::Count),
    ]
}

pub struct Synthetic {
    pub data: HeterogeneousDataset,
    pub z: LatentMatrix,
    pub b: DMatrix<f64>,
    pub specs: Vec<TransformSpec>,
}

/// Mixed-type data from a known sparse Z (N × 3, each bit on with
/// probability `density`) and weights B ~ N(0, scale²).
pub fn synthetic(n: usize, k: usize, density: f64, scale: f64, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attributes = mixed_attributes();
    let specs = default_specs(&attributes);
    let features = loop {
        let f: Vec<Vec<u8>> = (0..k)
            .map(|_| (0..n).map(|_| rng.gen_bool(density) as u8).collect())
            .collect();
        if f.iter().all(|c| c.contains(&1)) {
            break f;
        }
    };
    let z = LatentMatrix::from_features(n, features);
    let b = draw_weights(k + 1, &specs, scale * scale, &mut rng);
    let sim = simulate_from(attributes, &specs, &z, &b, 0.01, &mut rng).unwrap();
    Synthetic {
        data: sim.data,
        z,
        b,
        specs,
    }
}

/// Fraction of agreeing entries between two binary matrices (bias column
/// excluded) after the best column matching; the narrower matrix is padded
/// with all-zero columns.
pub fn matched_accuracy(truth: &LatentMatrix, inferred: &LatentMatrix) -> f64 {
    let n = truth.n_rows();
    let kt = truth.k();
    let ki = inferred.k();
    let width = kt.max(ki);
    if width == 0 {
        return 1.0;
    }
    let zero = vec![0u8; n];
    let col = |m: &LatentMatrix, k: usize, limit: usize| -> Vec<u8> {
        if k < limit {
            m.column(k + 1).to_vec()
        } else {
            zero.clone()
        }
    };
    let agree = |a: &[u8], b: &[u8]| a.iter().zip(b).filter(|(x, y)| x == y).count();
    let score: Vec<Vec<usize>> = (0..width)
        .map(|i| (0..width).map(|j| agree(&col(truth, i, kt), &col(inferred, j, ki))).collect())
        .collect();
    let best = best_assignment(&score);
    best as f64 / (n * width) as f64
}

/// Maximum-weight perfect matching by exhaustive search over permutations
/// (widths here are small).
fn best_assignment(score: &[Vec<usize>]) -> usize {
    fn go(score: &[Vec<usize>], row: usize, used: &mut Vec<bool>) -> usize {
        if row == score.len() {
            return 0;
        }
        let mut best = 0;
        for j in 0..score.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(score[row][j] + go(score, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(score, 0, &mut vec![false; score.len()])
}

/// A fit whose retained samples all equal the given (Z, B), so report
/// quantities can be checked against known parameters.
pub fn fixed_fit(
    data: &HeterogeneousDataset,
    specs: &[TransformSpec],
    z: &LatentMatrix,
    b: &DMatrix<f64>,
    sigma_u2: f64,
    copies: usize,
) -> glfm::FitResult {
    let hyper = glfm::Hyperparameters {
        sigma_u2,
        n_iterations: copies,
        burn_in: 0,
        thinning: 1,
        ..glfm::Hyperparameters::default()
    };
    let sample = glfm::sampler::Sample {
        iteration: 1,
        alpha: hyper.alpha,
        z: z.rows(),
        b: (0..b.ncols()).map(|c| b.column(c).iter().copied().collect()).collect(),
        thresholds: specs
            .iter()
            .map(|s| match s {
                TransformSpec::Ordinal { thresholds } => thresholds.clone(),
                _ => Vec::new(),
            })
            .collect(),
    };
    glfm::FitResult {
        schema: data.attributes().to_vec(),
        schema_hash: glfm::io::schema_hash(data.attributes()),
        hyper,
        specs: specs.to_vec(),
        column_ranges: (0..data.n_attributes())
            .map(|d| {
                let s = data.column_summary(d).unwrap();
                (s.min, s.max)
            })
            .collect(),
        n_objects: data.n_objects(),
        samples: vec![sample; copies],
        loglik_trace: vec![0.0; copies],
        k_trace: vec![z.k(); copies],
        sweep_seconds: Vec::new(),
    }
}

/// Trapezoid integral of a density on its grid.
pub fn trapezoid(grid: &[f64], density: &[f64]) -> f64 {
    grid.windows(2)
        .zip(density.windows(2))
        .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
        .sum()
}

pub fn report_schema() -> serde_json::Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/report.schema.json");
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Panics with every validation error if the report does not match the
/// published schema.
pub fn validate_report(path: &std::path::Path) {
    let schema = report_schema();
    let instance: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let result = compiled
        .validate(&instance)
        .map_err(|errors| errors.map(|e| format!("{} at {}", e, e.instance_path)).collect::<Vec<_>>());
    if let Err(messages) = result {
        panic!("report.json does not validate:\n{}", messages.join("\n"));
    }
}
