//! Indian Buffet Process prior: forward draws, the exchangeable inclusion
//! conditional and the expected number of features.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::math::harmonic;

/// A draw from the IBP. `features` holds the K non-bias columns in arrival
/// order; none of them is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct IbpDraw {
    pub n_rows: usize,
    pub features: Vec<Vec<u8>>,
    pub alpha: f64,
}

impl IbpDraw {
    pub fn k(&self) -> usize {
        self.features.len()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        self.features
            .iter()
            .map(|c| c.iter().map(|&b| b as usize).sum())
            .collect()
    }
}

/// Sequential (culinary) construction: customer n takes each existing dish k
/// with probability m_k/n and then Poisson(α/n) new dishes.
pub fn sample_ibp<R: Rng + ?Sized>(n_rows: usize, alpha: f64, rng: &mut R) -> IbpDraw {
    assert!(n_rows >= 1, "IBP needs at least one row");
    let mut features: Vec<Vec<u8>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for n in 0..n_rows {
        let customers = (n + 1) as f64;
        for (col, m) in features.iter_mut().zip(counts.iter_mut()) {
            if rng.gen::<f64>() < *m as f64 / customers {
                col[n] = 1;
                *m += 1;
            }
        }
        let rate = alpha / customers;
        let new = if rate > 0.0 {
            Poisson::new(rate).map(|p| p.sample(rng) as usize).unwrap_or(0)
        } else {
            0
        };
        for _ in 0..new {
            let mut col = vec![0u8; n_rows];
            col[n] = 1;
            features.push(col);
            counts.push(1);
        }
    }
    IbpDraw {
        n_rows,
        features,
        alpha,
    }
}

/// P(z_nk = 1 | other rows) = m_{−n,k} / N.
pub fn inclusion_prob(m_minus: usize, n_rows: usize) -> f64 {
    debug_assert!(m_minus < n_rows);
    m_minus as f64 / n_rows as f64
}

/// E[K] = α·H_N
pub fn expected_features(n_rows: usize, alpha: f64) -> f64 {
    alpha * harmonic(n_rows)
}
