//! Per-row bookkeeping for the collapsed Z sweep.
//!
//! With row n taken out of the Gram matrix, M₋ and P₋ stay fixed while the
//! row's bits are resampled, so every quantity the collapsed likelihood needs
//! reduces to a few scalars per channel:
//!
//! ```text
//! v = M₋z,  zv = zᵀv,  q_c = M₋P₋_c,  zq_c = zᵀq_c,  base_c = P₋_cᵀq_c
//! log p(Y | z) = const − (C/2)·log(1 + zv)
//!              + ½ Σ_c [base_c + 2y_c·zq_c + y_c²·zv − (zq_c + y_c·zv)² / (1 + zv)]
//! ```
//!
//! Flipping bit k moves v by ±M₋[:,k], so each proposal costs O(K + C).

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use super::SamplerState;
use crate::math::{log_sum_exp, logistic, sample_log_weights};

pub(super) struct RowWork {
    n: usize,
    z: DVector<f64>,
    m: DMatrix<f64>,
    p: DMatrix<f64>,
    /// M₋P₋ over all channels; only the free ones enter the likelihood.
    q: DMatrix<f64>,
    free: Vec<usize>,
    base: Vec<f64>,
    /// y_n over the free channels.
    y: Vec<f64>,
    /// y_n over all channels.
    y_all: Vec<f64>,
    v: DVector<f64>,
    pub zv: f64,
    pub zq: Vec<f64>,
    /// Scratch for the proposed zq, swapped in on acceptance.
    zq_alt: Vec<f64>,
    lambda: f64,
    pub dropped_singletons: bool,
}

impl RowWork {
    /// Takes row n out of M and P.
    pub fn begin(state: &SamplerState, n: usize) -> Self {
        Self::detached(state, n)
    }

    /// Drops the features active only in row n, whose number is then
    /// redrawn by the new-feature move. Must follow the bit updates: those
    /// condition on the row's current singletons.
    pub fn drop_singletons(&mut self, state: &mut SamplerState) {
        let singletons: Vec<usize> = (1..self.z.len())
            .filter(|&k| self.z[k] == 1.0 && state.counts[k] == 1)
            .collect();
        if singletons.is_empty() {
            return;
        }
        // in the row-removed Gram matrix these columns are empty, so their
        // block of M is decoupled and can simply be cut out
        for &k in singletons.iter().rev() {
            self.m = self.m.clone().remove_row(k).remove_column(k);
            self.p = self.p.clone().remove_row(k);
            self.z = self.z.clone().remove_row(k);
            state.z.remove_feature(k);
            state.b = state.b.clone().remove_row(k);
            state.counts.remove(k);
        }
        self.dropped_singletons = true;
        self.prepare();
    }

    /// Row-removed quantities without touching the state.
    pub fn detached(state: &SamplerState, n: usize) -> Self {
        let width = state.z.width();
        let z = DVector::from_iterator(width, state.z.row(n).into_iter().map(f64::from));
        let v = &state.m * &z;
        let denom = 1.0 - z.dot(&v);
        let mut m = state.m.clone();
        m.ger(1.0 / denom, &v, &v, 1.0);
        let y_all: Vec<f64> = state.y.row(n).iter().copied().collect();
        let mut p = state.p.clone();
        for k in 0..width {
            if z[k] != 0.0 {
                for (c, y) in y_all.iter().enumerate() {
                    p[(k, c)] -= y;
                }
            }
        }
        let mut work = RowWork {
            n,
            z,
            m,
            p,
            q: DMatrix::zeros(0, 0),
            free: state.layout.free_channels().to_vec(),
            base: Vec::new(),
            y: Vec::new(),
            y_all,
            v: DVector::zeros(0),
            zv: 0.0,
            zq: Vec::new(),
            zq_alt: Vec::new(),
            lambda: state.lambda(),
            dropped_singletons: false,
        };
        work.prepare();
        work
    }

    fn prepare(&mut self) {
        self.q = &self.m * &self.p;
        let (p, q) = (&self.p, &self.q);
        self.base = self.free.iter().map(|&c| p.column(c).dot(&q.column(c))).collect();
        self.y = self.free.iter().map(|&c| self.y_all[c]).collect();
        self.v = &self.m * &self.z;
        self.zv = self.z.dot(&self.v);
        self.zq = self.free.iter().map(|&c| self.z.dot(&q.column(c))).collect();
    }

    /// Collapsed log-likelihood of the row configuration summarized by
    /// (zv, zq), up to a constant shared by all configurations.
    pub fn loglik(&self, zv: f64, zq: &[f64]) -> f64 {
        let c = self.y.len() as f64;
        let denom = 1.0 + zv;
        let mut quad = 0.0;
        for ((&b, &y), &q) in self.base.iter().zip(&self.y).zip(zq) {
            let cross = q + y * zv;
            quad += b + 2.0 * y * q + y * y * zv - cross * cross / denom;
        }
        -0.5 * c * denom.ln() + 0.5 * quad
    }

    /// zv after flipping bit k; the matching zq is written to `zq`.
    pub fn flipped(&self, k: usize, zq: &mut Vec<f64>) -> f64 {
        let sign = if self.z[k] == 1.0 { -1.0 } else { 1.0 };
        zq.clear();
        zq.extend(self.zq.iter().zip(&self.free).map(|(q, &c)| q + sign * self.q[(k, c)]));
        self.zv + sign * 2.0 * self.v[k] + self.m[(k, k)]
    }

    /// Gibbs update of every non-singleton feature bit of the row, given
    /// the row's singletons.
    ///
    /// The scan order is drawn afresh for each row. New features are always
    /// appended last, so column order carries information about which row
    /// created them; a fixed scan would let that leak into the feature
    /// histories and the chain would settle on too many features.
    pub fn update_bits<R: Rng + ?Sized>(&mut self, state: &mut SamplerState, rng: &mut R, use_likelihood: bool) {
        let n_rows = state.z.n_rows();
        let mut order: Vec<usize> = (1..self.z.len()).collect();
        order.shuffle(rng);
        for k in order {
            let current = self.z[k] as usize;
            let others = state.counts[k] - current;
            if others == 0 {
                continue;
            }
            let prior = (others as f64 / (n_rows - others) as f64).ln();
            let mut zq_alt = std::mem::take(&mut self.zq_alt);
            let zv_alt = self.flipped(k, &mut zq_alt);
            let delta = if use_likelihood {
                let here = self.loglik(self.zv, &self.zq);
                let there = self.loglik(zv_alt, &zq_alt);
                if current == 1 {
                    here - there
                } else {
                    there - here
                }
            } else {
                0.0
            };
            let bit = (rng.gen::<f64>() < logistic(prior + delta)) as usize;
            if bit != current {
                let sign = if bit == 1 { 1.0 } else { -1.0 };
                self.v.axpy(sign, &self.m.column(k), 1.0);
                self.zv = zv_alt;
                std::mem::swap(&mut self.zq, &mut zq_alt);
                self.z[k] = bit as f64;
                state.z.set(self.n, k, bit as u8);
                if bit == 1 {
                    state.counts[k] += 1;
                } else {
                    state.counts[k] -= 1;
                }
            }
            self.zq_alt = zq_alt;
        }
    }

    /// log Poisson(j; α/N) + collapsed log-likelihood for j new features;
    /// `prior` holds the Poisson terms.
    pub fn new_feature_scores(&self, prior: &[f64], use_likelihood: bool) -> Vec<f64> {
        prior
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                if use_likelihood {
                    p + self.loglik(self.zv + j as f64 / self.lambda, &self.zq)
                } else {
                    p
                }
            })
            .collect()
    }

    /// Draws the number of new features for this row and appends them.
    /// Returns whether any were added.
    pub fn propose_new<R: Rng + ?Sized>(
        &mut self,
        state: &mut SamplerState,
        prior: &[f64],
        rng: &mut R,
        use_likelihood: bool,
    ) -> bool {
        let scores = self.new_feature_scores(prior, use_likelihood);
        debug_assert!(log_sum_exp(&scores).is_finite());
        let j = sample_log_weights(&scores, rng);
        if j == 0 {
            return false;
        }
        let width = self.z.len();
        let grown = width + j;
        let mut m = DMatrix::zeros(grown, grown);
        m.view_mut((0, 0), (width, width)).copy_from(&self.m);
        for k in width..grown {
            m[(k, k)] = 1.0 / self.lambda;
        }
        self.m = m;
        self.p = self.p.clone().insert_rows(width, j, 0.0);
        self.z = self.z.clone().insert_rows(width, j, 1.0);
        state.b = state.b.clone().insert_rows(width, j, 0.0);
        for _ in 0..j {
            let mut col = vec![0u8; state.z.n_rows()];
            col[self.n] = 1;
            state.z.push_feature(col);
            state.counts.push(1);
        }
        true
    }

    /// Puts row n back into M and P.
    pub fn finish(self, state: &mut SamplerState) {
        let v = &self.m * &self.z;
        let denom = 1.0 + self.z.dot(&v);
        state.m = self.m;
        state.m.ger(-1.0 / denom, &v, &v, 1.0);
        let mut p = self.p;
        for k in 0..self.z.len() {
            if self.z[k] != 0.0 {
                for (c, y) in self.y_all.iter().enumerate() {
                    p[(k, c)] += y;
                }
            }
        }
        state.p = p;
    }
}
