//! Semi-collapsed Gibbs sampler.
//!
//! One iteration runs, in order:
//!
//! 1. pseudo-observation resampling given (Z, B, x),
//! 2. a sweep over Z with the weights integrated out, including the
//!    new-feature move for every row,
//! 3. weight resampling from the Gaussian posterior,
//! 4. ordinal threshold resampling,
//! 5. optionally, resampling of the IBP mass α.
//!
//! Every attribute shares unit pseudo-noise and the N(0, σ_B²) weight prior,
//! so a single (1+K)×(1+K) matrix M = (ZᵀZ + λI)⁻¹ serves every channel. The
//! Z sweep keeps M and the projections P = ZᵀY current with rank-one updates,
//! which keeps the cost of a sweep linear in both N and D for fixed K.
//!
//! Randomness is counter based: every kernel call draws from ChaCha streams
//! keyed by (seed, step, kernel, attribute), so per-attribute work could be
//! split across threads without changing a single draw.

mod impute;
mod row;

pub use impute::{impute, CellPrediction, ImputeResult, Uncertainty};

use std::ops::Range;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::{Attribute, HeterogeneousDataset, Hyperparameters, LatentMatrix, Value};
use crate::error::{GlfmError, Result};
use crate::math::{
    harmonic, poisson_ln_pmf, sample_std_normal, sample_truncated_normal, std_normal_cdf, PROB_FLOOR,
};
use crate::transforms::TransformSpec;

use row::RowWork;

const STREAM_INIT: u64 = 1;
const STREAM_PSEUDO: u64 = 2;
const STREAM_SWEEP: u64 = 3;
const STREAM_WEIGHTS: u64 = 4;
const STREAM_THRESHOLDS: u64 = 5;
const STREAM_ALPHA: u64 = 6;

/// Where each attribute's pseudo-observation channels live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    offsets: Vec<usize>,
    widths: Vec<usize>,
    pinned: Vec<bool>,
    free: Vec<usize>,
}

impl ChannelLayout {
    /// The first channel of every categorical attribute has its weights
    /// pinned to zero.
    pub fn new(specs: &[TransformSpec]) -> Self {
        let mut offsets = Vec::with_capacity(specs.len());
        let mut widths = Vec::with_capacity(specs.len());
        let mut pinned = Vec::new();
        for spec in specs {
            offsets.push(pinned.len());
            widths.push(spec.channels());
            let categorical = matches!(spec, TransformSpec::Categorical { .. });
            for c in 0..spec.channels() {
                pinned.push(categorical && c == 0);
            }
        }
        let free = (0..pinned.len()).filter(|&c| !pinned[c]).collect();
        ChannelLayout {
            offsets,
            widths,
            pinned,
            free,
        }
    }

    pub fn total(&self) -> usize {
        self.pinned.len()
    }

    pub fn range(&self, d: usize) -> Range<usize> {
        self.offsets[d]..self.offsets[d] + self.widths[d]
    }

    pub fn is_pinned(&self, c: usize) -> bool {
        self.pinned[c]
    }

    /// Channels whose weights are free; these carry the collapsed evidence.
    pub fn free_channels(&self) -> &[usize] {
        &self.free
    }
}

#[derive(Debug, Clone)]
pub struct SamplerState {
    z: LatentMatrix,
    /// N × C pseudo-observations.
    y: DMatrix<f64>,
    /// (1+K) × C weights.
    b: DMatrix<f64>,
    /// (ZᵀZ + λI)⁻¹
    m: DMatrix<f64>,
    /// ZᵀY, (1+K) × C.
    p: DMatrix<f64>,
    /// Column sums of Z.
    counts: Vec<usize>,
    specs: Vec<TransformSpec>,
    layout: ChannelLayout,
    hyper: Hyperparameters,
    alpha: f64,
    step: u64,
}

impl SamplerState {
    /// Validates the data, fits the transforms, draws K_init random features
    /// and starts the pseudo-observations inside their inverse images.
    pub fn init(data: &HeterogeneousDataset, hyper: &Hyperparameters) -> Result<Self> {
        hyper.check()?;
        let violations = data.validate();
        if !violations.is_empty() {
            return Err(GlfmError::Invalid(violations));
        }
        let specs = (0..data.n_attributes())
            .map(|d| {
                let attr = data.attribute(d);
                TransformSpec::fit(data.column(d), &attr.kind)
                    .map_err(|_| GlfmError::EmptyColumn(attr.name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = data.n_objects();
        let mut rng = stream(hyper.seed, 0, STREAM_INIT, 0);
        let features = (0..hyper.k_init)
            .map(|_| (0..n).map(|_| rng.gen_bool(0.5) as u8).collect())
            .collect();
        let z = LatentMatrix::from_features(n, features);
        let y = initial_pseudo(data, &specs)?;
        Self::from_parts(hyper, specs, z, y, None)
    }

    /// Like [`SamplerState::init`] but starting from a given latent matrix.
    pub fn init_with_latent(data: &HeterogeneousDataset, hyper: &Hyperparameters, z: LatentMatrix) -> Result<Self> {
        let mut state = Self::init(data, &Hyperparameters { k_init: 0, ..hyper.clone() })?;
        if z.n_rows() != data.n_objects() {
            return Err(GlfmError::Shape("latent matrix rows differ from the object count".into()));
        }
        let y = state.y.clone();
        let specs = std::mem::take(&mut state.specs);
        state = Self::from_parts(hyper, specs, z, y, None)?;
        Ok(state)
    }

    /// Assembles a state from explicit parts. Without `b`, the weights are
    /// drawn from their posterior given (Z, Y).
    pub fn from_parts(
        hyper: &Hyperparameters,
        specs: Vec<TransformSpec>,
        z: LatentMatrix,
        y: DMatrix<f64>,
        b: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let layout = ChannelLayout::new(&specs);
        if y.nrows() != z.n_rows() || y.ncols() != layout.total() {
            return Err(GlfmError::Shape(format!(
                "pseudo-observations are {}×{}, expected {}×{}",
                y.nrows(),
                y.ncols(),
                z.n_rows(),
                layout.total()
            )));
        }
        if !z.is_well_formed() {
            return Err(GlfmError::Shape("latent matrix is not well formed".into()));
        }
        let width = z.width();
        let mut state = SamplerState {
            counts: (0..width).map(|k| z.column_sum(k)).collect(),
            z,
            b: DMatrix::zeros(width, layout.total()),
            m: DMatrix::zeros(width, width),
            p: DMatrix::zeros(width, layout.total()),
            y,
            specs,
            layout,
            alpha: hyper.alpha,
            hyper: hyper.clone(),
            step: 0,
        };
        state.refresh_gram();
        state.refresh_projections();
        match b {
            Some(b) => {
                if b.shape() != (width, state.layout.total()) {
                    return Err(GlfmError::Shape("weight matrix shape".into()));
                }
                state.b = b;
            }
            None => {
                let seed = state.hyper.seed;
                state.draw_weights(|d| stream(seed, 0, STREAM_INIT, 1 + d as u64));
            }
        }
        Ok(state)
    }

    pub fn z(&self) -> &LatentMatrix {
        &self.z
    }

    pub fn k(&self) -> usize {
        self.z.k()
    }

    pub fn pseudo(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn projections(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn specs(&self) -> &[TransformSpec] {
        &self.specs
    }

    pub fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    /// Replaces the pseudo-observations (projections are refreshed).
    pub fn set_pseudo(&mut self, y: DMatrix<f64>) {
        assert_eq!(y.shape(), self.y.shape());
        self.y = y;
        self.refresh_projections();
    }

    fn rng(&self, kernel: u64, sub: u64) -> ChaCha8Rng {
        stream(self.hyper.seed, self.step, kernel, sub)
    }

    fn lambda(&self) -> f64 {
        self.hyper.lambda()
    }

    fn z_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.z.n_rows(), self.z.width(), |n, k| self.z.get(n, k) as f64)
    }

    /// Z·B, the pseudo-observation means (N × C).
    pub fn pseudo_means(&self) -> DMatrix<f64> {
        self.z_dense() * &self.b
    }

    /// M ← (ZᵀZ + λI)⁻¹ by direct inversion.
    pub fn refresh_gram(&mut self) {
        self.m = gram_inverse(&self.z, self.lambda());
    }

    /// P ← ZᵀY
    pub fn refresh_projections(&mut self) {
        self.p = self.z_dense().transpose() * &self.y;
    }

    /// Sets z_nk with Sherman–Morrison updates of M and P. Does not prune, so
    /// a column may be left empty.
    pub fn set_bit(&mut self, n: usize, k: usize, bit: u8) {
        assert!(k >= 1 && k < self.z.width(), "only non-bias features can be set");
        let old = self.z.get(n, k);
        if old == bit {
            return;
        }
        let yrow = self.y.row(n).into_owned();
        let z_old = DVector::from_iterator(self.z.width(), self.z.row(n).into_iter().map(f64::from));
        let mut z_new = z_old.clone();
        z_new[k] = bit as f64;
        // remove the old row, then add the new one
        let v = &self.m * &z_old;
        let denom = 1.0 - z_old.dot(&v);
        self.m += (&v * v.transpose()) / denom;
        let v = &self.m * &z_new;
        let denom = 1.0 + z_new.dot(&v);
        self.m -= (&v * v.transpose()) / denom;
        let delta = if bit == 1 { 1.0 } else { -1.0 };
        for c in 0..self.y.ncols() {
            self.p[(k, c)] += delta * yrow[c];
        }
        self.z.set(n, k, bit);
        if bit == 1 {
            self.counts[k] += 1;
        } else {
            self.counts[k] -= 1;
        }
    }

    /// log p(Y_free | Z) with the weights integrated out, summed over the
    /// free channels.
    pub fn collapsed_log_evidence(&self) -> f64 {
        let n = self.z.n_rows() as f64;
        let width = self.z.width() as f64;
        let ln_det_m = -Cholesky::new(self.gram()).expect("Gram matrix is SPD").ln_determinant();
        let mut total = 0.0;
        for &c in self.layout.free_channels() {
            let yc = self.y.column(c);
            let pc = self.p.column(c);
            let quad = yc.dot(&yc) - pc.dot(&(&self.m * pc));
            total += -0.5 * n * (2.0 * std::f64::consts::PI).ln() + 0.5 * width * self.lambda().ln()
                + 0.5 * ln_det_m
                - 0.5 * quad;
        }
        total
    }

    fn gram(&self) -> DMatrix<f64> {
        let z = self.z_dense();
        z.transpose() * &z + DMatrix::identity(self.z.width(), self.z.width()) * self.lambda()
    }

    /// log p(Y | Z with z_nk = bit) − log p(Y | Z), with B integrated out.
    /// Costs O(K² + K·C) given M and P; independent of N.
    pub fn collapsed_loglik_delta(&self, n: usize, k: usize, bit: u8) -> f64 {
        assert!(k >= 1, "the bias column is never toggled");
        if self.z.get(n, k) == bit {
            return 0.0;
        }
        let work = RowWork::detached(self, n);
        let current = work.loglik(work.zv, &work.zq);
        let mut zq = Vec::new();
        let zv = work.flipped(k, &mut zq);
        work.loglik(zv, &zq) - current
    }

    /// Resamples every pseudo-observation given (Z, B) and the data.
    pub fn resample_pseudo(&mut self, data: &HeterogeneousDataset) {
        self.step += 1;
        let means = self.pseudo_means();
        let su2 = self.hyper.sigma_u2;
        // y | x for continuous types: prior N(zB, 1), evidence f⁻¹(x) = y + u
        let post_var = 1.0 / (1.0 + 1.0 / su2);
        let post_sd = post_var.sqrt();
        for d in 0..data.n_attributes() {
            let mut rng = self.rng(STREAM_PSEUDO, d as u64);
            let range = self.layout.range(d);
            let spec = &self.specs[d];
            for n in 0..data.n_objects() {
                let Some(x) = data.get(n, d) else {
                    for c in range.clone() {
                        self.y[(n, c)] = means[(n, c)] + sample_std_normal(&mut rng);
                    }
                    continue;
                };
                let c = range.start;
                match spec {
                    TransformSpec::Real { .. } | TransformSpec::PositiveReal { .. } => {
                        let e = spec.inverse_point(x.as_f64()).expect("validated cell");
                        let mean = post_var * (means[(n, c)] + e / su2);
                        self.y[(n, c)] = mean + post_sd * sample_std_normal(&mut rng);
                    }
                    TransformSpec::Count { .. } | TransformSpec::Ordinal { .. } => {
                        let iv = spec.inverse_interval(x).expect("validated cell");
                        self.y[(n, c)] =
                            sample_truncated_normal(&mut rng, means[(n, c)], 1.0, iv.lower, iv.upper);
                    }
                    TransformSpec::Categorical { .. } => {
                        let Value::Category(obs) = x else { unreachable!("validated cell") };
                        let o = c + obs - 1;
                        for j in range.clone() {
                            let (lower, upper) = if j == o {
                                let others = range
                                    .clone()
                                    .filter(|&i| i != o)
                                    .map(|i| self.y[(n, i)])
                                    .fold(f64::NEG_INFINITY, f64::max);
                                (others, f64::INFINITY)
                            } else {
                                (f64::NEG_INFINITY, self.y[(n, o)])
                            };
                            self.y[(n, j)] =
                                sample_truncated_normal(&mut rng, means[(n, j)], 1.0, lower, upper);
                        }
                    }
                }
            }
        }
        self.refresh_projections();
    }

    /// One Gibbs sweep over Z with B integrated out.
    pub fn sweep_z(&mut self) {
        self.sweep(true);
    }

    /// The same sweep with the likelihood replaced by a constant; its
    /// stationary distribution is the IBP prior.
    pub fn sweep_z_prior_only(&mut self) {
        self.sweep(false);
    }

    fn sweep(&mut self, use_likelihood: bool) {
        self.step += 1;
        let mut rng = self.rng(STREAM_SWEEP, 0);
        let mut reshaped = false;
        let prior = self.new_feature_prior();
        for n in 0..self.z.n_rows() {
            let mut work = RowWork::begin(self, n);
            work.update_bits(self, &mut rng, use_likelihood);
            work.drop_singletons(self);
            reshaped |= work.dropped_singletons;
            reshaped |= work.propose_new(self, &prior, &mut rng, use_likelihood);
            work.finish(self);
        }
        self.finish_sweep(reshaped);
    }

    /// New-feature move for a single row: drops the row's singleton
    /// features and draws how many fresh ones it takes.
    pub fn propose_new_features(&mut self, n: usize) {
        self.step += 1;
        let mut rng = self.rng(STREAM_SWEEP, 0);
        let mut work = RowWork::begin(self, n);
        work.drop_singletons(self);
        let mut reshaped = work.dropped_singletons;
        reshaped |= work.propose_new(self, &self.new_feature_prior(), &mut rng, true);
        work.finish(self);
        self.finish_sweep(reshaped);
    }

    /// Normalized probabilities of taking j = 0..=K_new_max new features at
    /// row n, after its singletons are dropped. Leaves the state untouched.
    pub fn new_feature_probs(&self, n: usize) -> Vec<f64> {
        let mut scratch = self.clone();
        let mut work = RowWork::begin(&scratch, n);
        work.drop_singletons(&mut scratch);
        let scores = work.new_feature_scores(&scratch.new_feature_prior(), true);
        let norm = crate::math::log_sum_exp(&scores);
        scores.iter().map(|s| (s - norm).exp()).collect()
    }

    /// log Poisson(j; α/N) for j = 0..=K_new_max.
    fn new_feature_prior(&self) -> Vec<f64> {
        let rate = self.alpha / self.z.n_rows() as f64;
        (0..=self.hyper.k_new_max as u64).map(|j| poisson_ln_pmf(j, rate)).collect()
    }

    fn finish_sweep(&mut self, reshaped: bool) {
        let removed = self.z.prune();
        if !removed.is_empty() {
            for &k in removed.iter().rev() {
                self.b = self.b.clone().remove_row(k);
                self.counts.remove(k);
            }
        }
        self.refresh_gram();
        self.refresh_projections();
        if reshaped || !removed.is_empty() {
            let (seed, step) = (self.hyper.seed, self.step);
            self.draw_weights(|d| stream(seed, step, STREAM_SWEEP, 1 + d as u64));
        }
    }

    /// B_c ~ N(M·P_c, M) for every free channel; pinned channels stay zero.
    pub fn resample_weights(&mut self) {
        self.step += 1;
        let (seed, step) = (self.hyper.seed, self.step);
        self.draw_weights(|d| stream(seed, step, STREAM_WEIGHTS, d as u64));
    }

    fn draw_weights(&mut self, mut rng_for: impl FnMut(usize) -> ChaCha8Rng) {
        let width = self.z.width();
        let chol = Cholesky::new(self.m.clone()).expect("M is SPD");
        let l = chol.l();
        self.b = DMatrix::zeros(width, self.layout.total());
        for d in 0..self.specs.len() {
            let mut rng = rng_for(d);
            for c in self.layout.range(d) {
                if self.layout.is_pinned(c) {
                    continue;
                }
                let eps = DVector::from_fn(width, |_, _| sample_std_normal(&mut rng));
                let mean = &self.m * self.p.column(c);
                self.b.set_column(c, &(mean + &l * eps));
            }
        }
    }

    /// Uniform full conditionals for the free ordinal thresholds of attribute d.
    pub fn resample_thresholds(&mut self, data: &HeterogeneousDataset, d: usize) {
        self.step += 1;
        let TransformSpec::Ordinal { thresholds } = &self.specs[d] else {
            return;
        };
        let levels = thresholds.len() + 1;
        if levels < 3 {
            return;
        }
        let c = self.layout.range(d).start;
        // extreme pseudo values per observed level
        let mut hi = vec![f64::NEG_INFINITY; levels + 1];
        let mut lo = vec![f64::INFINITY; levels + 1];
        for n in 0..data.n_objects() {
            if let Some(Value::Category(r)) = data.get(n, d) {
                let y = self.y[(n, c)];
                hi[r] = hi[r].max(y);
                lo[r] = lo[r].min(y);
            }
        }
        let mut rng = self.rng(STREAM_THRESHOLDS, d as u64);
        let mut theta = thresholds.clone();
        let at = |theta: &[f64], i: usize| {
            if i > theta.len() {
                f64::INFINITY
            } else {
                theta[i - 1]
            }
        };
        for r in 2..levels {
            let below = if hi[r].is_finite() { hi[r] } else { at(&theta, r - 1) };
            let mut above = if lo[r + 1].is_finite() { lo[r + 1] } else { at(&theta, r + 1) };
            if above.is_infinite() {
                above = below + 1.0;
            }
            if above > below {
                let t = below + (above - below) * rng.gen::<f64>();
                if t > below && t < above {
                    theta[r - 1] = t;
                }
            }
        }
        self.specs[d] = TransformSpec::Ordinal { thresholds: theta };
    }

    /// α ~ Gamma(a + K, b + H_N) when enabled.
    pub fn resample_alpha(&mut self) {
        self.step += 1;
        if !self.hyper.sample_alpha {
            return;
        }
        let (a, b) = self.hyper.alpha_prior;
        let shape = a + self.z.k() as f64;
        let rate = b + harmonic(self.z.n_rows());
        let mut rng = self.rng(STREAM_ALPHA, 0);
        self.alpha = Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(&mut rng);
    }

    /// One full iteration of the sampler.
    pub fn iterate(&mut self, data: &HeterogeneousDataset) {
        self.resample_pseudo(data);
        self.sweep_z();
        self.resample_weights();
        for d in 0..self.specs.len() {
            if matches!(&self.specs[d], TransformSpec::Ordinal { thresholds } if thresholds.len() >= 2) {
                self.resample_thresholds(data, d);
            }
        }
        self.resample_alpha();
    }

    /// Plug-in log p(x | Z, B) over the observed cells, with the total
    /// pseudo-noise sd √(1 + σ_u²). Probabilities are floored before the log.
    pub fn plugin_loglik(&self, data: &HeterogeneousDataset) -> f64 {
        let means = self.pseudo_means();
        let s = (1.0 + self.hyper.sigma_u2).sqrt();
        let mut total = 0.0;
        for d in 0..data.n_attributes() {
            let range = self.layout.range(d);
            let spec = &self.specs[d];
            for n in 0..data.n_objects() {
                let Some(x) = data.get(n, d) else { continue };
                let m: Vec<f64> = range.clone().map(|c| means[(n, c)]).collect();
                let lp = spec.observation_logdensity(x, &m, s).expect("validated cell");
                total += if spec.levels().is_some() || matches!(spec, TransformSpec::Count { .. }) {
                    lp.max(PROB_FLOOR.ln())
                } else {
                    lp
                };
            }
        }
        total
    }

    /// Checks the state invariants; returns a description of the first failure.
    pub fn check_invariants(&self, data: &HeterogeneousDataset) -> std::result::Result<(), String> {
        if !self.z.is_well_formed() {
            return Err("latent matrix has an empty column or a broken bias".into());
        }
        let width = self.z.width();
        if self.m.shape() != (width, width) || self.p.nrows() != width || self.b.nrows() != width {
            return Err("M, P or B do not match 1+K".into());
        }
        let ident = &self.m * self.gram();
        let gap = (ident - DMatrix::identity(width, width)).abs().max();
        if gap > 1e-8 {
            return Err(format!("M·(ZᵀZ + λI) deviates from I by {gap:e}"));
        }
        let p = self.z_dense().transpose() * &self.y;
        if p != self.p {
            return Err("P differs from ZᵀY".into());
        }
        for (k, &m) in self.counts.iter().enumerate() {
            if m != self.z.column_sum(k) {
                return Err(format!("cached count of column {k} is stale"));
            }
        }
        for d in 0..data.n_attributes() {
            let range = self.layout.range(d);
            for n in 0..data.n_objects() {
                let Some(x) = data.get(n, d) else { continue };
                match &self.specs[d] {
                    TransformSpec::Count { .. } | TransformSpec::Ordinal { .. } => {
                        let iv = self.specs[d].inverse_interval(x).map_err(|e| e.to_string())?;
                        let y = self.y[(n, range.start)];
                        if !iv.contains_closed(y) {
                            return Err(format!("y[{n},{d}] = {y} outside {iv:?}"));
                        }
                    }
                    TransformSpec::Categorical { .. } => {
                        let ys: Vec<f64> = range.clone().map(|c| self.y[(n, c)]).collect();
                        let Value::Category(obs) = x else { unreachable!() };
                        if crate::transforms::forward_categorical(&ys) != obs {
                            return Err(format!("argmax of y[{n},{d}] is not category {obs}"));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn snapshot(&self, iteration: usize) -> Sample {
        Sample {
            iteration,
            alpha: self.alpha,
            z: self.z.rows(),
            b: (0..self.layout.total()).map(|c| self.b.column(c).iter().copied().collect()).collect(),
            thresholds: self
                .specs
                .iter()
                .map(|s| match s {
                    TransformSpec::Ordinal { thresholds } => thresholds.clone(),
                    _ => Vec::new(),
                })
                .collect(),
        }
    }
}

/// ChaCha stream keyed by (seed, step, kernel, sub).
fn stream(seed: u64, step: u64, kernel: u64, sub: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step.to_le_bytes());
    key[16..24].copy_from_slice(&kernel.to_le_bytes());
    key[24..].copy_from_slice(&sub.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// (ZᵀZ + λI)⁻¹ by Cholesky.
pub fn gram_inverse(z: &LatentMatrix, lambda: f64) -> DMatrix<f64> {
    let width = z.width();
    let zd = DMatrix::from_fn(z.n_rows(), width, |n, k| z.get(n, k) as f64);
    let a = zd.transpose() * &zd + DMatrix::identity(width, width) * lambda;
    Cholesky::new(a).expect("Gram matrix is SPD").inverse()
}

/// Starting pseudo-observations: inverse images for continuous cells,
/// interval midpoints (or a unit step in from a finite bound) for discrete
/// cells, zero for missing cells.
fn initial_pseudo(data: &HeterogeneousDataset, specs: &[TransformSpec]) -> Result<DMatrix<f64>> {
    let layout = ChannelLayout::new(specs);
    let mut y = DMatrix::zeros(data.n_objects(), layout.total());
    for (d, spec) in specs.iter().enumerate() {
        let range = layout.range(d);
        for n in 0..data.n_objects() {
            let Some(x) = data.get(n, d) else { continue };
            match (spec, x) {
                (TransformSpec::Categorical { .. }, Value::Category(obs)) => {
                    for c in range.clone() {
                        y[(n, c)] = if c == range.start + obs - 1 { 0.5 } else { -0.5 };
                    }
                }
                _ => y[(n, range.start)] = spec.inverse_interval(x)?.midpoint_or_offset(),
            }
        }
    }
    Ok(y)
}

/// One retained posterior sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub iteration: usize,
    pub alpha: f64,
    /// Rows of Z, bias bit first.
    pub z: Vec<Vec<u8>>,
    /// Weight vector (length 1+K) per pseudo-observation channel.
    pub b: Vec<Vec<f64>>,
    /// Finite thresholds per attribute; empty for non-ordinal attributes.
    pub thresholds: Vec<Vec<f64>>,
}

impl Sample {
    pub fn k(&self) -> usize {
        self.z.first().map_or(0, |r| r.len() - 1)
    }
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub schema: Vec<Attribute>,
    pub schema_hash: String,
    pub hyper: Hyperparameters,
    /// Transforms at the end of the run (ordinal thresholds from the last
    /// iteration; per-sample thresholds are in each sample).
    pub specs: Vec<TransformSpec>,
    /// Observed (min, max) per attribute, used to lay out report grids.
    pub column_ranges: Vec<(f64, f64)>,
    pub n_objects: usize,
    pub samples: Vec<Sample>,
    pub loglik_trace: Vec<f64>,
    /// K after every iteration.
    pub k_trace: Vec<usize>,
    #[serde(skip)]
    pub sweep_seconds: Vec<f64>,
}

impl FitResult {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn layout(&self) -> ChannelLayout {
        ChannelLayout::new(&self.specs)
    }

    /// Most frequent K over retained samples (ties toward the smaller K).
    pub fn modal_k(&self) -> usize {
        let mut hist = std::collections::BTreeMap::new();
        for s in &self.samples {
            *hist.entry(s.k()).or_insert(0usize) += 1;
        }
        hist.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map_or(0, |(k, _)| *k)
    }

    pub fn mean_loglik_retained(&self) -> f64 {
        let start = self.hyper.burn_in;
        let tail = &self.loglik_trace[start.min(self.loglik_trace.len())..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Runs the sampler for `hyper.n_iterations` sweeps.
pub fn run(data: &HeterogeneousDataset, hyper: &Hyperparameters) -> Result<FitResult> {
    let mut state = SamplerState::init(data, hyper)?;
    let mut samples = Vec::with_capacity(hyper.retained());
    let mut trace = Vec::with_capacity(hyper.n_iterations);
    let mut ks = Vec::with_capacity(hyper.n_iterations);
    let mut times = Vec::with_capacity(hyper.n_iterations);
    for it in 1..=hyper.n_iterations {
        let start = Instant::now();
        state.iterate(data);
        times.push(start.elapsed().as_secs_f64());
        trace.push(state.plugin_loglik(data));
        ks.push(state.k());
        if it > hyper.burn_in && (it - hyper.burn_in).is_multiple_of(hyper.thinning) {
            samples.push(state.snapshot(it));
        }
    }
    let column_ranges = (0..data.n_attributes())
        .map(|d| data.column_summary(d).map(|s| (s.min, s.max)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FitResult {
        schema: data.attributes().to_vec(),
        schema_hash: crate::io::schema_hash(data.attributes()),
        hyper: hyper.clone(),
        specs: state.specs.clone(),
        column_ranges,
        n_objects: data.n_objects(),
        samples,
        loglik_trace: trace,
        k_trace: ks,
        sweep_seconds: times,
    })
}

/// P(X ≤ x) under a pseudo-space Gaussian mixture, used for continuous
/// predictive quantiles.
pub(crate) fn mixture_cdf(means: &[f64], s: f64, y: f64) -> f64 {
    means.iter().map(|m| std_normal_cdf((y - m) / s)).sum::<f64>() / means.len() as f64
}
