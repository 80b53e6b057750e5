//! General latent feature modeling of heterogeneous tabular data.
//!
//! Each attribute of an object is explained by a binary latent feature vector
//! z_n (with an always-on bias feature) through a Gaussian pseudo-observation
//! y ~ N(z_n·B_d, 1) and a type-specific map x = f_d(y + u). The number of
//! features is unbounded a priori (Indian Buffet Process prior) and inferred
//! by a semi-collapsed Gibbs sampler whose sweeps cost time linear in the
//! number of objects and attributes.
//!
//! Modules:
//! - [`data`]: dataset, attribute types, latent matrix, hyperparameters
//! - [`transforms`]: the per-type maps f_d, inverse images and likelihoods
//! - [`ibp`]: IBP prior utilities
//! - [`sampler`]: the Gibbs sampler, fit results and imputation
//! - [`explore`]: per-pattern effect reports against the empirical baseline
//! - [`simulate`]: forward simulation from the generative model
//! - [`io`]: CSV/schema loading, fit artifacts, report files

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod explore;
pub mod ibp;
pub mod io;
pub mod math;
pub mod sampler;
pub mod simulate;
pub mod transforms;

pub use data::{Attribute, AttributeType, HeterogeneousDataset, Hyperparameters, LatentMatrix, Value};
pub use error::{GlfmError, Result};
pub use sampler::{run, FitResult, SamplerState};
pub use transforms::TransformSpec;
