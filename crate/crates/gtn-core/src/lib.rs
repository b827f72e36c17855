//! Generative tensor networks as matrix product states.
//!
//! The crate trains Born-machine MPS models on tabular and image data,
//! evaluates negative log-likelihoods in log-stabilized arithmetic, and fits
//! the scaling of NLL against feature count, bond dimension, and sample
//! count.
//!
//! Module map:
//!
//! - [`mps`]: MPS representation, canonical form, overlaps, superpositions,
//!   transfer spectra, probability-normalization audits.
//! - [`qfm`]: quantum feature maps (plain and multi-spin), binarization, and
//!   image cropping.
//! - [`train`]: NLL, gradients, sweep training, and the class-conditional
//!   classifier.
//! - [`fit`]: scaling-law regressions and train/test divergence reports.
//! - [`data`]: IDX and CSV ingestion, logistic-map trajectories, and
//!   deterministic subsampling.

pub mod data;
pub mod error;
pub mod fit;
pub mod logamp;
pub mod mps;
pub mod qfm;
mod serial;
pub mod tensor;
pub mod train;

pub use error::{GtnError, Result};
pub use logamp::LogAmplitude;
pub use mps::{transfer_dominant_eig, Mps, ProductState, ISOMETRY_TOL};
pub use tensor::SiteTensor;
