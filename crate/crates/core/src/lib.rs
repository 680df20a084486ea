//! Robust dictionary learning.
//!
//! Two learners share one alternating-minimization loop:
//!
//! * **ℓ1-K-SVD** codes every example with iteratively reweighted least
//!   squares on an ℓ1 data term, prunes the codes, then refits each atom and
//!   its coefficient row jointly with a rank-1 ℓ1 factorization.
//! * **K-SVD** codes with orthogonal matching pursuit and refits each atom
//!   with the leading singular pair of its restricted residual.
//!
//! Around the learners sit the synthetic dictionary-recovery benchmark
//! ([`synth`], [`metrics`]) and the patch-based grayscale denoiser
//! ([`denoise`], [`image`]).

pub mod denoise;
pub mod dict_update;
mod error;
pub mod image;
pub mod learner;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod sparse_coding;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use rng::RngSeed;
pub use types::{normalize_columns, CoefficientMatrix, DiagonalWeights, Dictionary, Support, TrainingSet};
