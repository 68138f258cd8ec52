//! Count-sketch based CP decomposition of third-order tensors.
//!
//! The crate builds tensor sketches (asymmetric per-mode hashing and the
//! symmetric colliding-hash variant), evaluates tensor contractions directly
//! on the sketches with FFTs, and runs the robust tensor power method and ALS
//! on top of them. Exact dense kernels are kept alongside as reference paths.
//! The [`lda`] module wires everything into a spectral topic-model pipeline.

pub mod bench;
pub mod contraction;
pub mod decompose;
pub mod error;
pub mod hashing;
pub mod lda;
pub mod rng;
pub mod sketch;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
