//! Exact third-order tensor representations and kernels.
//!
//! These are the reference paths: every sketched estimator in the crate is
//! checked against the exact contractions defined here.

mod coo;
mod cp;
mod dense;
mod factored;
pub(crate) mod synth;

pub use coo::{read_coo, read_coo_file, write_coo};
pub use cp::{cp_residual, khatri_rao, CpDecomposition};
pub use dense::{refold_mode1, DenseTensor3, DEFAULT_MEMORY_CAP};
pub use factored::{Component, FactoredTensor};
pub use synth::{random_symmetric, synth_orthogonal_tensor, PlantedTensor};
