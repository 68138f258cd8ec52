//! Count sketches and tensor sketches.
//!
//! Two flavours of tensor sketch are provided:
//!
//! * [`AsymTensorSketchSet`]: independent hashes `h_1, h_2, h_3` and
//!   Rademacher signs per mode; entry `(i, j, k)` lands in bucket
//!   `(h_1(i) + h_2(j) + h_3(k)) mod b`. Sketches of rank-1 tensors are
//!   circular convolutions of count sketches.
//! * [`SymTensorSketchSet`]: one shared 6-wise hash and complex fourth-root
//!   signs, so all permutations of a triple collide in the same bucket.
//!
//! Each set holds `B` independent replicates; estimators take the median of
//! the real parts across replicates.

mod asym;
mod count;
pub mod fft;
mod io;
mod sym;

pub use asym::{AsymReplicate, AsymTensorSketchSet};
pub use count::{sketch_vector, CountSketch};
pub use fft::{circular_convolve, Dft};
pub use io::{read_sketch, read_sketch_file, write_sketch, write_sketch_file, SketchFile};
pub use sym::{SymReplicate, SymTensorSketchSet, SYMMETRY_TOL};

use num_complex::Complex64;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `i^e` for `e` in `0..4`.
pub(crate) const I_POW: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// Stream id for hash `slot` of replicate `replicate`.
pub(crate) fn sketch_stream(replicate: usize, slot: u64) -> u64 {
    (crate::rng::STREAM_SKETCH << 32) | ((replicate as u64) << 4) | slot
}

/// Adds `v * i^e` to `z`.
#[inline]
pub(crate) fn add_rotated(z: &mut Complex64, v: f64, e: usize) {
    match e & 3 {
        0 => z.re += v,
        1 => z.im += v,
        2 => z.re -= v,
        _ => z.im -= v,
    }
}
