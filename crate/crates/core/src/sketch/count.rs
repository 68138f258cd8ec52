use num_complex::Complex64;

use super::ZERO;
use crate::error::{Error, Result};
use crate::hashing::{PolyHash, SignGenerator};

/// Count sketch of a vector: `data[t] = sum_{h(i) = t} sign(i) u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    pub data: Vec<Complex64>,
    /// Hash slot (mode) the sketch was built with, when it belongs to a
    /// tensor sketch replicate.
    pub slot: Option<usize>,
}

impl CountSketch {
    /// Builds from precomputed bucket and sign tables.
    pub fn from_tables(u: &[f64], buckets: &[u32], signs: &[Complex64], b: usize) -> Result<Self> {
        if u.len() > buckets.len() || u.len() > signs.len() {
            return Err(Error::dim(buckets.len(), u.len()));
        }
        let mut data = vec![ZERO; b];
        for ((&x, &h), &s) in u.iter().zip(buckets).zip(signs) {
            data[h as usize] += s * x;
        }
        Ok(CountSketch { data, slot: None })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Count sketch of `u` under hash `h` and signs `s`.
pub fn sketch_vector(u: &[f64], h: &PolyHash, s: &SignGenerator) -> CountSketch {
    let mut data = vec![ZERO; h.buckets()];
    for (i, &x) in u.iter().enumerate() {
        data[h.eval(i)] += s.eval(i) * x;
    }
    CountSketch { data, slot: None }
}
