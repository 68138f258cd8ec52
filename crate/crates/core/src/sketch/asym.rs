use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::{check_sketch_len, Dft};
use super::{sketch_stream, ZERO};
use crate::error::{Error, Result};
use crate::hashing::{PolyHash, SignGenerator, SignMode};
use crate::rng::derive_seed;
use crate::stats::median_in_place;
use crate::tensor::{DenseTensor3, FactoredTensor};

/// One asymmetric tensor sketch: per-mode 2-wise hashes, Rademacher signs,
/// and the length-`b` sketch data.
#[derive(Debug, Clone)]
pub struct AsymReplicate {
    hashes: [PolyHash; 3],
    signs: [SignGenerator; 3],
    buckets: [Vec<u32>; 3],
    sign_tab: [Vec<f64>; 3],
    pub(crate) data: Vec<Complex64>,
}

impl AsymReplicate {
    pub(crate) fn from_parts(
        n: usize,
        b: usize,
        hashes: [PolyHash; 3],
        signs: [SignGenerator; 3],
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != b {
            return Err(Error::dim(b, data.len()));
        }
        for h in &hashes {
            if h.buckets() != b {
                return Err(Error::dim(b, h.buckets()));
            }
        }
        if signs.iter().any(|s| s.mode() != SignMode::Rademacher) {
            return Err(Error::ModeMismatch(
                "asymmetric sketches use Rademacher signs".into(),
            ));
        }
        let buckets = [hashes[0].table(n), hashes[1].table(n), hashes[2].table(n)];
        let sign_tab = [0, 1, 2].map(|s| (0..n).map(|i| signs[s].eval_real(i)).collect());
        Ok(AsymReplicate {
            hashes,
            signs,
            buckets,
            sign_tab,
            data,
        })
    }

    pub fn hashes(&self) -> &[PolyHash; 3] {
        &self.hashes
    }

    pub fn signs(&self) -> &[SignGenerator; 3] {
        &self.signs
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut Vec<Complex64> {
        &mut self.data
    }

    #[inline]
    pub fn bucket(&self, slot: usize, i: usize) -> usize {
        self.buckets[slot][i] as usize
    }

    #[inline]
    pub fn sign(&self, slot: usize, i: usize) -> f64 {
        self.sign_tab[slot][i]
    }

    /// `H(i, j, k) = (h_1(i) + h_2(j) + h_3(k)) mod b`.
    #[inline]
    pub fn bucket_of(&self, i: usize, j: usize, k: usize) -> usize {
        (self.bucket(0, i) + self.bucket(1, j) + self.bucket(2, k)) & (self.data.len() - 1)
    }

    /// Count sketch `s_{slot, u}` of `u` under this replicate's hash and sign
    /// for mode `slot`.
    pub fn count_sketch(&self, slot: usize, u: &[f64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.data.len()];
        for (i, &x) in u.iter().enumerate() {
            out[self.buckets[slot][i] as usize].re += self.sign_tab[slot][i] * x;
        }
        out
    }

    /// Per-replicate entry estimate `xi_1(i) xi_2(j) xi_3(k) s(H(i, j, k))`.
    pub fn entry_estimate(&self, i: usize, j: usize, k: usize) -> f64 {
        let s = self.sign(0, i) * self.sign(1, j) * self.sign(2, k);
        s * self.data[self.bucket_of(i, j, k)].re
    }

    fn accumulate_dense(&mut self, t: &DenseTensor3) {
        let n = t.dim();
        let mask = self.data.len() - 1;
        let mut acc = vec![0.0f64; self.data.len()];
        for i in 0..n {
            let slab = t.slab(i);
            let (hi, si) = (self.buckets[0][i] as usize, self.sign_tab[0][i]);
            for j in 0..n {
                let hij = hi + self.buckets[1][j] as usize;
                let sij = si * self.sign_tab[1][j];
                let row = &slab[j * n..(j + 1) * n];
                for k in 0..n {
                    acc[(hij + self.buckets[2][k] as usize) & mask] += sij * self.sign_tab[2][k] * row[k];
                }
            }
        }
        for (d, a) in self.data.iter_mut().zip(acc) {
            d.re += a;
        }
    }

    /// Forward DFT of `s_{1,u} * s_{2,v} * s_{3,w}` (not inverted).
    pub(crate) fn rank1_spectrum(&self, dft: &Dft, u: &[f64], v: &[f64], w: &[f64]) -> Vec<Complex64> {
        let mut fu = self.count_sketch(0, u);
        let mut fv = self.count_sketch(1, v);
        let mut fw = self.count_sketch(2, w);
        dft.forward(&mut fu);
        dft.forward(&mut fv);
        dft.forward(&mut fw);
        for ((a, b), c) in fu.iter_mut().zip(&fv).zip(&fw) {
            *a = *a * b * c;
        }
        fu
    }
}

/// `B` independent asymmetric tensor sketches of an `n x n x n` tensor.
#[derive(Debug, Clone)]
pub struct AsymTensorSketchSet {
    n: usize,
    b: usize,
    master_seed: u64,
    replicates: Vec<AsymReplicate>,
    dft: Arc<Dft>,
}

impl AsymTensorSketchSet {
    /// Draws `replicates` independent hash/sign families; the data starts at
    /// zero.
    pub fn new(n: usize, b: usize, replicates: usize, master_seed: u64) -> Result<Self> {
        check_sketch_len(b)?;
        if n == 0 || replicates == 0 {
            return Err(Error::param("n and B must be positive"));
        }
        let reps = (0..replicates)
            .map(|m| {
                let hashes = [0u64, 1, 2].map(|s| {
                    PolyHash::new(2, b, derive_seed(master_seed, sketch_stream(m, s)))
                });
                let signs = [0u64, 1, 2].map(|s| {
                    SignGenerator::new(
                        SignMode::Rademacher,
                        derive_seed(master_seed, sketch_stream(m, 3 + s)),
                    )
                });
                let [h0, h1, h2] = hashes;
                let [s0, s1, s2] = signs;
                AsymReplicate::from_parts(n, b, [h0?, h1?, h2?], [s0?, s1?, s2?], vec![ZERO; b])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_replicates(n, b, master_seed, reps)
    }

    pub(crate) fn from_replicates(
        n: usize,
        b: usize,
        master_seed: u64,
        replicates: Vec<AsymReplicate>,
    ) -> Result<Self> {
        Ok(AsymTensorSketchSet {
            n,
            b,
            master_seed,
            replicates,
            dft: Dft::shared(b)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.b
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_replicates(&self) -> usize {
        self.replicates.len()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replicates(&self) -> &[AsymReplicate] {
        &self.replicates
    }

    pub(crate) fn replicates_mut(&mut self) -> &mut [AsymReplicate] {
        &mut self.replicates
    }

    pub fn replicate(&self, m: usize) -> &AsymReplicate {
        &self.replicates[m]
    }

    pub fn dft(&self) -> &Arc<Dft> {
        &self.dft
    }

    pub fn clear(&mut self) {
        for r in &mut self.replicates {
            r.data.iter_mut().for_each(|z| *z = ZERO);
        }
    }

    /// Root-sum-square of all replicate data, for diagnostics.
    pub fn data_norm(&self) -> f64 {
        self.replicates
            .iter()
            .flat_map(|r| r.data.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn check_vec(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::dim(self.n, u.len()));
        }
        Ok(())
    }

    /// Adds the sketch of a dense tensor by direct `O(n^3)` accumulation.
    pub fn sketch_dense(&mut self, t: &DenseTensor3) -> Result<()> {
        if t.dim() != self.n {
            return Err(Error::dim(self.n, t.dim()));
        }
        self.replicates
            .par_iter_mut()
            .for_each(|r| r.accumulate_dense(t));
        Ok(())
    }

    /// Sketch of `u (x) v (x) w` under replicate `m`, computed as
    /// `F^-1(F(s_{1,u}) . F(s_{2,v}) . F(s_{3,w}))`.
    pub fn sketch_rank1(&self, m: usize, u: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<Complex64>> {
        for x in [u, v, w] {
            self.check_vec(x)?;
        }
        let mut s = self.replicates[m].rank1_spectrum(&self.dft, u, v, w);
        self.dft.inverse(&mut s);
        Ok(s)
    }

    /// Adds the sketch of a factored tensor, `sum_i a_i` times the rank-1
    /// sketches. Spectra are summed per replicate and inverted once.
    pub fn sketch_factored(&mut self, f: &FactoredTensor) -> Result<()> {
        if f.dim() != self.n {
            return Err(Error::dim(self.n, f.dim()));
        }
        let dft = self.dft.clone();
        self.replicates.par_iter_mut().for_each(|r| {
            let mut acc = vec![ZERO; r.data.len()];
            for c in f.components() {
                let spec = r.rank1_spectrum(&dft, &c.u, &c.v, &c.w);
                for (a, s) in acc.iter_mut().zip(spec) {
                    *a += s * c.weight;
                }
            }
            dft.inverse(&mut acc);
            // the sketch of a real tensor is real; drop rounding residue
            for (d, a) in r.data.iter_mut().zip(acc) {
                d.re += a.re;
            }
        });
        Ok(())
    }

    /// `data += alpha * sketch(u (x) v (x) w)` in every replicate.
    pub fn add_rank1(&mut self, alpha: f64, u: &[f64], v: &[f64], w: &[f64]) -> Result<()> {
        for x in [u, v, w] {
            self.check_vec(x)?;
        }
        let dft = self.dft.clone();
        self.replicates.par_iter_mut().for_each(|r| {
            let mut s = r.rank1_spectrum(&dft, u, v, w);
            dft.inverse(&mut s);
            for (d, x) in r.data.iter_mut().zip(s) {
                d.re += x.re * alpha;
            }
        });
        Ok(())
    }

    /// Median over replicates of the per-replicate entry estimates.
    pub fn recover_entry(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        for x in [i, j, k] {
            if x >= self.n {
                return Err(Error::param(format!("index {x} out of range")));
            }
        }
        let mut est: Vec<f64> = self
            .replicates
            .iter()
            .map(|r| r.entry_estimate(i, j, k))
            .collect();
        Ok(median_in_place(&mut est))
    }
}
