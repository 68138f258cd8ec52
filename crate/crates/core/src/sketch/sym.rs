use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::{check_sketch_len, Dft};
use super::{add_rotated, sketch_stream, I_POW, ZERO};
use crate::error::{Error, Result};
use crate::hashing::{PolyHash, SignGenerator, SignMode, SIGN_INDEPENDENCE};
use crate::rng::derive_seed;
use crate::stats::median_in_place;
use crate::tensor::{DenseTensor3, FactoredTensor};

/// Tolerance used by [`SymTensorSketchSet::sketch_dense`] when checking the
/// input for symmetry.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Number of distinct permutations of `(i, j, k)`.
#[inline]
pub(crate) fn multiplicity(i: usize, j: usize, k: usize) -> f64 {
    if i == j && j == k {
        1.0
    } else if i == j || j == k || i == k {
        3.0
    } else {
        6.0
    }
}

/// One symmetric tensor sketch: a shared 6-wise hash `h`, complex
/// fourth-root signs `sigma`, and the length-`b` sketch data.
#[derive(Debug, Clone)]
pub struct SymReplicate {
    hash: PolyHash,
    sign: SignGenerator,
    buckets: Vec<u32>,
    exps: Vec<u8>,
    pub(crate) data: Vec<Complex64>,
}

impl SymReplicate {
    pub(crate) fn from_parts(
        n: usize,
        b: usize,
        hash: PolyHash,
        sign: SignGenerator,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != b {
            return Err(Error::dim(b, data.len()));
        }
        if hash.buckets() != b {
            return Err(Error::dim(b, hash.buckets()));
        }
        if sign.mode() != SignMode::Complex4 {
            return Err(Error::ModeMismatch(
                "symmetric sketches use complex fourth-root signs".into(),
            ));
        }
        let buckets = hash.table(n);
        let exps = (0..n).map(|i| sign.exponent(i) as u8).collect();
        Ok(SymReplicate {
            hash,
            sign,
            buckets,
            exps,
            data,
        })
    }

    pub fn hash(&self) -> &PolyHash {
        &self.hash
    }

    pub fn sign_generator(&self) -> &SignGenerator {
        &self.sign
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut Vec<Complex64> {
        &mut self.data
    }

    #[inline]
    fn mask(&self) -> usize {
        self.data.len() - 1
    }

    #[inline]
    pub fn bucket(&self, i: usize) -> usize {
        self.buckets[i] as usize
    }

    /// Exponent `e` with `sigma(i) = i^e`.
    #[inline]
    pub fn exponent(&self, i: usize) -> usize {
        self.exps[i] as usize
    }

    #[inline]
    pub fn sign(&self, i: usize) -> Complex64 {
        I_POW[self.exponent(i)]
    }

    #[inline]
    pub fn bucket_of(&self, i: usize, j: usize, k: usize) -> usize {
        (self.bucket(i) + self.bucket(j) + self.bucket(k)) & self.mask()
    }

    /// `s_u(t) = sum_{h(i) = t} sigma(i) u_i`.
    pub fn count_sketch(&self, u: &[f64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.data.len()];
        for (i, &x) in u.iter().enumerate() {
            add_rotated(&mut out[self.bucket(i)], x, self.exponent(i));
        }
        out
    }

    /// Auxiliary sketches `s_2(t) = sum_{2h(i) = t} sigma(i)^2 u_i^2` and
    /// `s_3(t) = sum_{3h(i) = t} sigma(i)^3 u_i^3`.
    pub fn aux_sketches(&self, u: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mask = self.mask();
        let mut s2 = vec![ZERO; self.data.len()];
        let mut s3 = vec![ZERO; self.data.len()];
        for (i, &x) in u.iter().enumerate() {
            let (h, e) = (self.bucket(i), self.exponent(i));
            add_rotated(&mut s2[(2 * h) & mask], x * x, 2 * e);
            add_rotated(&mut s3[(3 * h) & mask], x * x * x, 3 * e);
        }
        (s2, s3)
    }

    /// `(1/kappa) conj(sigma(i) sigma(j) sigma(k)) s(H(i, j, k))`, real part.
    pub fn entry_estimate(&self, i: usize, j: usize, k: usize) -> f64 {
        let e = self.exponent(i) + self.exponent(j) + self.exponent(k);
        let z = self.data[self.bucket_of(i, j, k)] * I_POW[(4 - (e & 3)) & 3];
        z.re / multiplicity(i, j, k)
    }

    /// Accumulates only `i <= j <= k`, weighting each entry by its number of
    /// permutations. Equal to the full sum when `t` is symmetric.
    fn accumulate_sorted(&mut self, t: &DenseTensor3) {
        let n = t.dim();
        let mask = self.mask();
        let mut acc = vec![ZERO; self.data.len()];
        for i in 0..n {
            let slab = t.slab(i);
            for j in i..n {
                let hij = self.bucket(i) + self.bucket(j);
                let eij = self.exponent(i) + self.exponent(j);
                let row = &slab[j * n..(j + 1) * n];
                for k in j..n {
                    let x = row[k];
                    if x == 0.0 {
                        continue;
                    }
                    let z = &mut acc[(hij + self.bucket(k)) & mask];
                    add_rotated(z, multiplicity(i, j, k) * x, eij + self.exponent(k));
                }
            }
        }
        for (d, a) in self.data.iter_mut().zip(acc) {
            *d += a;
        }
    }

    fn accumulate_full(&mut self, t: &DenseTensor3) {
        let n = t.dim();
        let mask = self.mask();
        let mut acc = vec![ZERO; self.data.len()];
        for i in 0..n {
            let slab = t.slab(i);
            for j in 0..n {
                let hij = self.bucket(i) + self.bucket(j);
                let eij = self.exponent(i) + self.exponent(j);
                let row = &slab[j * n..(j + 1) * n];
                for (k, &x) in row.iter().enumerate() {
                    let z = &mut acc[(hij + self.bucket(k)) & mask];
                    add_rotated(z, x, eij + self.exponent(k));
                }
            }
        }
        for (d, a) in self.data.iter_mut().zip(acc) {
            *d += a;
        }
    }

    /// `(F s_u)^3`, the spectrum of the full sketch of `u (x) u (x) u`.
    pub(crate) fn cube_spectrum(&self, dft: &Dft, u: &[f64]) -> Vec<Complex64> {
        let mut f = self.count_sketch(u);
        dft.forward(&mut f);
        f.iter_mut().for_each(|z| *z = *z * *z * *z);
        f
    }
}

/// `B` independent symmetric tensor sketches of an `n x n x n` symmetric
/// tensor.
#[derive(Debug, Clone)]
pub struct SymTensorSketchSet {
    n: usize,
    b: usize,
    master_seed: u64,
    replicates: Vec<SymReplicate>,
    dft: Arc<Dft>,
}

impl SymTensorSketchSet {
    pub fn new(n: usize, b: usize, replicates: usize, master_seed: u64) -> Result<Self> {
        check_sketch_len(b)?;
        if n == 0 || replicates == 0 {
            return Err(Error::param("n and B must be positive"));
        }
        let reps = (0..replicates)
            .map(|m| {
                let hash = PolyHash::new(
                    SIGN_INDEPENDENCE,
                    b,
                    derive_seed(master_seed, sketch_stream(m, 0)),
                )?;
                let sign = SignGenerator::new(
                    SignMode::Complex4,
                    derive_seed(master_seed, sketch_stream(m, 1)),
                )?;
                SymReplicate::from_parts(n, b, hash, sign, vec![ZERO; b])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_replicates(n, b, master_seed, reps)
    }

    pub(crate) fn from_replicates(
        n: usize,
        b: usize,
        master_seed: u64,
        replicates: Vec<SymReplicate>,
    ) -> Result<Self> {
        Ok(SymTensorSketchSet {
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

    pub fn replicates(&self) -> &[SymReplicate] {
        &self.replicates
    }

    pub(crate) fn replicates_mut(&mut self) -> &mut [SymReplicate] {
        &mut self.replicates
    }

    pub fn replicate(&self, m: usize) -> &SymReplicate {
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

    /// Adds the sketch of a symmetric tensor, visiting only `i <= j <= k`.
    /// Fails with [`Error::NotSymmetric`] if any permutation differs by more
    /// than [`SYMMETRY_TOL`].
    pub fn sketch_dense(&mut self, t: &DenseTensor3) -> Result<()> {
        self.sketch_dense_with_tol(t, SYMMETRY_TOL)
    }

    pub fn sketch_dense_with_tol(&mut self, t: &DenseTensor3, tol: f64) -> Result<()> {
        if t.dim() != self.n {
            return Err(Error::dim(self.n, t.dim()));
        }
        t.check_symmetric(tol)?;
        self.replicates
            .par_iter_mut()
            .for_each(|r| r.accumulate_sorted(t));
        Ok(())
    }

    /// Like [`Self::sketch_dense`] but skips the symmetry check; only the
    /// entries with `i <= j <= k` are read.
    pub(crate) fn sketch_dense_sorted_unchecked(&mut self, t: &DenseTensor3) -> Result<()> {
        if t.dim() != self.n {
            return Err(Error::dim(self.n, t.dim()));
        }
        self.replicates
            .par_iter_mut()
            .for_each(|r| r.accumulate_sorted(t));
        Ok(())
    }

    /// Adds the defining sum over all `n^3` entries, without any symmetry
    /// check.
    pub fn sketch_dense_unchecked(&mut self, t: &DenseTensor3) -> Result<()> {
        if t.dim() != self.n {
            return Err(Error::dim(self.n, t.dim()));
        }
        self.replicates
            .par_iter_mut()
            .for_each(|r| r.accumulate_full(t));
        Ok(())
    }

    /// Adds the sketch of a symmetric factored tensor `sum_r a_r u_r^(x)3`.
    pub fn sketch_factored(&mut self, f: &FactoredTensor) -> Result<()> {
        if f.dim() != self.n {
            return Err(Error::dim(self.n, f.dim()));
        }
        if !f.is_symmetric() {
            return Err(Error::ModeMismatch(
                "symmetric sketch needs components of the form u (x) u (x) u".into(),
            ));
        }
        let dft = self.dft.clone();
        self.replicates.par_iter_mut().for_each(|r| {
            let mut acc = vec![ZERO; r.data.len()];
            for c in f.components() {
                for (a, s) in acc.iter_mut().zip(r.cube_spectrum(&dft, &c.u)) {
                    *a += s * c.weight;
                }
            }
            dft.inverse(&mut acc);
            for (d, a) in r.data.iter_mut().zip(acc) {
                *d += a;
            }
        });
        Ok(())
    }

    /// Full sketch of `u (x) u (x) u` under replicate `m`: `F^-1((F s_u)^3)`.
    pub fn sketch_rank1(&self, m: usize, u: &[f64]) -> Result<Vec<Complex64>> {
        self.check_vec(u)?;
        let mut s = self.replicates[m].cube_spectrum(&self.dft, u);
        self.dft.inverse(&mut s);
        Ok(s)
    }

    /// Sketch of the upper-triangular part of `u (x) u (x) u` (entries with
    /// `i <= j <= k` kept, the rest zeroed):
    /// `s_u^{*3} / 6 + s_{2,u} * s_u / 2 + s_{3,u} / 3`.
    pub fn sketch_rank1_truncated(&self, m: usize, u: &[f64]) -> Result<Vec<Complex64>> {
        self.check_vec(u)?;
        let r = &self.replicates[m];
        let (mut s2, mut s3) = r.aux_sketches(u);
        let mut fu = r.count_sketch(u);
        self.dft.forward(&mut fu);
        self.dft.forward(&mut s2);
        self.dft.forward(&mut s3);
        let mut out: Vec<Complex64> = fu
            .iter()
            .zip(&s2)
            .zip(&s3)
            .map(|((a, b), c)| a * a * a / 6.0 + b * a / 2.0 + c / 3.0)
            .collect();
        self.dft.inverse(&mut out);
        Ok(out)
    }

    /// `data += alpha * sketch(u (x) u (x) u)` in every replicate.
    pub fn add_scaled_rank1(&mut self, alpha: f64, u: &[f64]) -> Result<()> {
        self.check_vec(u)?;
        let dft = self.dft.clone();
        self.replicates.par_iter_mut().for_each(|r| {
            let mut s = r.cube_spectrum(&dft, u);
            dft.inverse(&mut s);
            for (d, x) in r.data.iter_mut().zip(s) {
                *d += x * alpha;
            }
        });
        Ok(())
    }

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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::tensor::random_symmetric;
    use rand::Rng;

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// Defining sum evaluated straight from the hash and sign generators.
    fn direct(r: &SymReplicate, t: &DenseTensor3, upper_only: bool) -> Vec<Complex64> {
        let n = t.dim();
        let b = r.data().len();
        let h = r.hash();
        let s = r.sign_generator();
        let mut out = vec![ZERO; b];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if upper_only && !(i <= j && j <= k) {
                        continue;
                    }
                    let t_ = (h.eval(i) + h.eval(j) + h.eval(k)) % b;
                    out[t_] += s.eval(i) * s.eval(j) * s.eval(k) * t.get(i, j, k);
                }
            }
        }
        out
    }

    #[test]
    fn multiplicities() {
        assert_eq!(multiplicity(2, 2, 2), 1.0);
        assert_eq!(multiplicity(1, 2, 2), 3.0);
        assert_eq!(multiplicity(2, 1, 2), 3.0);
        assert_eq!(multiplicity(0, 1, 2), 6.0);
    }

    #[test]
    fn sorted_build_matches_full_sum() {
        let mut rng = rng_from_seed(3);
        let t = random_symmetric(6, &mut rng);
        let mut a = SymTensorSketchSet::new(6, 32, 3, 11).unwrap();
        a.sketch_dense(&t).unwrap();
        let mut b = SymTensorSketchSet::new(6, 32, 3, 11).unwrap();
        b.sketch_dense_unchecked(&t).unwrap();
        for m in 0..3 {
            assert!(max_diff(a.replicate(m).data(), b.replicate(m).data()) < 1e-12);
            assert!(max_diff(a.replicate(m).data(), &direct(a.replicate(m), &t, false)) < 1e-12);
        }
    }

    #[test]
    fn permuted_entries_collide() {
        let set = SymTensorSketchSet::new(7, 64, 4, 5).unwrap();
        for r in set.replicates() {
            for &(i, j, k) in &[(0, 3, 5), (1, 1, 6), (2, 4, 4)] {
                let t = r.bucket_of(i, j, k);
                assert_eq!(r.bucket_of(k, i, j), t);
                assert_eq!(r.bucket_of(j, k, i), t);
                assert_eq!(r.bucket_of(i, k, j), t);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut t = DenseTensor3::zeros(3);
        t.set(0, 1, 2, 1.0);
        let mut set = SymTensorSketchSet::new(3, 16, 2, 0).unwrap();
        assert!(matches!(set.sketch_dense(&t), Err(Error::NotSymmetric { .. })));
        assert_eq!(set.data_norm(), 0.0);
        set.sketch_dense_unchecked(&t).unwrap();
        assert!(set.data_norm() > 0.0);
    }

    #[test]
    fn single_symmetric_entry_recovers_exactly() {
        let mut t = DenseTensor3::zeros(4);
        for (i, j, k) in crate::tensor::synth::permutations(0, 1, 3) {
            t.set(i, j, k, 2.5);
        }
        let mut set = SymTensorSketchSet::new(4, 16, 5, 9).unwrap();
        set.sketch_dense(&t).unwrap();
        for r in set.replicates() {
            assert!((r.entry_estimate(3, 0, 1) - 2.5).abs() < 1e-12);
        }
        assert!((set.recover_entry(1, 3, 0).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rank1_full_matches_dense() {
        let mut rng = rng_from_seed(7);
        let n = 6;
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = DenseTensor3::symmetric_rank1_sum(&[1.0], std::slice::from_ref(&u));
        let mut set = SymTensorSketchSet::new(n, 16, 3, 4).unwrap();
        set.sketch_dense_unchecked(&t).unwrap();
        for m in 0..3 {
            let fast = set.sketch_rank1(m, &u).unwrap();
            assert!(max_diff(&fast, set.replicate(m).data()) < 1e-10);
        }
    }

    #[test]
    fn truncated_rank1_matches_upper_triangle() {
        let mut rng = rng_from_seed(8);
        let n = 7;
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = DenseTensor3::symmetric_rank1_sum(&[1.0], std::slice::from_ref(&u));
        let set = SymTensorSketchSet::new(n, 32, 3, 12).unwrap();
        for m in 0..3 {
            let fast = set.sketch_rank1_truncated(m, &u).unwrap();
            let slow = direct(set.replicate(m), &t, true);
            assert!(max_diff(&fast, &slow) < 1e-10);
        }
    }

    #[test]
    fn factored_and_deflation_agree_with_dense() {
        let mut rng = rng_from_seed(9);
        let n = 6;
        let us: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let w = [1.5, -0.5, 2.0];
        let mut f = FactoredTensor::new(n);
        for (a, u) in w.iter().zip(&us) {
            f.push_symmetric(*a, u.clone()).unwrap();
        }
        let mut s1 = SymTensorSketchSet::new(n, 32, 2, 1).unwrap();
        s1.sketch_factored(&f).unwrap();
        let mut s2 = SymTensorSketchSet::new(n, 32, 2, 1).unwrap();
        s2.sketch_dense(&DenseTensor3::symmetric_rank1_sum(&w, &us)).unwrap();
        for m in 0..2 {
            assert!(max_diff(s1.replicate(m).data(), s2.replicate(m).data()) < 1e-9);
        }
        for (a, u) in w.iter().zip(&us) {
            s2.add_scaled_rank1(-a, u).unwrap();
        }
        assert!(s2.data_norm() < 1e-9);

        let mut bad = FactoredTensor::new(n);
        bad.push(1.0, us[0].clone(), us[1].clone(), us[2].clone()).unwrap();
        assert!(matches!(s1.sketch_factored(&bad), Err(Error::ModeMismatch(_))));
    }

    #[test]
    fn entry_estimates_are_unbiased() {
        // mean over many independent sketches approaches the true entry
        let mut rng = rng_from_seed(10);
        let n = 5;
        let t = random_symmetric(n, &mut rng);
        let mut set = SymTensorSketchSet::new(n, 8, 4000, 77).unwrap();
        set.sketch_dense(&t).unwrap();
        let mut worst = 0.0f64;
        for &(i, j, k) in &[(0, 0, 0), (0, 1, 1), (1, 2, 4), (3, 3, 4)] {
            let est: Vec<f64> = set.replicates().iter().map(|r| r.entry_estimate(i, j, k)).collect();
            let mean = crate::stats::mean(&est);
            let se = (crate::stats::variance(&est) / est.len() as f64).sqrt();
            worst = worst.max((mean - t.get(i, j, k)).abs() / se);
        }
        assert!(worst < 4.5, "worst z {worst}");
    }
}
