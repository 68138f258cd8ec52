//! Approximate contractions `T(u, u, u)`, `T(I, u, u)` and `T(I, b, c)`
//! evaluated directly on tensor sketches.
//!
//! Every estimator computes one value per replicate and then takes the
//! median of the real parts (per coordinate for vector outputs). The forward
//! DFT of each replicate's sketch is cached in a [`ContractionWorkspace`], so
//! each call costs a fixed number of length-`b` transforms per replicate plus
//! `O(n)` bookkeeping.
//!
//! Inner products conjugate the second argument. By Parseval,
//! `<x, y> = (1/b) <F x, F y>`.

use std::cell::RefCell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sketch::fft::RealInverse;
use crate::sketch::{AsymReplicate, AsymTensorSketchSet, Dft, SymReplicate, SymTensorSketchSet};
use crate::stats::median_in_place;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Re(i^-e z)`.
#[inline]
fn re_unrotate(z: Complex64, e: usize) -> f64 {
    match e & 3 {
        0 => z.re,
        1 => z.im,
        2 => -z.re,
        _ => -z.im,
    }
}

/// `(-1)^e`, the real value of `sigma^2` when `sigma = i^e`.
#[inline]
fn parity(e: usize) -> f64 {
    if e & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Asym,
    Sym,
}

/// Cached forward DFTs of every replicate's sketch plus a transform counter.
///
/// Asymmetric sketches are real, so only bins `0..=b/2` of their spectra are
/// kept; the rest follow by conjugate symmetry.
///
/// A workspace is tied to the set it was built from. Use the `deflate_*`
/// methods to update set and cache together.
#[derive(Debug)]
pub struct ContractionWorkspace {
    kind: Kind,
    n: usize,
    b: usize,
    spectra: Vec<Vec<Complex64>>,
    dft: Arc<Dft>,
    half: Arc<Dft>,
    real_inverse: RealInverse,
    transforms: AtomicU64,
}

/// Per-thread buffers of length `b`. Contents are stale on entry; callers
/// zero what they accumulate into.
#[derive(Default)]
struct Scratch {
    a: Vec<Complex64>,
    c: Vec<Complex64>,
    d: Vec<Complex64>,
    e: Vec<Complex64>,
}

impl Scratch {
    fn prepare(&mut self, b: usize) {
        for v in [&mut self.a, &mut self.c, &mut self.d, &mut self.e] {
            v.resize(b, ZERO);
        }
    }
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

fn with_scratch<R>(b: usize, f: impl FnOnce(&mut Scratch) -> R) -> R {
    SCRATCH.with(|s| {
        let mut s = s.borrow_mut();
        s.prepare(b);
        f(&mut s)
    })
}

/// Per-coordinate median of `rows` (one row per replicate).
fn median_rows(rows: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut col = vec![0.0; rows.len()];
    (0..n)
        .map(|i| {
            for (c, r) in col.iter_mut().zip(rows) {
                *c = r[i];
            }
            median_in_place(&mut col)
        })
        .collect()
}

/// Splits the spectrum `z` of `x + i y` (both real) into `F x` and `F y`,
/// for bins `0..=b/2`.
fn unpack_real_pair(z: &[Complex64], fx: &mut [Complex64], fy: &mut [Complex64]) {
    let b = z.len();
    for f in 0..=b / 2 {
        let zc = z[(b - f) & (b - 1)].conj();
        fx[f] = (z[f] + zc) * 0.5;
        // (z - zc) / 2i
        let d = (z[f] - zc) * 0.5;
        fy[f] = Complex64::new(d.im, -d.re);
    }
}

impl ContractionWorkspace {
    pub fn for_asym(set: &AsymTensorSketchSet) -> Self {
        let keep = set.len() / 2 + 1;
        let spectra = set
            .replicates()
            .par_iter()
            .map(|r| {
                let mut f = set.dft().forward_of(r.data());
                f.truncate(keep);
                f
            })
            .collect();
        Self::build(Kind::Asym, set.dim(), set.len(), spectra, set.dft().clone())
    }

    pub fn for_sym(set: &SymTensorSketchSet) -> Self {
        let spectra = set
            .replicates()
            .par_iter()
            .map(|r| set.dft().forward_of(r.data()))
            .collect();
        Self::build(Kind::Sym, set.dim(), set.len(), spectra, set.dft().clone())
    }

    fn build(kind: Kind, n: usize, b: usize, spectra: Vec<Vec<Complex64>>, dft: Arc<Dft>) -> Self {
        ContractionWorkspace {
            kind,
            n,
            b,
            spectra,
            dft,
            half: Dft::planned(b / 2),
            real_inverse: RealInverse::new(b),
            transforms: AtomicU64::new(0),
        }
    }

    /// Number of DFT invocations (forward or inverse, full or half length)
    /// made by contraction calls since construction or the last reset.
    pub fn transforms(&self) -> u64 {
        self.transforms.load(Ordering::Relaxed)
    }

    pub fn reset_transforms(&self) {
        self.transforms.store(0, Ordering::Relaxed);
    }

    fn count(&self, k: u64) {
        self.transforms.fetch_add(k, Ordering::Relaxed);
    }

    /// Cached spectrum of replicate `m` (bins `0..=b/2` for asymmetric sets).
    pub fn spectrum(&self, m: usize) -> &[Complex64] {
        &self.spectra[m]
    }

    /// Largest deviation between the cached spectra and fresh transforms of
    /// the current sketch data.
    pub fn cache_error_asym(&self, set: &AsymTensorSketchSet) -> f64 {
        self.cache_error(set.replicates().iter().map(|r| r.data()))
    }

    pub fn cache_error_sym(&self, set: &SymTensorSketchSet) -> f64 {
        self.cache_error(set.replicates().iter().map(|r| r.data()))
    }

    fn cache_error<'a>(&self, data: impl Iterator<Item = &'a [Complex64]>) -> f64 {
        data.zip(&self.spectra)
            .map(|(d, s)| {
                let fresh = self.dft.forward_of(d);
                fresh[..s.len()]
                    .iter()
                    .zip(s)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    fn check(&self, kind: Kind, n: usize, b: usize, reps: usize, vecs: &[&[f64]]) -> Result<()> {
        if kind != self.kind {
            return Err(Error::ModeMismatch(
                "workspace was built for the other sketch flavour".into(),
            ));
        }
        if n != self.n || b != self.b || reps != self.spectra.len() {
            return Err(Error::param("workspace does not match the sketch set"));
        }
        for v in vecs {
            if v.len() != n {
                return Err(Error::dim(n, v.len()));
            }
        }
        Ok(())
    }

    fn check_asym(&self, set: &AsymTensorSketchSet, vecs: &[&[f64]]) -> Result<()> {
        self.check(Kind::Asym, set.dim(), set.len(), set.num_replicates(), vecs)
    }

    fn check_sym(&self, set: &SymTensorSketchSet, vecs: &[&[f64]]) -> Result<()> {
        self.check(Kind::Sym, set.dim(), set.len(), set.num_replicates(), vecs)
    }

    // ---- asymmetric ----

    /// Per-replicate `Re <s_T, s_{u (x) u (x) u}>`.
    pub fn replicate_vvv_asym(&self, set: &AsymTensorSketchSet, m: usize, u: &[f64]) -> Result<f64> {
        self.check_asym(set, &[u])?;
        Ok(self.asym_vvv_one(set.replicate(m), &self.spectra[m], u))
    }

    fn asym_vvv_one(&self, r: &AsymReplicate, spec: &[Complex64], u: &[f64]) -> f64 {
        let b = self.b;
        self.count(2);
        with_scratch(b, |s| {
            s.a.fill(ZERO);
            s.d.fill(ZERO);
            for (i, &x) in u.iter().enumerate() {
                s.a[r.bucket(0, i)].re += r.sign(0, i) * x;
                s.a[r.bucket(1, i)].im += r.sign(1, i) * x;
                s.d[r.bucket(2, i)].re += r.sign(2, i) * x;
            }
            self.dft.forward(&mut s.a);
            self.dft.forward(&mut s.d);
            unpack_real_pair(&s.a, &mut s.c, &mut s.e);
            let half = b / 2;
            let term = |f: usize| (spec[f] * (s.c[f] * s.e[f] * s.d[f]).conj()).re;
            let inner: f64 = (1..half).map(term).sum();
            (term(0) + term(half) + 2.0 * inner) / b as f64
        })
    }

    /// Median estimate of `T(u, u, u)` from an asymmetric sketch set.
    pub fn vvv_asym(&self, set: &AsymTensorSketchSet, u: &[f64]) -> Result<f64> {
        self.check_asym(set, &[u])?;
        let mut est: Vec<f64> = set
            .replicates()
            .par_iter()
            .zip(&self.spectra)
            .map(|(r, spec)| self.asym_vvv_one(r, spec, u))
            .collect();
        Ok(median_in_place(&mut est))
    }

    /// Per-replicate read-off for the contraction leaving `mode` free.
    pub fn replicate_mode_asym(
        &self,
        set: &AsymTensorSketchSet,
        m: usize,
        mode: usize,
        x: &[f64],
        y: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_asym(set, &[x, y])?;
        check_mode(mode)?;
        let mut out = vec![0.0; self.n];
        self.asym_mode_one(set.replicate(m), &self.spectra[m], mode, x, y, &mut out);
        Ok(out)
    }

    /// `s_bar = F^-1(F s_T . conj F s_{p,x} . conj F s_{q,y})`, then
    /// `v_i = xi_mode(i) s_bar[h_mode(i)]` where `p < q` are the two
    /// contracted modes.
    ///
    /// Both count sketches are real, so they share one forward transform
    /// (`x` in the real part, `y` in the imaginary part), and `s_bar` is real,
    /// so the inverse runs at half length.
    fn asym_mode_one(
        &self,
        r: &AsymReplicate,
        spec: &[Complex64],
        mode: usize,
        x: &[f64],
        y: &[f64],
        out: &mut [f64],
    ) {
        let (p, q) = match mode {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let b = self.b;
        let half = b / 2;
        let mask = b - 1;
        self.count(2);
        with_scratch(b, |s| {
            s.a.fill(ZERO);
            for i in 0..self.n {
                s.a[r.bucket(p, i)].re += r.sign(p, i) * x[i];
                s.a[r.bucket(q, i)].im += r.sign(q, i) * y[i];
            }
            self.dft.forward(&mut s.a);
            // F s_x . F s_y = (P[f]^2 - conj(P[-f])^2) / 4i
            let packed = &s.a;
            let g = |f: usize| {
                let pf = packed[f];
                let pm = packed[(b - f) & mask].conj();
                let prod = (pf * pf - pm * pm) * 0.25;
                spec[f] * Complex64::new(prod.im, prod.re)
            };
            // g is Hermitian (every factor is the spectrum of a real
            // sequence), so only bins 0..=b/2 are evaluated, in the pairs
            // (k, b/2 - k) that the fold needs together.
            let ri = &self.real_inverse;
            s.c[0] = ri.fold(0, g(0), g(half));
            for k in 1..=half / 2 {
                let (gk, gm) = (g(k), g(half - k));
                s.c[k] = ri.fold(k, gk, gm.conj());
                s.c[half - k] = ri.fold(half - k, gm, gk.conj());
            }
            self.real_inverse.finish(&mut s.c[..half]);
            for (i, o) in out.iter_mut().enumerate() {
                *o = r.sign(mode, i) * self.real_inverse.sample(&s.c, r.bucket(mode, i));
            }
        })
    }

    /// Median estimate of the contraction leaving `mode` free: `T(I, x, y)`,
    /// `T(x, I, y)` or `T(x, y, I)` for `mode` 0, 1, 2.
    pub fn mode_asym(&self, set: &AsymTensorSketchSet, mode: usize, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_asym(set, &[x, y])?;
        check_mode(mode)?;
        let rows: Vec<Vec<f64>> = set
            .replicates()
            .par_iter()
            .zip(&self.spectra)
            .map(|(r, spec)| {
                let mut out = vec![0.0; self.n];
                self.asym_mode_one(r, spec, mode, x, y, &mut out);
                out
            })
            .collect();
        Ok(median_rows(&rows, self.n))
    }

    pub fn ivv_asym(&self, set: &AsymTensorSketchSet, u: &[f64]) -> Result<Vec<f64>> {
        self.mode_asym(set, 0, u, u)
    }

    pub fn ibc_asym(&self, set: &AsymTensorSketchSet, b: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        self.mode_asym(set, 0, b, c)
    }

    /// `set += alpha * u (x) v (x) w`, keeping the cached spectra in step.
    pub fn deflate_asym(
        &mut self,
        set: &mut AsymTensorSketchSet,
        alpha: f64,
        u: &[f64],
        v: &[f64],
        w: &[f64],
    ) -> Result<()> {
        self.check_asym(set, &[u, v, w])?;
        let dft = self.dft.clone();
        let deltas: Vec<Vec<Complex64>> = set
            .replicates()
            .par_iter()
            .map(|r| r.rank1_spectrum(&dft, u, v, w))
            .collect();
        self.apply_deltas(alpha, deltas, set.replicates_mut().iter_mut().map(|r| r.data_mut()));
        Ok(())
    }

    fn apply_deltas<'a>(
        &mut self,
        alpha: f64,
        deltas: Vec<Vec<Complex64>>,
        data: impl Iterator<Item = &'a mut Vec<Complex64>>,
    ) {
        for ((mut delta, spec), d) in deltas.into_iter().zip(&mut self.spectra).zip(data) {
            delta.iter_mut().for_each(|x| *x *= alpha);
            for (s, x) in spec.iter_mut().zip(&delta) {
                *s += *x;
            }
            self.dft.inverse(&mut delta);
            if self.kind == Kind::Asym {
                for (a, x) in d.iter_mut().zip(delta) {
                    a.re += x.re;
                }
            } else {
                for (a, x) in d.iter_mut().zip(delta) {
                    *a += x;
                }
            }
        }
    }

    // ---- symmetric ----

    /// Per-replicate `Re <s_T, s_X>` with `X` the upper-triangular part of
    /// `u (x) u (x) u`.
    pub fn replicate_vvv_sym(&self, set: &SymTensorSketchSet, m: usize, u: &[f64]) -> Result<f64> {
        self.check_sym(set, &[u])?;
        Ok(self.sym_vvv_one(set.replicate(m), &self.spectra[m], u))
    }

    /// Fills `s.a` with `F s_u` and the first `b/2` entries of `s.c` with the
    /// half-length transform of the auxiliary sketch `s_2` (supported on even
    /// buckets only, so `F s_2[f] = c[f mod b/2]`).
    fn sym_forward(&self, r: &SymReplicate, u: &[f64], s: &mut Scratch) {
        let hmask = self.b / 2 - 1;
        s.a.fill(ZERO);
        s.c[..self.b / 2].fill(ZERO);
        for (i, &x) in u.iter().enumerate() {
            let (h, e) = (r.bucket(i), r.exponent(i));
            crate::sketch::add_rotated(&mut s.a[h], x, e);
            s.c[h & hmask].re += parity(e) * x * x;
        }
        self.dft.forward(&mut s.a);
        self.half.forward(&mut s.c[..self.b / 2]);
    }

    fn sym_vvv_one(&self, r: &SymReplicate, spec: &[Complex64], u: &[f64]) -> f64 {
        let b = self.b;
        let hmask = b / 2 - 1;
        let mask = b - 1;
        self.count(2);
        with_scratch(b, |s| {
            self.sym_forward(r, u, s);
            let mut acc = ZERO;
            for f in 0..b {
                let a = s.a[f];
                let x = a * a * a / 6.0 + s.c[f & hmask] * a * 0.5;
                acc += spec[f] * x.conj();
            }
            let mut third = 0.0;
            let data = r.data();
            for (i, &x) in u.iter().enumerate() {
                let (h, e) = (r.bucket(i), r.exponent(i));
                third += re_unrotate(data[(3 * h) & mask], 3 * e) * x * x * x;
            }
            acc.re / b as f64 + third / 3.0
        })
    }

    /// Median estimate of `T(u, u, u)` from a symmetric sketch set.
    pub fn vvv_sym(&self, set: &SymTensorSketchSet, u: &[f64]) -> Result<f64> {
        self.check_sym(set, &[u])?;
        let mut est: Vec<f64> = set
            .replicates()
            .par_iter()
            .zip(&self.spectra)
            .map(|(r, spec)| self.sym_vvv_one(r, spec, u))
            .collect();
        Ok(median_in_place(&mut est))
    }

    /// Per-replicate estimate of `T(I, u, u)`. Satisfies
    /// `<result, u> = replicate_vvv_sym(u)` up to rounding.
    pub fn replicate_ivv_sym(&self, set: &SymTensorSketchSet, m: usize, u: &[f64]) -> Result<Vec<f64>> {
        self.check_sym(set, &[u])?;
        let mut out = vec![0.0; self.n];
        self.sym_ivv_one(set.replicate(m), &self.spectra[m], u, &mut out);
        Ok(out)
    }

    /// With `Z_i = e_i (x) u (x) u + u (x) e_i (x) u + u (x) u (x) e_i`,
    /// `T(I, u, u)_i = <T, Z_i> / 3` and the truncated `Z_i` sketches to
    ///
    /// ```text
    /// s_u * s_u * s_{e_i} / 2 + s_{2,uu} * s_{e_i} / 2
    ///     + s_{2,e_i u} * s_u + s_{3,e_i uu}
    /// ```
    ///
    /// where every `e_i` sketch has a single nonzero. Two correlations are
    /// shared across `i`: `c12 = corr(s_T, s_u * s_u + s_2)` read at `h(i)`
    /// and `c3 = corr(s_T, s_u)` read at `2h(i)`. The latter only needs its
    /// even entries, which a half-length inverse of the folded spectrum gives.
    fn sym_ivv_one(&self, r: &SymReplicate, spec: &[Complex64], u: &[f64], out: &mut [f64]) {
        let b = self.b;
        let half = b / 2;
        let hmask = half - 1;
        let mask = b - 1;
        self.count(4);
        with_scratch(b, |s| {
            self.sym_forward(r, u, s);
            for f in 0..half {
                let (a0, a1) = (s.a[f], s.a[f + half]);
                let (p0, p1) = (spec[f], spec[f + half]);
                let c2 = s.c[f];
                s.d[f] = p0 * a0.conj() + p1 * a1.conj();
                s.a[f] = p0 * (a0 * a0 + c2).conj();
                s.a[f + half] = p1 * (a1 * a1 + c2).conj();
            }
            self.dft.inverse_unscaled(&mut s.a);
            self.half.inverse_unscaled(&mut s.d[..half]);
            // both inverses carry an overall 1/b
            let scale = 1.0 / b as f64;
            let data = r.data();
            for (i, o) in out.iter_mut().enumerate() {
                let (h, e) = (r.bucket(i), r.exponent(i));
                let x = u[i];
                let t12 = 0.5 * re_unrotate(s.a[h], e) * scale;
                let t3 = parity(e) * x * s.d[h & hmask].re * scale;
                let t4 = re_unrotate(data[(3 * h) & mask], 3 * e) * x * x;
                *o = (t12 + t3 + t4) / 3.0;
            }
        })
    }

    /// Median estimate of `T(I, u, u)` from a symmetric sketch set.
    pub fn ivv_sym(&self, set: &SymTensorSketchSet, u: &[f64]) -> Result<Vec<f64>> {
        self.check_sym(set, &[u])?;
        let rows: Vec<Vec<f64>> = set
            .replicates()
            .par_iter()
            .zip(&self.spectra)
            .map(|(r, spec)| {
                let mut out = vec![0.0; self.n];
                self.sym_ivv_one(r, spec, u, &mut out);
                out
            })
            .collect();
        Ok(median_rows(&rows, self.n))
    }

    /// `set += alpha * u (x) u (x) u` (full symmetric tensor), keeping the
    /// cached spectra in step.
    pub fn deflate_sym(&mut self, set: &mut SymTensorSketchSet, alpha: f64, u: &[f64]) -> Result<()> {
        self.check_sym(set, &[u])?;
        let dft = self.dft.clone();
        let deltas: Vec<Vec<Complex64>> = set
            .replicates()
            .par_iter()
            .map(|r| r.cube_spectrum(&dft, u))
            .collect();
        self.apply_deltas(alpha, deltas, set.replicates_mut().iter_mut().map(|r| r.data_mut()));
        Ok(())
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if mode > 2 {
        return Err(Error::param(format!("mode {mode} out of range")));
    }
    Ok(())
}

/// Median-of-`B` estimate of `T(u, u, u)` from an asymmetric sketch set.
pub fn approx_vvv_asym(set: &AsymTensorSketchSet, u: &[f64]) -> Result<f64> {
    ContractionWorkspace::for_asym(set).vvv_asym(set, u)
}

/// Median-of-`B` estimate of `T(I, u, u)` from an asymmetric sketch set.
pub fn approx_ivv_asym(set: &AsymTensorSketchSet, u: &[f64]) -> Result<Vec<f64>> {
    ContractionWorkspace::for_asym(set).ivv_asym(set, u)
}

/// Median-of-`B` estimate of `T(I, b, c)` from an asymmetric sketch set.
pub fn approx_ibc_asym(set: &AsymTensorSketchSet, b: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    ContractionWorkspace::for_asym(set).ibc_asym(set, b, c)
}

/// Median-of-`B` estimate of `T(u, u, u)` from a symmetric sketch set.
pub fn approx_vvv_sym(set: &SymTensorSketchSet, u: &[f64]) -> Result<f64> {
    ContractionWorkspace::for_sym(set).vvv_sym(set, u)
}

/// Median-of-`B` estimate of `T(I, u, u)` from a symmetric sketch set.
pub fn approx_ivv_sym(set: &SymTensorSketchSet, u: &[f64]) -> Result<Vec<f64>> {
    ContractionWorkspace::for_sym(set).ivv_sym(set, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::tensor::{random_symmetric, DenseTensor3};
    use rand::Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn unit(mut v: Vec<f64>) -> Vec<f64> {
        let s = crate::stats::norm2(&v);
        v.iter_mut().for_each(|x| *x /= s);
        v
    }

    /// `<x, y> = sum x conj(y)`.
    fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
        x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
    }

    /// O(b^2) circular convolution.
    fn conv(x: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
        let b = x.len();
        let mut z = vec![ZERO; b];
        for i in 0..b {
            for j in 0..b {
                z[(i + j) % b] += x[i] * y[j];
            }
        }
        z
    }

    fn asym_fixture(n: usize, b: usize, reps: usize, seed: u64) -> (DenseTensor3, AsymTensorSketchSet) {
        let mut rng = rng_from_seed(seed);
        let t = DenseTensor3::from_fn(n, |_, _, _| rng.random_range(-1.0..1.0));
        let mut set = AsymTensorSketchSet::new(n, b, reps, seed ^ 0xabc).unwrap();
        set.sketch_dense(&t).unwrap();
        (t, set)
    }

    fn sym_fixture(n: usize, b: usize, reps: usize, seed: u64) -> (DenseTensor3, SymTensorSketchSet) {
        let mut rng = rng_from_seed(seed);
        let t = random_symmetric(n, &mut rng);
        let mut set = SymTensorSketchSet::new(n, b, reps, seed ^ 0xdef).unwrap();
        set.sketch_dense(&t).unwrap();
        (t, set)
    }

    #[test]
    fn read_off_matches_explicit_convolution() {
        let (n, b) = (16, 32);
        let (_, set) = asym_fixture(n, b, 3, 1);
        let ws = ContractionWorkspace::for_asym(&set);
        let mut rng = rng_from_seed(2);
        let (x, y) = (rand_vec(&mut rng, n), rand_vec(&mut rng, n));
        for m in 0..3 {
            let r = set.replicate(m);
            for mode in 0..3 {
                let got = ws.replicate_mode_asym(&set, m, mode, &x, &y).unwrap();
                let (p, q) = [(1, 2), (0, 2), (0, 1)][mode];
                let sx = r.count_sketch(p, &x);
                let sy = r.count_sketch(q, &y);
                let sxy = conv(&sx, &sy);
                for i in 0..n {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    let want = inner(r.data(), &conv(&r.count_sketch(mode, &e), &sxy)).re;
                    assert!((got[i] - want).abs() < 1e-10, "mode {mode} i {i}: {} vs {want}", got[i]);
                }
            }
        }
    }

    #[test]
    fn asym_vvv_matches_rank1_inner_product() {
        let (n, b) = (12, 64);
        let (_, set) = asym_fixture(n, b, 4, 3);
        let ws = ContractionWorkspace::for_asym(&set);
        let u = rand_vec(&mut rng_from_seed(4), n);
        for m in 0..4 {
            let want = inner(set.replicate(m).data(), &set.sketch_rank1(m, &u, &u, &u).unwrap()).re;
            assert!((ws.replicate_vvv_asym(&set, m, &u).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn ibc_with_equal_vectors_is_ivv() {
        let (_, set) = asym_fixture(8, 64, 5, 5);
        let u = rand_vec(&mut rng_from_seed(6), 8);
        let a = approx_ivv_asym(&set, &u).unwrap();
        let b = approx_ibc_asym(&set, &u, &u).unwrap();
        assert_eq!(a, b);
        assert!(approx_ibc_asym(&set, &u, &[0.0; 8]).unwrap().iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn zero_vector_gives_zero() {
        let (_, aset) = asym_fixture(6, 32, 3, 7);
        let (_, sset) = sym_fixture(6, 32, 3, 7);
        let z = [0.0; 6];
        assert_eq!(approx_vvv_asym(&aset, &z).unwrap(), 0.0);
        assert!(approx_ivv_asym(&aset, &z).unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(approx_vvv_sym(&sset, &z).unwrap(), 0.0);
        assert!(approx_ivv_sym(&sset, &z).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sym_vvv_matches_truncated_sketch_inner_product() {
        let (n, b) = (9, 32);
        let (_, set) = sym_fixture(n, b, 4, 8);
        let ws = ContractionWorkspace::for_sym(&set);
        let u = rand_vec(&mut rng_from_seed(9), n);
        for m in 0..4 {
            let want = inner(set.replicate(m).data(), &set.sketch_rank1_truncated(m, &u).unwrap()).re;
            assert!((ws.replicate_vvv_sym(&set, m, &u).unwrap() - want).abs() < 1e-10);
        }
    }

    /// Sketch of the upper-triangular part of `x`, straight from the hashes.
    fn direct_truncated(r: &SymReplicate, x: &DenseTensor3) -> Vec<Complex64> {
        let n = x.dim();
        let b = r.data().len();
        let mut out = vec![ZERO; b];
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let h = (r.hash().eval(i) + r.hash().eval(j) + r.hash().eval(k)) % b;
                    let s = r.sign_generator();
                    out[h] += s.eval(i) * s.eval(j) * s.eval(k) * x.get(i, j, k);
                }
            }
        }
        out
    }

    #[test]
    fn sym_ivv_matches_direct_z_sketches() {
        let (n, b) = (7, 16);
        let (_, set) = sym_fixture(n, b, 3, 10);
        let ws = ContractionWorkspace::for_sym(&set);
        let u = rand_vec(&mut rng_from_seed(11), n);
        for m in 0..3 {
            let r = set.replicate(m);
            let got = ws.replicate_ivv_sym(&set, m, &u).unwrap();
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let mut z = DenseTensor3::zeros(n);
                z.add_outer(1.0, &e, &u, &u);
                z.add_outer(1.0, &u, &e, &u);
                z.add_outer(1.0, &u, &u, &e);
                let want = inner(r.data(), &direct_truncated(r, &z)).re / 3.0;
                assert!((got[i] - want).abs() < 1e-10, "i {i}: {} vs {want}", got[i]);
            }
            let dot: f64 = got.iter().zip(&u).map(|(a, b)| a * b).sum();
            let vvv = ws.replicate_vvv_sym(&set, m, &u).unwrap();
            assert!((dot - vvv).abs() < 1e-10);
        }
    }

    #[test]
    fn isolated_diagonal_entry_is_exact() {
        let n = 5;
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        let t = DenseTensor3::symmetric_rank1_sum(&[1.0], std::slice::from_ref(&e));
        let mut set = SymTensorSketchSet::new(n, 64, 3, 12).unwrap();
        set.sketch_dense(&t).unwrap();
        assert!((approx_vvv_sym(&set, &e).unwrap() - 1.0).abs() < 1e-9);
        let ivv = approx_ivv_sym(&set, &e).unwrap();
        assert!((ivv[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transform_count_is_constant_per_replicate() {
        for n in [4, 40] {
            let (_, sset) = sym_fixture(n, 64, 5, 13);
            let ws = ContractionWorkspace::for_sym(&sset);
            let u = rand_vec(&mut rng_from_seed(14), n);
            ws.ivv_sym(&sset, &u).unwrap();
            assert_eq!(ws.transforms(), 4 * 5);
            ws.reset_transforms();
            ws.vvv_sym(&sset, &u).unwrap();
            assert_eq!(ws.transforms(), 2 * 5);

            let (_, aset) = asym_fixture(n.min(12), 64, 5, 13);
            let ws = ContractionWorkspace::for_asym(&aset);
            let u = rand_vec(&mut rng_from_seed(14), n.min(12));
            ws.ivv_asym(&aset, &u).unwrap();
            assert_eq!(ws.transforms(), 2 * 5);
        }
    }

    #[test]
    fn deflation_keeps_cache_coherent() {
        let (n, b) = (8, 64);
        let (t, mut set) = sym_fixture(n, b, 4, 15);
        let mut ws = ContractionWorkspace::for_sym(&set);
        let u = unit(rand_vec(&mut rng_from_seed(16), n));
        ws.deflate_sym(&mut set, -0.7, &u).unwrap();
        let scale = ws.spectra.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(ws.cache_error_sym(&set) <= 1e-12 * scale.max(1.0));

        let mut defl = t.clone();
        defl.axpy(-0.7, &DenseTensor3::symmetric_rank1_sum(&[1.0], std::slice::from_ref(&u))).unwrap();
        let mut fresh = SymTensorSketchSet::new(n, b, 4, 15 ^ 0xdef).unwrap();
        fresh.sketch_dense_with_tol(&defl, 1e-12).unwrap();
        for m in 0..4 {
            let d = set.replicate(m).data().iter().zip(fresh.replicate(m).data());
            assert!(d.map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) < 1e-9);
        }

        let (_, mut aset) = asym_fixture(n, b, 3, 17);
        let mut ws = ContractionWorkspace::for_asym(&aset);
        ws.deflate_asym(&mut aset, 1.3, &u, &u, &u).unwrap();
        let scale = ws.spectra.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(ws.cache_error_asym(&aset) <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn workspace_rejects_mismatched_inputs() {
        let (_, aset) = asym_fixture(6, 32, 2, 18);
        let (_, sset) = sym_fixture(6, 32, 2, 18);
        let ws = ContractionWorkspace::for_asym(&aset);
        assert!(matches!(ws.vvv_sym(&sset, &[0.0; 6]), Err(Error::ModeMismatch(_))));
        assert!(ws.vvv_asym(&aset, &[0.0; 5]).is_err());
        assert!(ws.mode_asym(&aset, 3, &[0.0; 6], &[0.0; 6]).is_err());
    }
}
