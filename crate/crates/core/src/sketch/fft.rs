//! DFT plumbing over `rustfft`.
//!
//! Convention: the forward transform is unnormalized and the inverse carries
//! the `1/b` factor, so `inverse(forward(x)) = x` and the convolution
//! theorem reads `x * y = inverse(forward(x) . forward(y))`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub struct Dft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

thread_local! {
    static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

pub fn check_sketch_len(b: usize) -> Result<()> {
    if b < 2 || !b.is_power_of_two() {
        return Err(Error::param(format!(
            "sketch length {b} must be a power of two >= 2"
        )));
    }
    Ok(())
}

impl Dft {
    /// Shared plan for length `b`. Plans are cached per length for the
    /// lifetime of the process.
    pub fn shared(b: usize) -> Result<Arc<Dft>> {
        check_sketch_len(b)?;
        Ok(Self::planned(b))
    }

    /// Like [`Dft::shared`] but also accepts length 1; used for the
    /// half-length transforms of the auxiliary sketches.
    pub(crate) fn planned(b: usize) -> Arc<Dft> {
        debug_assert!(b.is_power_of_two());
        static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Dft>>>> = OnceLock::new();
        let mut plans = PLANS
            .get_or_init(|| Mutex::new(HashMap::new()))
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        plans
            .entry(b)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Dft {
                    len: b,
                    forward: planner.plan_fft_forward(b),
                    inverse: planner.plan_fft_inverse(b),
                })
            })
            .clone()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    fn run(plan: &dyn Fft<f64>, buf: &mut [Complex64]) {
        SCRATCH.with(|s| {
            let mut s = s.borrow_mut();
            let need = plan.get_inplace_scratch_len();
            if s.len() < need {
                s.resize(need, Complex64::new(0.0, 0.0));
            }
            plan.process_with_scratch(buf, &mut s[..need]);
        });
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        Self::run(self.forward.as_ref(), buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        Self::run(self.inverse.as_ref(), buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    /// Inverse transform without the `1/b` factor.
    pub fn inverse_unscaled(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        Self::run(self.inverse.as_ref(), buf);
    }

    pub fn forward_of(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut v = x.to_vec();
        self.forward(&mut v);
        v
    }

    pub fn inverse_of(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut v = x.to_vec();
        self.inverse(&mut v);
        v
    }
}

/// Inverse DFT of a Hermitian length-`b` spectrum (real output) through one
/// length-`b/2` complex transform.
///
/// With `E[k] = (X[k] + X[k + b/2]) / 2` and
/// `O[k] = (X[k] - X[k + b/2]) e^{2 pi i k / b} / 2`, the half-length inverse
/// of `E + iO` interleaves the even and odd samples of `x` as real and
/// imaginary parts.
#[derive(Debug)]
pub(crate) struct RealInverse {
    half: Arc<Dft>,
    twiddle: Vec<Complex64>,
}

impl RealInverse {
    pub(crate) fn new(b: usize) -> Self {
        let h = b / 2;
        let twiddle = (0..h)
            .map(|k| Complex64::from_polar(0.5, 2.0 * std::f64::consts::PI * k as f64 / b as f64))
            .collect();
        RealInverse {
            half: Dft::planned(h),
            twiddle,
        }
    }

    /// Runs the half-length inverse on `z[k] = E[k] + iO[k]` (built with
    /// [`RealInverse::fold`]); read the result with [`RealInverse::sample`].
    pub(crate) fn finish(&self, z: &mut [Complex64]) {
        self.half.inverse_unscaled(z);
    }

    /// `E[k] + iO[k]` from the spectrum values at `k` and `k + b/2`.
    #[inline]
    pub(crate) fn fold(&self, k: usize, lo: Complex64, hi: Complex64) -> Complex64 {
        let e = (lo + hi) * 0.5;
        let o = (lo - hi) * self.twiddle[k];
        Complex64::new(e.re - o.im, e.im + o.re)
    }

    /// Sample `t` of the inverse (including the `1/b` normalization) from the
    /// buffer left by [`RealInverse::finish`].
    #[inline]
    pub(crate) fn sample(&self, z: &[Complex64], t: usize) -> f64 {
        let v = z[t >> 1];
        let x = if t & 1 == 0 { v.re } else { v.im };
        x / self.half.len() as f64
    }
}

/// Circular convolution `z[t] = sum_{(i + j) mod b = t} x_i y_j` in
/// `O(b log b)`.
pub fn circular_convolve(x: &[Complex64], y: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != y.len() {
        return Err(Error::dim(x.len(), y.len()));
    }
    let dft = Dft::shared(x.len())?;
    let mut fx = dft.forward_of(x);
    let fy = dft.forward_of(y);
    fx.iter_mut().zip(&fy).for_each(|(a, b)| *a *= b);
    dft.inverse(&mut fx);
    Ok(fx)
}
