//! k-wise independent hashing and random signs.
//!
//! [`PolyHash`] is a random polynomial of degree `independence - 1` over the
//! Mersenne prime field `p = 2^31 - 1`, reduced modulo the bucket count. Its
//! values at any `independence` distinct points are independent and uniform
//! on `[0, p)`; the final `mod b` adds a bias of at most `b / p`.
//!
//! [`SignGenerator`] maps an index to a root of unity through a 6-wise
//! independent polynomial hash into `m` buckets: `m = 2` gives real
//! Rademacher signs, `m = 4` gives the complex signs `{1, i, -1, -i}` used by
//! the symmetric (colliding-hash) sketch.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const MERSENNE_31: u64 = (1 << 31) - 1;

#[inline]
fn reduce(v: u64) -> u64 {
    // v < 2^63
    let r = (v & MERSENNE_31) + (v >> 31);
    let r = (r & MERSENNE_31) + (r >> 31);
    if r >= MERSENNE_31 {
        r - MERSENNE_31
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyHash {
    /// `coeffs[d]` multiplies `x^d`.
    coeffs: Vec<u64>,
    buckets: u64,
}

impl PolyHash {
    /// Draws a fresh `independence`-wise independent hash into `buckets`
    /// buckets. `independence` must lie in `2..=8`.
    pub fn new(independence: usize, buckets: usize, seed: u64) -> Result<Self> {
        if !(2..=8).contains(&independence) {
            return Err(Error::param(format!(
                "independence {independence} outside 2..=8"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let coeffs = (0..independence)
            .map(|_| rng.random_range(0..MERSENNE_31))
            .collect();
        Self::from_coeffs(coeffs, buckets)
    }

    /// A hash with explicit coefficients, lowest degree first.
    pub fn from_coeffs(coeffs: Vec<u64>, buckets: usize) -> Result<Self> {
        if buckets < 2 {
            return Err(Error::param(format!("bucket count {buckets} < 2")));
        }
        if coeffs.is_empty() {
            return Err(Error::param("hash needs at least one coefficient"));
        }
        if let Some(c) = coeffs.iter().find(|&&c| c >= MERSENNE_31) {
            return Err(Error::param(format!("coefficient {c} not below 2^31 - 1")));
        }
        Ok(PolyHash {
            coeffs,
            buckets: buckets as u64,
        })
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn buckets(&self) -> usize {
        self.buckets as usize
    }

    /// Declared independence level (number of coefficients).
    pub fn independence(&self) -> usize {
        self.coeffs.len()
    }

    /// `((sum_d c_d x^d) mod p) mod b`.
    #[inline]
    pub fn eval(&self, index: usize) -> usize {
        let x = reduce(index as u64);
        let mut acc = 0u64;
        for &c in self.coeffs.iter().rev() {
            acc = reduce(acc * x + c);
        }
        (acc % self.buckets) as usize
    }

    /// Bucket table for indices `0..n`.
    pub fn table(&self, n: usize) -> Vec<u32> {
        (0..n).map(|i| self.eval(i) as u32).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Rademacher,
    Complex4,
}

impl SignMode {
    pub fn roots(self) -> usize {
        match self {
            SignMode::Rademacher => 2,
            SignMode::Complex4 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignGenerator {
    mode: SignMode,
    backing: PolyHash,
}

/// Independence of the hash behind every sign generator.
pub const SIGN_INDEPENDENCE: usize = 6;

const COMPLEX4: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

impl SignGenerator {
    pub fn new(mode: SignMode, seed: u64) -> Result<Self> {
        let backing = PolyHash::new(SIGN_INDEPENDENCE, mode.roots(), seed)?;
        Ok(SignGenerator { mode, backing })
    }

    pub fn from_hash(mode: SignMode, backing: PolyHash) -> Result<Self> {
        if backing.buckets() != mode.roots() {
            return Err(Error::param(format!(
                "sign hash has {} buckets, mode needs {}",
                backing.buckets(),
                mode.roots()
            )));
        }
        Ok(SignGenerator { mode, backing })
    }

    pub fn mode(&self) -> SignMode {
        self.mode
    }

    pub fn backing(&self) -> &PolyHash {
        &self.backing
    }

    /// `omega^{backing(i)}` with `omega = -1` or `omega = i`.
    #[inline]
    pub fn eval(&self, index: usize) -> Complex64 {
        COMPLEX4[self.exponent(index)]
    }

    /// Exponent `e` such that the sign is `i^e` (always even for
    /// Rademacher signs).
    #[inline]
    pub fn exponent(&self, index: usize) -> usize {
        let r = self.backing.eval(index);
        match self.mode {
            SignMode::Rademacher => 2 * r,
            SignMode::Complex4 => r,
        }
    }

    /// Real sign; only meaningful in Rademacher mode.
    #[inline]
    pub fn eval_real(&self, index: usize) -> f64 {
        if self.backing.eval(index) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn table(&self, n: usize) -> Vec<Complex64> {
        (0..n).map(|i| self.eval(i)).collect()
    }
}

/// `(h(i) + h(j) + h(k)) mod b`, invariant under permutations of the triple.
#[inline]
pub fn symmetric_bucket(h: &PolyHash, i: usize, j: usize, k: usize) -> usize {
    (h.eval(i) + h.eval(j) + h.eval(k)) % h.buckets()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRAWS: u64 = 100_000;

    fn se(p: f64, n: f64) -> f64 {
        (p * (1.0 - p) / n).sqrt()
    }

    /// Wide-integer reference: sum_d c_d x^d mod p evaluated in u128.
    fn eval_u128(coeffs: &[u64], x: u64, b: u64) -> u64 {
        let p = MERSENNE_31 as u128;
        let mut acc: u128 = 0;
        let mut pow: u128 = 1;
        for &c in coeffs {
            acc = (acc + c as u128 * pow) % p;
            pow = pow * (x as u128 % p) % p;
        }
        (acc % b as u128) as u64
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PolyHash::new(2, 1, 0).is_err());
        assert!(PolyHash::new(1, 16, 0).is_err());
        assert!(PolyHash::new(9, 16, 0).is_err());
        assert!(PolyHash::from_coeffs(vec![MERSENNE_31], 4).is_err());
    }

    #[test]
    fn eval_is_a_function() {
        let h = PolyHash::new(2, 16, 7).unwrap();
        let first: Vec<usize> = (0..100).map(|i| h.eval(i)).collect();
        for _ in 0..10_000 {
            for (i, f) in first.iter().enumerate() {
                assert_eq!(h.eval(i), *f);
            }
        }
        assert_eq!(h, PolyHash::new(2, 16, 7).unwrap());
        assert_ne!(h, PolyHash::new(2, 16, 8).unwrap());
    }

    #[test]
    fn constant_and_identity_polynomials() {
        let c = PolyHash::from_coeffs(vec![5, 0, 0], 4).unwrap();
        assert!((0..1000).all(|i| c.eval(i) == 1));
        let id = PolyHash::from_coeffs(vec![0, 1], 8).unwrap();
        for i in [0usize, 1, 7, 8, 12345, (MERSENNE_31 - 1) as usize] {
            assert_eq!(id.eval(i), i % 8);
        }
    }

    #[test]
    fn degree_five_golden_values() {
        let h = PolyHash::new(6, 1 << 12, 42).unwrap();
        let oracle: Vec<u64> = (0..10)
            .map(|x| eval_u128(h.coeffs(), x, 1 << 12))
            .collect();
        let got: Vec<u64> = (0..10).map(|x| h.eval(x as usize) as u64).collect();
        assert_eq!(got, oracle);
        assert_eq!(got, GOLDEN_SEED42);
        // large inputs exercise the modular reduction
        for x in [MERSENNE_31 - 1, MERSENNE_31, MERSENNE_31 + 5, u32::MAX as u64] {
            assert_eq!(h.eval(x as usize) as u64, eval_u128(h.coeffs(), x, 1 << 12));
        }
    }

    const GOLDEN_SEED42: [u64; 10] = [4057, 982, 3579, 3813, 1959, 3838, 1650, 3973, 221, 2924];

    #[test]
    fn six_wise_hash_is_uniform_per_point() {
        let b = 16usize;
        let (x, t) = (12345usize, 3usize);
        let hits = (0..DRAWS)
            .filter(|&s| PolyHash::new(6, b, s).unwrap().eval(x) == t)
            .count();
        let p = 1.0 / b as f64;
        let freq = hits as f64 / DRAWS as f64;
        let bias = b as f64 / MERSENNE_31 as f64;
        assert!((freq - p).abs() < 3.0 * se(p, DRAWS as f64) + bias);
    }

    #[test]
    fn pairwise_joint_frequency() {
        let b = 16usize;
        let (x, y, s, t) = (4usize, 977usize, 2usize, 11usize);
        let hits = (0..DRAWS)
            .filter(|&seed| {
                let h = PolyHash::new(2, b, seed + 1_000_000).unwrap();
                h.eval(x) == s && h.eval(y) == t
            })
            .count();
        let p = 1.0 / (b * b) as f64;
        let freq = hits as f64 / DRAWS as f64;
        assert!((freq - p).abs() < 3.0 * se(p, DRAWS as f64));
    }

    #[test]
    fn complex_signs_are_fourth_roots() {
        let s = SignGenerator::new(SignMode::Complex4, 3).unwrap();
        for i in 0..1000 {
            let z = s.eval(i);
            assert_eq!(z.powu(4), Complex64::new(1.0, 0.0));
            assert_eq!(z.norm(), 1.0);
        }
        let r = SignGenerator::new(SignMode::Rademacher, 3).unwrap();
        for i in 0..1000 {
            let z = r.eval(i);
            assert_eq!(z.im, 0.0);
            assert_eq!(z.re, r.eval_real(i));
            assert_eq!(z.re.abs(), 1.0);
        }
    }

    #[test]
    fn complex_sign_moments_vanish() {
        let i = 17usize;
        let mut sums = [Complex64::new(0.0, 0.0); 3];
        for seed in 0..DRAWS {
            let z = SignGenerator::new(SignMode::Complex4, seed).unwrap().eval(i);
            for (p, s) in sums.iter_mut().enumerate() {
                *s += z.powu(p as u32 + 1);
            }
        }
        for s in sums {
            assert!((s / DRAWS as f64).norm() < 3.0 / (DRAWS as f64).sqrt());
        }
    }

    #[test]
    fn rademacher_mean_vanishes() {
        let sum: f64 = (0..DRAWS)
            .map(|seed| {
                SignGenerator::new(SignMode::Rademacher, seed + 7)
                    .unwrap()
                    .eval_real(5)
            })
            .sum();
        // SE of a Rademacher mean is 1 / sqrt(N)
        assert!((sum / DRAWS as f64).abs() < 3.0 / (DRAWS as f64).sqrt());
    }

    #[test]
    fn symmetric_bucket_permutation_invariant() {
        let h = PolyHash::new(6, 64, 1).unwrap();
        assert_eq!(symmetric_bucket(&h, 2, 5, 9), symmetric_bucket(&h, 9, 2, 5));
        assert_eq!(symmetric_bucket(&h, 2, 5, 9), symmetric_bucket(&h, 5, 9, 2));
        let lin = PolyHash::from_coeffs(vec![0, 1], 10).unwrap();
        assert_eq!(symmetric_bucket(&lin, 1, 2, 3), 6);
    }

    #[test]
    fn symmetric_bucket_pairwise_chi_square() {
        // 6-wise h makes the 3-sum map 2-wise independent. Test the joint
        // distribution of two distinct sorted triples over b x b cells.
        let b = 8usize;
        let (a, a2) = ((1usize, 4usize, 4usize), (0usize, 2usize, 9usize));
        let mut counts = vec![0u64; b * b];
        for seed in 0..DRAWS {
            let h = PolyHash::new(6, b, seed + 5_000_000).unwrap();
            let s = symmetric_bucket(&h, a.0, a.1, a.2);
            let t = symmetric_bucket(&h, a2.0, a2.1, a2.2);
            counts[s * b + t] += 1;
        }
        let expected = DRAWS as f64 / (b * b) as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square 0.99 quantile with 63 degrees of freedom
        assert!(chi2 < 92.010, "chi2 = {chi2}");
        // also the single-cell frequency test
        let p = 1.0 / (b * b) as f64;
        let freq = counts[3 * b + 5] as f64 / DRAWS as f64;
        assert!((freq - p).abs() < 3.0 * se(p, DRAWS as f64));
    }
}
