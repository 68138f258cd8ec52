use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::cp::CpDecomposition;
use super::dense::DenseTensor3;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_NOISE, STREAM_PLANT};

/// A planted orthogonal tensor and its ground truth.
#[derive(Debug, Clone)]
pub struct PlantedTensor {
    pub tensor: DenseTensor3,
    /// Ground truth with eigenvalues rescaled by the normalization, so that
    /// `truth` reproduces the noiseless tensor exactly.
    pub truth: CpDecomposition,
    /// The unnormalized eigenvalues `1 / i`.
    pub raw_lambda: Vec<f64>,
    /// Frobenius norm of `sum_i (1/i) v_i^{(x)3}` before normalization.
    pub clean_norm: f64,
}

/// `normalize(sum_{i<=k} (1/i) v_i^{(x)3}) + E` with a random orthonormal
/// basis `v_i` and symmetric Gaussian noise of standard deviation
/// `sigma / n^1.5` per sorted entry `i <= j <= k`.
///
/// The basis depends only on `(n, k, seed)` and the noise only on
/// `(n, sigma, seed)`, so the same seed with `sigma = 0` gives the clean
/// tensor under the noisy one.
pub fn synth_orthogonal_tensor(n: usize, k: usize, sigma: f64, seed: u64) -> Result<PlantedTensor> {
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    if k > n {
        return Err(Error::param(format!("rank {k} exceeds dimension {n}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma must be non-negative"));
    }

    let mut rng = stream_rng(seed, STREAM_PLANT);
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    let basis = q.columns(0, k).into_owned();

    let raw_lambda: Vec<f64> = (1..=k).map(|i| 1.0 / i as f64).collect();
    // The v_i are orthonormal, so ||sum_i l_i v_i^{(x)3}||_F^2 = sum_i l_i^2.
    let clean_norm = raw_lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
    let lambda: Vec<f64> = if k == 0 {
        Vec::new()
    } else {
        raw_lambda.iter().map(|l| l / clean_norm).collect()
    };

    let truth = CpDecomposition::symmetric(lambda, basis)?;
    let mut tensor = if k == 0 {
        DenseTensor3::zeros(n)
    } else {
        let mut t = truth.materialize();
        t.mirror_sorted();
        t
    };

    if sigma > 0.0 {
        let std = sigma / (n as f64).powf(1.5);
        let mut noise_rng = stream_rng(seed, STREAM_NOISE);
        add_symmetric_noise(&mut tensor, std, &mut noise_rng);
    }

    Ok(PlantedTensor {
        tensor,
        truth,
        raw_lambda,
        clean_norm,
    })
}

fn add_symmetric_noise(t: &mut DenseTensor3, std: f64, rng: &mut impl Rng) {
    let n = t.dim();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let z: f64 = StandardNormal.sample(rng);
                let e = std * z;
                for (a, b, c) in permutations(i, j, k) {
                    let cur = t.get(a, b, c);
                    t.set(a, b, c, cur + e);
                }
            }
        }
    }
}

/// The distinct permutations of `(i, j, k)`.
pub(crate) fn permutations(i: usize, j: usize, k: usize) -> Vec<(usize, usize, usize)> {
    let mut p = vec![
        (i, j, k),
        (i, k, j),
        (j, i, k),
        (j, k, i),
        (k, i, j),
        (k, j, i),
    ];
    p.sort_unstable();
    p.dedup();
    p
}

/// A random symmetric tensor with standard normal entries on sorted
/// triples, mirrored to every permutation.
pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> DenseTensor3 {
    let mut t = DenseTensor3::zeros(n);
    add_symmetric_noise(&mut t, 1.0, rng);
    t
}
