use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::CpDecomposition;

/// Spectrum summary of a symmetric decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigengapReport {
    /// Weights in decreasing order.
    pub eigenvalues: Vec<f64>,
    /// Smallest gap between consecutive sorted weights; `+inf` for one
    /// component.
    pub min_gap: f64,
    /// `max_i lambda_i / min_j lambda_j` over the magnitudes.
    pub ratio: f64,
}

pub fn eigengap_report(d: &CpDecomposition) -> Result<EigengapReport> {
    if d.rank() == 0 {
        return Err(Error::param("eigengap report of an empty decomposition"));
    }
    let mut eigenvalues = d.lambda().to_vec();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let min_gap = eigenvalues
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    let mags = eigenvalues.iter().map(|x| x.abs());
    let hi = mags.clone().fold(0.0f64, f64::max);
    let lo = mags.fold(f64::INFINITY, f64::min);
    Ok(EigengapReport {
        eigenvalues,
        min_gap,
        ratio: hi / lo,
    })
}

impl EigengapReport {
    /// Sketch length suggested by the sample-complexity bound
    /// `b ~ max(||T||^2 / (eps^2 gap^2), n^2 ||T||^2 / (delta^4 r^2 lambda_1^2))`,
    /// with unit constants, rounded up to a power of two. `frob_sq` is
    /// `||T||_F^2`.
    pub fn recommended_sketch_len(&self, n: usize, frob_sq: f64, eps: f64, delta: f64) -> Result<usize> {
        if !(eps > 0.0 && delta > 0.0) {
            return Err(Error::param("eps and delta must be positive"));
        }
        let l1 = self.eigenvalues[0].abs();
        let gap_term = if self.min_gap.is_finite() {
            frob_sq / (eps * eps * self.min_gap * self.min_gap)
        } else {
            0.0
        };
        let n2 = (n * n) as f64;
        let top_term = n2 * frob_sq / (delta.powi(4) * self.ratio * self.ratio * l1 * l1);
        let b = gap_term.max(top_term).max(2.0);
        if !b.is_finite() || b > (1u64 << 40) as f64 {
            return Err(Error::Degenerate(format!("recommended sketch length {b:e} is unusable")));
        }
        Ok((b.ceil() as usize).next_power_of_two())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decomp(lambda: &[f64]) -> CpDecomposition {
        let n = lambda.len();
        let pairs: Vec<_> = lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                (l, e)
            })
            .collect();
        CpDecomposition::from_eigenpairs(n, &pairs).unwrap()
    }

    #[test]
    fn gaps_and_ratio() {
        let r = eigengap_report(&decomp(&[0.5, 1.0, 0.25])).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0, 0.5, 0.25]);
        assert_eq!(r.min_gap, 0.25);
        assert_eq!(r.ratio, 4.0);
        let one = eigengap_report(&decomp(&[2.0])).unwrap();
        assert_eq!(one.min_gap, f64::INFINITY);
        assert_eq!(one.ratio, 1.0);
    }

    #[test]
    fn recommendation_is_a_power_of_two() {
        let r = eigengap_report(&decomp(&[1.0, 0.5])).unwrap();
        let b = r.recommended_sketch_len(10, 1.25, 0.1, 1.0).unwrap();
        assert!(b.is_power_of_two());
        assert!(b as f64 >= 1.25 / (0.01 * 0.25));
        assert!(r.recommended_sketch_len(10, 1.0, 0.0, 1.0).is_err());
    }
}
