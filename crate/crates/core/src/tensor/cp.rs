use nalgebra::{DMatrix, DVector};

use super::dense::DenseTensor3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Factors {
    Symmetric(DMatrix<f64>),
    Asymmetric([DMatrix<f64>; 3]),
}

/// A rank-`k` CP decomposition `sum_r lambda_r a_r (x) b_r (x) c_r`.
///
/// The symmetric variant stores a single factor matrix used for all three
/// modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CpDecomposition {
    lambda: Vec<f64>,
    factors: Factors,
}

impl CpDecomposition {
    pub fn symmetric(lambda: Vec<f64>, v: DMatrix<f64>) -> Result<Self> {
        if v.ncols() != lambda.len() {
            return Err(Error::dim(lambda.len(), v.ncols()));
        }
        Ok(CpDecomposition {
            lambda,
            factors: Factors::Symmetric(v),
        })
    }

    pub fn asymmetric(
        lambda: Vec<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Result<Self> {
        for m in [&a, &b, &c] {
            if m.ncols() != lambda.len() {
                return Err(Error::dim(lambda.len(), m.ncols()));
            }
            if m.nrows() != a.nrows() {
                return Err(Error::dim(a.nrows(), m.nrows()));
            }
        }
        Ok(CpDecomposition {
            lambda,
            factors: Factors::Asymmetric([a, b, c]),
        })
    }

    /// Builds a symmetric decomposition from eigenpairs.
    pub fn from_eigenpairs(n: usize, pairs: &[(f64, Vec<f64>)]) -> Result<Self> {
        let lambda = pairs.iter().map(|p| p.0).collect();
        let mut v = DMatrix::zeros(n, pairs.len());
        for (r, (_, vec)) in pairs.iter().enumerate() {
            if vec.len() != n {
                return Err(Error::dim(n, vec.len()));
            }
            v.set_column(r, &DVector::from_column_slice(vec));
        }
        Self::symmetric(lambda, v)
    }

    pub fn empty(n: usize) -> Self {
        CpDecomposition {
            lambda: Vec::new(),
            factors: Factors::Symmetric(DMatrix::zeros(n, 0)),
        }
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn dim(&self) -> usize {
        self.factor(0).nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self.factors, Factors::Symmetric(_))
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_mut(&mut self) -> &mut [f64] {
        &mut self.lambda
    }

    /// Factor matrix of `mode` (0, 1 or 2).
    pub fn factor(&self, mode: usize) -> &DMatrix<f64> {
        match &self.factors {
            Factors::Symmetric(v) => v,
            Factors::Asymmetric(m) => &m[mode],
        }
    }

    /// Column `r` of the mode-`mode` factor.
    pub fn vector(&self, mode: usize, r: usize) -> Vec<f64> {
        self.factor(mode).column(r).iter().copied().collect()
    }

    /// Largest deviation of any factor column norm from 1.
    pub fn max_unit_norm_error(&self) -> f64 {
        let modes = if self.is_symmetric() { 1 } else { 3 };
        (0..modes)
            .flat_map(|m| {
                let f = self.factor(m);
                (0..f.ncols()).map(move |r| (f.column(r).norm() - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn materialize(&self) -> DenseTensor3 {
        let n = self.dim();
        let mut t = DenseTensor3::zeros(n.max(1));
        for r in 0..self.rank() {
            t.add_outer(
                self.lambda[r],
                &self.vector(0, r),
                &self.vector(1, r),
                &self.vector(2, r),
            );
        }
        t
    }
}

/// Khatri-Rao product: column `r` is `a_r (x) b_r`, i.e. entry
/// `(p * n_b + q, r) = A[p, r] * B[q, r]`.
pub fn khatri_rao(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::dim(a.ncols(), b.ncols()));
    }
    let (na, nb) = (a.nrows(), b.nrows());
    Ok(DMatrix::from_fn(na * nb, a.ncols(), |row, r| {
        a[(row / nb, r)] * b[(row % nb, r)]
    }))
}

/// Squared Frobenius norm of `T - sum_r lambda_r a_r (x) b_r (x) c_r`.
pub fn cp_residual(t: &DenseTensor3, d: &CpDecomposition) -> Result<f64> {
    if d.rank() == 0 {
        return Ok(t.frobenius_sq());
    }
    if d.dim() != t.dim() {
        return Err(Error::dim(t.dim(), d.dim()));
    }
    let approx = d.materialize();
    Ok(t
        .as_slice()
        .iter()
        .zip(approx.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}
