use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default refusal threshold for dense materialization: 2 GiB of entries.
pub const DEFAULT_MEMORY_CAP: u128 = 2 << 30;

/// An explicit `n x n x n` real tensor stored row-major in `(i, j, k)` order,
/// so entry `(i, j, k)` lives at `(i * n + j) * n + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    n: usize,
    data: Vec<f64>,
}

impl DenseTensor3 {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("tensor dimension must be positive"));
        }
        if data.len() != n * n * n {
            return Err(Error::dim(n * n * n, data.len()));
        }
        Ok(DenseTensor3 { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        DenseTensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    /// Checks that an `n^3` tensor of `f64` fits under `cap` bytes.
    pub fn check_cap(n: usize, cap: u128) -> Result<()> {
        let bytes = (n as u128).pow(3) * 8;
        if bytes > cap {
            return Err(Error::MemoryCap { bytes, cap });
        }
        Ok(())
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    data.push(f(i, j, k));
                }
            }
        }
        DenseTensor3 { n, data }
    }

    /// `sum_r weight_r * v_r (x) v_r (x) v_r`.
    pub fn symmetric_rank1_sum(weights: &[f64], vectors: &[Vec<f64>]) -> Self {
        let n = vectors.first().map_or(1, Vec::len);
        let mut t = DenseTensor3::zeros(n);
        for (w, v) in weights.iter().zip(vectors) {
            t.add_outer(*w, v, v, v);
        }
        t
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// The `n^2` entries `T[i, :, :]` in row-major `(j, k)` order.
    #[inline]
    pub fn slab(&self, i: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.data[i * nn..(i + 1) * nn]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn inner(&self, other: &DenseTensor3) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor3) -> Result<()> {
        if other.n != self.n {
            return Err(Error::dim(self.n, other.n));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// `self += weight * u (x) v (x) w`.
    pub fn add_outer(&mut self, weight: f64, u: &[f64], v: &[f64], w: &[f64]) {
        let n = self.n;
        for i in 0..n {
            let wi = weight * u[i];
            if wi == 0.0 {
                continue;
            }
            for j in 0..n {
                let wij = wi * v[j];
                let base = (i * n + j) * n;
                for k in 0..n {
                    self.data[base + k] += wij * w[k];
                }
            }
        }
    }

    /// First sorted triple `(i, j, k)` whose permutations disagree by more
    /// than `tol`, or `None` when the tensor is symmetric.
    pub fn first_asymmetry(&self, tol: f64) -> Option<(usize, usize, usize)> {
        let n = self.n;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let x = self.get(i, j, k);
                    let perms = [
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ];
                    if perms.iter().any(|p| (p - x).abs() > tol) {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    /// Copies each sorted-triple entry `T[i, j, k]` (`i <= j <= k`) onto all
    /// of its permutations, making the tensor bit-exactly symmetric.
    pub fn mirror_sorted(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let x = self.get(i, j, k);
                    for (a, b, c) in [(i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        self.set(a, b, c, x);
                    }
                }
            }
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.first_asymmetry(tol).is_none()
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        match self.first_asymmetry(tol) {
            Some((i, j, k)) => Err(Error::NotSymmetric { i, j, k }),
            None => Ok(()),
        }
    }

    fn check_vec(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::dim(self.n, u.len()));
        }
        Ok(())
    }

    /// `T(u, u, u) = sum_{ijk} T_ijk u_i u_j u_k`.
    pub fn contract_vvv(&self, u: &[f64]) -> Result<f64> {
        self.check_vec(u)?;
        let n = self.n;
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let slab = self.slab(i);
                let mut acc = 0.0;
                for j in 0..n {
                    let row = &slab[j * n..(j + 1) * n];
                    let mut inner = 0.0;
                    for k in 0..n {
                        inner += row[k] * u[k];
                    }
                    acc += inner * u[j];
                }
                acc * u[i]
            })
            .collect();
        Ok(rows.iter().sum())
    }

    /// `T(I, u, v)`: component `i` is `sum_{jk} T_ijk u_j v_k`.
    pub fn contract_ivv(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_vec(u)?;
        self.check_vec(v)?;
        let n = self.n;
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let slab = self.slab(i);
                let mut acc = 0.0;
                for j in 0..n {
                    let row = &slab[j * n..(j + 1) * n];
                    let mut inner = 0.0;
                    for k in 0..n {
                        inner += row[k] * v[k];
                    }
                    acc += inner * u[j];
                }
                acc
            })
            .collect())
    }

    /// Contraction leaving mode `mode` free and contracting the other two
    /// modes (in increasing mode order) with `x` and `y`.
    ///
    /// `mode = 0` gives `T(I, x, y)`, `mode = 1` gives `T(x, I, y)`, and
    /// `mode = 2` gives `T(x, y, I)`.
    pub fn contract_mode(&self, mode: usize, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_vec(x)?;
        self.check_vec(y)?;
        let n = self.n;
        match mode {
            0 => self.contract_ivv(x, y),
            1 => Ok((0..n)
                .into_par_iter()
                .map(|j| {
                    let mut acc = 0.0;
                    for i in 0..n {
                        let row = &self.slab(i)[j * n..(j + 1) * n];
                        let mut inner = 0.0;
                        for k in 0..n {
                            inner += row[k] * y[k];
                        }
                        acc += inner * x[i];
                    }
                    acc
                })
                .collect()),
            2 => {
                let parts: Vec<Vec<f64>> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let slab = self.slab(i);
                        let mut out = vec![0.0; n];
                        for j in 0..n {
                            let c = x[i] * y[j];
                            let row = &slab[j * n..(j + 1) * n];
                            for k in 0..n {
                                out[k] += c * row[k];
                            }
                        }
                        out
                    })
                    .collect();
                let mut out = vec![0.0; n];
                for p in parts {
                    for (o, v) in out.iter_mut().zip(p) {
                        *o += v;
                    }
                }
                Ok(out)
            }
            _ => Err(Error::param(format!("mode {mode} out of range 0..3"))),
        }
    }

    /// Mode-1 unfolding `T_(1)`: an `n x n^2` matrix whose row `i` lists
    /// `T[i, j, k]` with `(j, k)` in row-major order.
    pub fn mode1_unfold(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_row_slice(n, n * n, &self.data)
    }
}

/// Inverse of [`DenseTensor3::mode1_unfold`].
pub fn refold_mode1(m: &DMatrix<f64>) -> Result<DenseTensor3> {
    let n = m.nrows();
    if m.ncols() != n * n {
        return Err(Error::dim(n * n, m.ncols()));
    }
    let mut data = Vec::with_capacity(n * n * n);
    for i in 0..n {
        data.extend(m.row(i).iter().copied());
    }
    DenseTensor3::new(n, data)
}
