use super::dense::{DenseTensor3, DEFAULT_MEMORY_CAP};
use crate::error::{Error, Result};
use crate::stats::dot;

/// One weighted rank-1 term `weight * u (x) v (x) w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

/// A tensor given as a weighted sum of known rank-1 components, the shape of
/// an empirical moment tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTensor {
    n: usize,
    components: Vec<Component>,
    symmetric: bool,
}

impl FactoredTensor {
    pub fn new(n: usize) -> Self {
        FactoredTensor {
            n,
            components: Vec::new(),
            symmetric: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// True while every component has `u = v = w`.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn push(&mut self, weight: f64, u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<()> {
        for x in [&u, &v, &w] {
            if x.len() != self.n {
                return Err(Error::dim(self.n, x.len()));
            }
        }
        if u != v || u != w {
            self.symmetric = false;
        }
        self.components.push(Component { weight, u, v, w });
        Ok(())
    }

    pub fn push_symmetric(&mut self, weight: f64, u: Vec<f64>) -> Result<()> {
        let v = u.clone();
        let w = u.clone();
        self.push(weight, u, v, w)
    }

    pub fn materialize(&self) -> Result<DenseTensor3> {
        self.materialize_with_cap(DEFAULT_MEMORY_CAP)
    }

    pub fn materialize_with_cap(&self, cap: u128) -> Result<DenseTensor3> {
        DenseTensor3::check_cap(self.n, cap)?;
        let mut t = DenseTensor3::zeros(self.n);
        for c in &self.components {
            t.add_outer(c.weight, &c.u, &c.v, &c.w);
        }
        Ok(t)
    }

    /// `T(x, x, x)` without materializing.
    pub fn contract_vvv(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::dim(self.n, x.len()));
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.weight * dot(&c.u, x) * dot(&c.v, x) * dot(&c.w, x))
            .sum())
    }
}
