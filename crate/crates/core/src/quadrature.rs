//! Gauss-Legendre quadrature with fallible integrands.

use std::num::NonZeroUsize;

use crate::error::{Error, Result};

/// Default node count for integrals against parametric distributions.
pub const DEFAULT_NODES: usize = 256;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    // (node, weight) pairs on [-1, 1].
    pairs: Vec<(f64, f64)>,
}

impl GaussLegendre {
    /// # Panics
    /// If `nodes` is zero.
    pub fn new(nodes: usize) -> Self {
        let degree = NonZeroUsize::new(nodes).expect("quadrature needs at least one node");
        let rule = gauss_quad::legendre::GaussLegendre::new(degree);
        Self {
            pairs: rule.as_node_weight_pairs().to_vec(),
        }
    }

    pub fn try_new(nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least one node".into(),
            ));
        }
        Ok(Self::new(nodes))
    }

    pub fn nodes(&self) -> usize {
        self.pairs.len()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if b <= a {
            return Ok(0.0);
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut total = 0.0;
        for &(x, w) in &self.pairs {
            total += w * f(mid + half * x)?;
        }
        Ok(half * total)
    }
}

impl Default for GaussLegendre {
    fn default() -> Self {
        Self::new(DEFAULT_NODES)
    }
}
