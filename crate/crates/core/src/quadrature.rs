//! Gauss-Legendre rules over the angular domain `[-π/2, π/2]`.

use std::f64::consts::FRAC_PI_2;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::{Error, Result};

/// Nodes per axis used when nothing else is configured.
pub const DEFAULT_NODES_PER_AXIS: usize = 200;

/// Smallest accepted rule size.
pub const MIN_NODES_PER_AXIS: usize = 8;

/// Tensor-product Gauss-Legendre rule with the same node count on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrature {
    nodes_per_axis: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { nodes_per_axis: DEFAULT_NODES_PER_AXIS }
    }
}

impl Quadrature {
    pub fn gauss_legendre(nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis < MIN_NODES_PER_AXIS {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least {MIN_NODES_PER_AXIS} nodes per axis, got {nodes_per_axis}"
            )));
        }
        Ok(Self { nodes_per_axis })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    /// One-dimensional rule mapped onto `[-π/2, π/2]`.
    pub fn axis_rule(&self) -> AxisRule {
        AxisRule::half_space(self.nodes_per_axis)
    }
}

/// Nodes and weights of a 1-D rule on `[-π/2, π/2]`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisRule {
    pub fn half_space(n: usize) -> Self {
        let n = NonZeroUsize::new(n).expect("rule size must be positive");
        let rule = GaussLegendre::new(n);
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (x * FRAC_PI_2, w * FRAC_PI_2))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn too_few_nodes_rejected() {
        assert!(Quadrature::gauss_legendre(7).is_err());
        assert!(Quadrature::gauss_legendre(8).is_ok());
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let r = AxisRule::half_space(37);
        let total: f64 = r.weights.iter().sum();
        assert!((total - PI).abs() < 1e-13);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn integrates_cosine() {
        let r = Quadrature::default().axis_rule();
        assert!((r.integrate(f64::cos) - 2.0).abs() < 1e-13);
        // polynomial exactness for degree 2n-1
        let r = AxisRule::half_space(8);
        let exact = 2.0 * FRAC_PI_2.powi(15) / 15.0;
        assert!((r.integrate(|x| x.powi(14)) - exact).abs() < 1e-10 * exact);
    }
}
