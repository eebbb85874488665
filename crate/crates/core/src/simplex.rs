//! Probability vectors over arms.

use crate::error::{Error, Result};
use crate::graph::CliqueCover;

/// Absolute tolerance used for the simplex and floor constraints.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point of the probability simplex over `N` arms.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Wraps `probs` after checking nonnegativity and `|sum - 1| <= 1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Domain(format!("invalid probability {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    /// Like [`new`](Self::new) but also requires every entry to be at least `gamma - 1e-12`.
    pub fn truncated(probs: Vec<f64>, gamma: f64) -> Result<Self> {
        let point = Self::new(probs)?;
        if let Some(p) = point.0.iter().find(|p| **p < gamma - SIMPLEX_TOL) {
            return Err(Error::Domain(format!("probability {p} below floor {gamma}")));
        }
        Ok(point)
    }

    pub fn uniform(num_arms: usize) -> Self {
        Self(vec![1.0 / num_arms as f64; num_arms])
    }

    /// Vertex `e_arm`.
    pub fn vertex(num_arms: usize, arm: usize) -> Self {
        let mut probs = vec![0.0; num_arms];
        probs[arm] = 1.0;
        Self(probs)
    }

    /// Corner of the truncated simplex: `gamma` everywhere except `arm`, which gets the rest.
    pub fn corner(num_arms: usize, arm: usize, gamma: f64) -> Self {
        let mut probs = vec![gamma; num_arms];
        probs[arm] = 1.0 - (num_arms - 1) as f64 * gamma;
        Self(probs)
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(p, x)| p * x).sum()
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Clique marginals `p(V_k)` for `k = 0..K`.
pub fn clique_marginals(p: &[f64], cover: &CliqueCover) -> Result<Vec<f64>> {
    if p.len() != cover.num_arms() {
        return Err(Error::Dimension { expected: cover.num_arms(), got: p.len() });
    }
    Ok(marginals_unchecked(p, cover))
}

pub(crate) fn marginals_unchecked(p: &[f64], cover: &CliqueCover) -> Vec<f64> {
    cover.cliques().iter().map(|c| c.iter().map(|&i| p[i]).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginal_examples() {
        let cover = CliqueCover::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(clique_marginals(SimplexPoint::uniform(4).probs(), &cover).unwrap(), vec![0.5, 0.5]);
        assert_eq!(clique_marginals(SimplexPoint::vertex(4, 0).probs(), &cover).unwrap(), vec![1.0, 0.0]);
        let cover = CliqueCover::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        let m = clique_marginals(&[0.1, 0.2, 0.3, 0.4], &cover).unwrap();
        assert!((m[0] - 0.4).abs() < 1e-15 && (m[1] - 0.6).abs() < 1e-15);
        assert!(matches!(clique_marginals(&[0.5, 0.5], &cover), Err(Error::Dimension { .. })));
    }

    #[test]
    fn constructor_checks() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexPoint::truncated(vec![0.95, 0.05], 0.1).is_err());
        assert!(SimplexPoint::truncated(vec![0.9, 0.1], 0.1).is_ok());
        let c = SimplexPoint::corner(4, 2, 0.1);
        assert!((c.probs()[2] - 0.7).abs() < 1e-15);
    }
}
