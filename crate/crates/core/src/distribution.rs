use serde::Serialize;

use crate::error::{Error, Result};

/// Slack allowed on the negative side of the tail mass from summation rounding.
pub const NEGATIVE_TAIL_SLACK: f64 = 1e-12;

/// Truncated joint photon-number distribution `P(p, q)` on `0..=cutoff` squared.
///
/// Entries are stored row-major with `p` the photon count of mode 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    probs: Vec<f64>,
    cutoff: usize,
    tail_mass: f64,
}

impl JointDistribution {
    /// Builds a distribution from row-major entries and records `1 - Σ P` as tail mass.
    pub fn from_entries(cutoff: usize, probs: Vec<f64>) -> Result<Self> {
        let dim = cutoff + 1;
        if probs.len() != dim * dim {
            return Err(Error::Malformed(format!(
                "expected {} entries for cutoff {cutoff}, got {}",
                dim * dim,
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Malformed(format!("entry {bad} is not a probability")));
        }
        let tail_mass = 1.0 - probs.iter().sum::<f64>();
        if tail_mass < -NEGATIVE_TAIL_SLACK {
            return Err(Error::Malformed(format!("entries sum above one by {}", -tail_mass)));
        }
        Ok(Self {
            probs,
            cutoff,
            tail_mass,
        })
    }

    /// Builds a distribution by evaluating `entry(p, q)` on the lattice.
    pub fn from_fn(cutoff: usize, mut entry: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let dim = cutoff + 1;
        let mut probs = Vec::with_capacity(dim * dim);
        for p in 0..dim {
            for q in 0..dim {
                probs.push(entry(p, q)?);
            }
        }
        Self::from_entries(cutoff, probs)
    }

    /// Diagonal distribution `P(p, q) = δ_pq w_p`.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Malformed("empty weight vector".into()));
        }
        let cutoff = weights.len() - 1;
        Self::from_fn(cutoff, |p, q| Ok(if p == q { weights[p] } else { 0.0 }))
    }

    /// Product distribution `P(p, q) = a_p b_q` on a common cutoff.
    pub fn product(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::Malformed("factor lengths must match and be nonzero".into()));
        }
        Self::from_fn(a.len() - 1, |p, q| Ok(a[p] * b[q]))
    }

    /// Fails with [`Error::CutoffTooSmall`] when more than `tail_tol` is missing.
    pub fn require_tail_below(self, tail_tol: f64) -> Result<Self> {
        if self.tail_mass > tail_tol {
            return Err(Error::CutoffTooSmall {
                cutoff: self.cutoff,
                tail_mass: self.tail_mass,
                tail_tol,
            });
        }
        Ok(self)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    /// `1 - Σ P(p, q)` over the stored lattice.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.probs[p * self.dim() + q]
    }

    pub fn row(&self, p: usize) -> &[f64] {
        let dim = self.dim();
        &self.probs[p * dim..(p + 1) * dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Iterates `(p, q, P(p, q))` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let dim = self.dim();
        self.probs
            .iter()
            .enumerate()
            .map(move |(idx, &v)| (idx / dim, idx % dim, v))
    }

    /// Largest entrywise absolute difference; distributions must share a cutoff.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.cutoff != other.cutoff {
            return Err(Error::Malformed(format!(
                "cutoff mismatch: {} vs {}",
                self.cutoff, other.cutoff
            )));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Swaps the two modes: `P'(p, q) = P(q, p)`.
    pub fn transposed(&self) -> Self {
        let dim = self.dim();
        let mut probs = vec![0.0; dim * dim];
        for p in 0..dim {
            for q in 0..dim {
                probs[q * dim + p] = self.probs[p * dim + q];
            }
        }
        Self {
            probs,
            cutoff: self.cutoff,
            tail_mass: self.tail_mass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_wrong_shape() {
        assert!(JointDistribution::from_entries(1, vec![0.5, 0.5, 0.0]).is_err());
        assert!(JointDistribution::from_entries(1, vec![0.5, 0.6, -0.1, 0.0]).is_err());
        assert!(JointDistribution::from_entries(0, vec![1.5]).is_err());
    }

    #[test]
    fn tail_mass_bookkeeping() {
        let j = JointDistribution::from_entries(1, vec![0.25, 0.25, 0.25, 0.2]).unwrap();
        assert!((j.tail_mass() - 0.05).abs() < 1e-15);
        assert!(j.clone().require_tail_below(0.1).is_ok());
        assert!(matches!(
            j.require_tail_below(0.01),
            Err(Error::CutoffTooSmall { cutoff: 1, .. })
        ));
    }

    #[test]
    fn transpose_swaps_modes() {
        let j = JointDistribution::from_entries(1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = j.transposed();
        assert_eq!(t.get(0, 1), 0.3);
        assert_eq!(t.get(1, 0), 0.2);
        assert_eq!(t.transposed(), j);
    }
}
