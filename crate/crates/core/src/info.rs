//! Moments, correlation index, Mandel parameter and mutual information.

use serde::Serialize;

use crate::distribution::JointDistribution;
use crate::error::{Error, Result};

/// Negative variances down to this size are treated as rounding noise.
const VARIANCE_SLACK: f64 = 1e-12;

/// Row and column sums of `P(p, q)`: the photon-number distributions of mode 1 and mode 2.
pub fn marginals(joint: &JointDistribution) -> (Vec<f64>, Vec<f64>) {
    let dim = joint.dim();
    let mut first = vec![0.0; dim];
    let mut second = vec![0.0; dim];
    for (p, q, v) in joint.entries() {
        first[p] += v;
        second[q] += v;
    }
    (first, second)
}

/// First and second photon-number moments of a joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
}

pub fn moments(joint: &JointDistribution) -> Moments {
    let (mut m1, mut m2, mut s1, mut s2, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, q, v) in joint.entries() {
        if v == 0.0 {
            continue;
        }
        let (p, q) = (p as f64, q as f64);
        m1 += p * v;
        m2 += q * v;
        s1 += p * p * v;
        s2 += q * q * v;
        s12 += p * q * v;
    }
    let clamp = |v: f64| if v < 0.0 && v > -VARIANCE_SLACK { 0.0 } else { v };
    Moments {
        mean1: m1,
        mean2: m2,
        var1: clamp(s1 - m1 * m1),
        var2: clamp(s2 - m2 * m2),
        cov: s12 - m1 * m2,
    }
}

/// Pearson correlation of the two photon numbers.
pub fn correlation_index(m: &Moments) -> Result<f64> {
    if !(m.var1 > 0.0) || !(m.var2 > 0.0) {
        return Err(Error::ZeroVariance("correlation index"));
    }
    Ok(m.cov / (m.var1 * m.var2).sqrt())
}

/// `Q = σ² / ⟨n⟩ − 1` of a single-mode photon-number distribution.
pub fn mandel_q(dist: &[f64]) -> Result<f64> {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (n, &w) in dist.iter().enumerate() {
        let n = n as f64;
        mean += n * w;
        second += n * n * w;
    }
    if !(mean > 0.0) {
        return Err(Error::ZeroEnergy("Mandel parameter"));
    }
    Ok((second - mean * mean) / mean - 1.0)
}

/// Joint probabilities `p_ij` that receiver 1 decodes `i` and receiver 2 decodes `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolTable {
    alphabet: usize,
    probs: Vec<f64>,
}

impl SymbolTable {
    /// Tolerance on `|Σ p_ij − 1|`.
    pub const NORMALIZATION_TOL: f64 = 1e-9;

    /// Row-major `alphabet × alphabet` table.
    pub fn new(alphabet: usize, probs: Vec<f64>) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::AlphabetTooSmall(alphabet));
        }
        if probs.len() != alphabet * alphabet {
            return Err(Error::Malformed(format!(
                "symbol table for M = {alphabet} needs {} entries, got {}",
                alphabet * alphabet,
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Malformed(format!("negative symbol probability {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self { alphabet, probs })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.alphabet + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Total mass on `i != j`.
    pub fn off_diagonal_mass(&self) -> f64 {
        let m = self.alphabet;
        (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| self.get(i, j))
            .sum()
    }

    /// Row sums `q_i` and column sums `r_j`.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.alphabet;
        let mut rows = vec![0.0; m];
        let mut cols = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                rows[i] += self.get(i, j);
                cols[j] += self.get(i, j);
            }
        }
        (rows, cols)
    }

    /// Applies the same symbol relabeling to both receivers.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let m = self.alphabet;
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&k| k >= m || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::Malformed(format!("{perm:?} is not a permutation of 0..{m}")));
        }
        let mut probs = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                probs[perm[i] * m + perm[j]] = self.get(i, j);
            }
        }
        Ok(Self { alphabet: m, probs })
    }
}

/// Mutual information in bits between the two decoded alphabets.
pub fn mutual_information(table: &SymbolTable) -> f64 {
    let (rows, cols) = table.marginals();
    mutual_information_raw(table.alphabet(), table.as_slice(), &rows, &cols)
}

/// Mutual information of a row-major table with precomputed marginals.
/// Cells with zero probability or a zero marginal product contribute nothing.
pub(crate) fn mutual_information_raw(m: usize, probs: &[f64], rows: &[f64], cols: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let p = probs[i * m + j];
            let denom = rows[i] * cols[j];
            if p > 0.0 && denom > 0.0 {
                total += p * (p / denom).log2();
            }
        }
    }
    total.max(0.0)
}
