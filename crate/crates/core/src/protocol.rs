//! Threshold decoding and capacity optimization.
//!
//! Each receiver turns its photon count into a symbol by comparing it against a
//! shared, strictly increasing list of integer thresholds: symbol 0 for
//! `n <= T_1`, symbol `k` for `T_k < n <= T_{k+1}` and symbol `M-1` above the
//! last threshold. The capacity is the mutual information of the resulting
//! symbol table maximized over all threshold tuples below the cutoff.

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::JointDistribution;
use crate::error::{invalid, Error, Result};
use crate::info::{self, SymbolTable};
use crate::loss::{ChannelParams, LossyJoint};
use crate::states::{Source, StateKind};

/// Two threshold tuples whose mutual informations differ by less than this
/// are considered tied; the lexicographically smaller tuple wins.
pub const TIE_TOLERANCE_BITS: f64 = 1e-12;

/// Strictly increasing decoding thresholds `T_1 < ... < T_{M-1}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ThresholdSet(Vec<usize>);

impl ThresholdSet {
    pub fn new(thresholds: Vec<usize>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::AlphabetTooSmall(1));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnorderedThresholds(thresholds));
        }
        Ok(Self(thresholds))
    }

    pub fn binary(threshold: usize) -> Self {
        Self(vec![threshold])
    }

    /// `(0, 1, ..., alphabet - 2)`.
    pub fn first(alphabet: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::AlphabetTooSmall(alphabet));
        }
        Ok(Self((0..alphabet - 1).collect()))
    }

    pub fn alphabet(&self) -> usize {
        self.0.len() + 1
    }

    pub fn thresholds(&self) -> &[usize] {
        &self.0
    }

    /// True when the thresholds are consecutive integers.
    pub fn is_consecutive(&self) -> bool {
        self.0.windows(2).all(|w| w[1] == w[0] + 1)
    }
}

/// Symbol assigned to photon count `n`.
#[inline]
pub fn decode(n: usize, thresholds: &ThresholdSet) -> usize {
    thresholds.0.partition_point(|&t| t < n)
}

/// Symbol table by direct summation of `P(p, q)` over each decoding bin pair.
///
/// The table is conditioned on both counts lying within the cutoff, so the
/// truncated tail mass is spread proportionally rather than dropped.
pub fn symbol_table(joint: &JointDistribution, thresholds: &ThresholdSet) -> Result<SymbolTable> {
    let m = thresholds.alphabet();
    let bins: Vec<usize> = (0..joint.dim()).map(|n| decode(n, thresholds)).collect();
    let mut probs = vec![0.0; m * m];
    for (p, q, v) in joint.entries() {
        probs[bins[p] * m + bins[q]] += v;
    }
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|v| *v /= total);
    }
    SymbolTable::new(m, probs)
}

/// Maximized mutual information and the thresholds achieving it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityResult {
    pub capacity_bits: f64,
    pub best_thresholds: ThresholdSet,
    pub table: SymbolTable,
    pub n_evaluated: u64,
}

/// 2-D inclusive prefix sums, `(dim+1)²`, with a zero first row and column.
struct PrefixSums {
    stride: usize,
    sums: Vec<f64>,
}

impl PrefixSums {
    fn new(joint: &JointDistribution) -> Self {
        let dim = joint.dim();
        let stride = dim + 1;
        let mut sums = vec![0.0; stride * stride];
        for p in 0..dim {
            let mut row_acc = 0.0;
            for q in 0..dim {
                row_acc += joint.get(p, q);
                sums[(p + 1) * stride + q + 1] = sums[p * stride + q + 1] + row_acc;
            }
        }
        Self { stride, sums }
    }

    /// Mass of rows `r0..r1` and columns `c0..c1`.
    #[inline]
    fn rect(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let s = &self.sums;
        let w = self.stride;
        let v = s[r1 * w + c1] - s[r0 * w + c1] - s[r1 * w + c0] + s[r0 * w + c0];
        v.max(0.0)
    }
}

/// Mutual information for bins with edges `edges` (length `M + 1`).
fn mi_for_edges(prefix: &PrefixSums, edges: &[usize], scratch: &mut [f64]) -> f64 {
    let m = edges.len() - 1;
    let mut rows = [0.0f64; MAX_ALPHABET];
    let mut cols = [0.0f64; MAX_ALPHABET];
    let (rows, cols) = (&mut rows[..m], &mut cols[..m]);
    for i in 0..m {
        for j in 0..m {
            let v = prefix.rect(edges[i], edges[i + 1], edges[j], edges[j + 1]);
            scratch[i * m + j] = v;
            rows[i] += v;
            cols[j] += v;
        }
    }
    info::mutual_information_raw(m, &scratch[..m * m], rows, cols)
}

/// Largest alphabet the exhaustive search accepts.
pub const MAX_ALPHABET: usize = 16;

/// Exhaustive search over every strictly increasing `(M-1)`-tuple of
/// thresholds in `[0, cutoff)`.
///
/// Ties within [`TIE_TOLERANCE_BITS`] go to the lexicographically smallest
/// tuple. When the cutoff cannot host `M-1` distinct thresholds the result
/// falls back to `(0, 1, ..., M-2)`.
pub fn capacity(joint: &JointDistribution, alphabet: usize) -> Result<CapacityResult> {
    if alphabet < 2 {
        return Err(Error::AlphabetTooSmall(alphabet));
    }
    if alphabet > MAX_ALPHABET {
        return Err(invalid("alphabet", alphabet as f64, "exhaustive search supports at most 16 symbols"));
    }
    let slots = joint.cutoff();
    let k = alphabet - 1;
    if slots < k {
        let best = ThresholdSet::first(alphabet)?;
        let table = symbol_table(joint, &best)?;
        return Ok(CapacityResult {
            capacity_bits: info::mutual_information(&table),
            best_thresholds: best,
            table,
            n_evaluated: 0,
        });
    }

    let prefix = PrefixSums::new(joint);
    let dim = joint.dim();

    // Each first threshold is an independent chunk; chunks come back in order.
    let chunks: Vec<(f64, Vec<usize>, u64)> = (0..=slots - k)
        .into_par_iter()
        .map(|first| {
            let mut tuple: Vec<usize> = (0..k).map(|i| first + i).collect();
            let mut edges = vec![0usize; alphabet + 1];
            edges[alphabet] = dim;
            let mut scratch = vec![0.0; alphabet * alphabet];
            let mut best = (f64::NEG_INFINITY, tuple.clone());
            let mut count = 0u64;
            loop {
                for (e, t) in edges[1..alphabet].iter_mut().zip(&tuple) {
                    *e = t + 1;
                }
                let mi = mi_for_edges(&prefix, &edges, &mut scratch);
                count += 1;
                if mi > best.0 + TIE_TOLERANCE_BITS {
                    best = (mi, tuple.clone());
                }
                // Odometer over positions 1..k with tuple[0] pinned.
                let mut pos = k;
                loop {
                    if pos <= 1 {
                        return (best.0, best.1, count);
                    }
                    pos -= 1;
                    if tuple[pos] < slots - (k - pos) {
                        tuple[pos] += 1;
                        for i in pos + 1..k {
                            tuple[i] = tuple[i - 1] + 1;
                        }
                        break;
                    }
                }
            }
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut n_evaluated = 0u64;
    for (mi, tuple, count) in chunks {
        n_evaluated += count;
        if best.as_ref().is_none_or(|(b, _)| mi > b + TIE_TOLERANCE_BITS) {
            best = Some((mi, tuple));
        }
    }
    let (_, tuple) = best.expect("at least one threshold tuple");
    let best_thresholds = ThresholdSet::new(tuple)?;
    let table = symbol_table(joint, &best_thresholds)?;
    Ok(CapacityResult {
        capacity_bits: info::mutual_information(&table),
        best_thresholds,
        table,
        n_evaluated,
    })
}

/// One grid point of a capacity sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Total two-mode mean photon number at the input.
    pub mean_total: f64,
    /// Overall transmissivity `√(η₁ η₂)`.
    pub eta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub capacity_bits: f64,
    pub thresholds: ThresholdSet,
    pub cutoff: usize,
    pub tail_mass: f64,
    /// Binary alphabets only: the threshold `⌊η₁ N / 2⌋` (integer part of the
    /// received mode mean) and the mutual information it yields.
    pub mean_threshold: Option<(usize, f64)>,
}

/// Capacity of `source` through `channel`.
pub fn capacity_point(
    source: &Source,
    channel: &ChannelParams,
    alphabet: usize,
    tail_tol: f64,
) -> Result<SweepRow> {
    let cutoff = source.auto_cutoff(tail_tol)?;
    let joint = LossyJoint::new(*source, *channel)?.distribution(cutoff, tail_tol)?;
    let result = capacity(&joint, alphabet)?;
    let mean_total = source.total_mean()?;
    let mean_threshold = if alphabet == 2 {
        let t = (channel.eta1() * mean_total / 2.0).floor() as usize;
        let table = symbol_table(&joint, &ThresholdSet::binary(t))?;
        Some((t, info::mutual_information(&table)))
    } else {
        None
    };
    Ok(SweepRow {
        mean_total,
        eta: channel.overall(),
        eta1: channel.eta1(),
        eta2: channel.eta2(),
        capacity_bits: result.capacity_bits,
        thresholds: result.best_thresholds,
        cutoff,
        tail_mass: joint.tail_mass(),
        mean_threshold,
    })
}

/// Symmetric-channel sweep; rows are ordered by mean, then by `eta`.
pub fn capacity_sweep(
    kind: StateKind,
    means_total: &[f64],
    etas: &[f64],
    alphabet: usize,
    tail_tol: f64,
) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, f64)> = means_total
        .iter()
        .flat_map(|&n| etas.iter().map(move |&e| (n, e)))
        .collect();
    points
        .into_par_iter()
        .map(|(n, eta)| {
            let source = Source::from_total_mean(kind, n)?;
            let mut row = capacity_point(&source, &ChannelParams::symmetric(eta)?, alphabet, tail_tol)?;
            row.mean_total = n;
            Ok(row)
        })
        .collect()
}

/// Sweeps the split of a fixed overall transmissivity `eta` between the arms:
/// `η₂ = η² / η₁` for each `η₁` in `[η², 1]`.
pub fn asymmetry_sweep(
    kind: StateKind,
    mean_total: f64,
    eta_overall: f64,
    eta1_grid: &[f64],
    alphabet: usize,
    tail_tol: f64,
) -> Result<Vec<SweepRow>> {
    if !(eta_overall > 0.0 && eta_overall <= 1.0) {
        return Err(invalid("eta", eta_overall, "overall transmissivity must lie in (0, 1]"));
    }
    let floor = eta_overall * eta_overall;
    let channels: Vec<ChannelParams> = eta1_grid
        .iter()
        .map(|&eta1| {
            if !(eta1 >= floor * (1.0 - 1e-12) && eta1 <= 1.0) {
                return Err(invalid("eta1", eta1, "must lie in [eta^2, 1]"));
            }
            if (eta1 - eta_overall).abs() <= 4.0 * f64::EPSILON * eta_overall {
                return ChannelParams::symmetric(eta_overall);
            }
            let eta1 = eta1.max(floor);
            ChannelParams::new(eta1, (floor / eta1).min(1.0))
        })
        .collect::<Result<_>>()?;
    let source = Source::from_total_mean(kind, mean_total)?;
    channels
        .into_par_iter()
        .map(|ch| {
            let mut row = capacity_point(&source, &ch, alphabet, tail_tol)?;
            row.mean_total = mean_total;
            row.eta = eta_overall;
            Ok(row)
        })
        .collect()
}

/// Second-order response of the coincidence probability `P(n, n)` to arm asymmetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureEstimate {
    pub n: usize,
    /// Coefficient of `δη²` estimated with step `δη`.
    pub coefficient: f64,
    /// Same estimate with step `δη / 2`.
    pub coefficient_half_step: f64,
    /// Richardson combination `(4 A(δ/2) − A(δ)) / 3`.
    pub extrapolated: f64,
    /// False when halving the step moves the estimate by more than [`CURVATURE_STABILITY`].
    pub stable: bool,
}

/// Relative change under step halving above which a curvature estimate is flagged.
pub const CURVATURE_STABILITY: f64 = 1e-2;

/// Arms `(η₁, η₂)` with `√(η₁ η₂) = eta` and `η₁ − η₂ = delta`.
pub fn asymmetric_arms(eta: f64, delta: f64) -> Result<ChannelParams> {
    let eta1 = 0.5 * delta + (eta * eta + 0.25 * delta * delta).sqrt();
    ChannelParams::new(eta1, eta1 - delta)
}

fn curvature_at(joint_sym: f64, source: &Source, eta: f64, n: usize, delta: f64) -> Result<f64> {
    let ch = asymmetric_arms(eta, delta)?;
    let forward = LossyJoint::new(*source, ch)?.entry(n, n)?;
    let mirrored = LossyJoint::new(*source, ch.swapped())?.entry(n, n)?;
    Ok((forward + mirrored - 2.0 * joint_sym) / (2.0 * delta * delta))
}

/// Estimates `A_n` in `P_{η₁,η₂}(n, n) ≈ P_{η,η}(n, n) + A_n δη²` at fixed
/// overall transmissivity `eta = √(η₁ η₂)` by a symmetric finite difference.
pub fn coincidence_curvature(source: &Source, eta: f64, n: usize, delta: f64) -> Result<CurvatureEstimate> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(invalid("delta", delta, "asymmetry step must be finite and >= 0"));
    }
    let sym = LossyJoint::new(*source, ChannelParams::symmetric(eta)?)?.entry(n, n)?;
    if delta == 0.0 {
        return Ok(CurvatureEstimate {
            n,
            coefficient: 0.0,
            coefficient_half_step: 0.0,
            extrapolated: 0.0,
            stable: true,
        });
    }
    let full = curvature_at(sym, source, eta, n, delta)?;
    let half = curvature_at(sym, source, eta, n, 0.5 * delta)?;
    let scale = full.abs().max(half.abs());
    let stable = scale == 0.0 || (full - half).abs() <= CURVATURE_STABILITY * scale;
    Ok(CurvatureEstimate {
        n,
        coefficient: full,
        coefficient_half_step: half,
        extrapolated: (4.0 * half - full) / 3.0,
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{self, DEFAULT_TAIL_TOL};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn decoding_bins() {
        let t = ThresholdSet::binary(3);
        assert_eq!(decode(3, &t), 0);
        assert_eq!(decode(4, &t), 1);
        assert_eq!(decode(0, &t), 0);
        let t4 = ThresholdSet::new(vec![2, 5, 9]).unwrap();
        assert_eq!(decode(7, &t4), 2);
        assert_eq!(decode(2, &t4), 0);
        assert_eq!(decode(3, &t4), 1);
        assert_eq!(decode(10, &t4), 3);
    }

    #[test]
    fn threshold_validation() {
        assert!(matches!(ThresholdSet::new(vec![3, 3]), Err(Error::UnorderedThresholds(_))));
        assert!(ThresholdSet::new(vec![]).is_err());
        assert!(ThresholdSet::new(vec![0, 4, 5]).unwrap().alphabet() == 4);
        assert!(ThresholdSet::new(vec![4, 5, 6]).unwrap().is_consecutive());
        assert!(!ThresholdSet::new(vec![4, 5, 7]).unwrap().is_consecutive());
    }

    #[test]
    fn ideal_pnes_table_is_diagonal() {
        let x = states::x_for_mean(6.0).unwrap();
        let cutoff = states::auto_cutoff(StateKind::Twb, x, DEFAULT_TAIL_TOL).unwrap();
        let j = states::twb_coefficients(x, cutoff, DEFAULT_TAIL_TOL).unwrap().joint().unwrap();
        for t in [0, 1, 4, 10] {
            let table = symbol_table(&j, &ThresholdSet::binary(t)).unwrap();
            assert_eq!(table.off_diagonal_mass(), 0.0);
            assert!((table.get(0, 0) + table.get(1, 1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn product_distribution_gives_product_table() {
        let f = [0.3, 0.2, 0.4, 0.1];
        let j = JointDistribution::product(&f, &f).unwrap();
        let table = symbol_table(&j, &ThresholdSet::binary(1)).unwrap();
        assert_relative_eq!(table.get(0, 1), 0.5 * 0.5, max_relative = 1e-14);
        assert!(info::mutual_information(&table).abs() < 1e-15);
    }

    #[test]
    fn perfect_binary_source() {
        let j = JointDistribution::diagonal(&[0.5, 0.5]).unwrap();
        let r = capacity(&j, 2).unwrap();
        assert_eq!(r.capacity_bits, 1.0);
        assert_eq!(r.best_thresholds.thresholds(), &[0]);
    }

    #[test]
    fn ideal_twb_binary_capacity() {
        // p(n > T) = x^{2(T+1)} with x² = 1/3: best at T = 0 with H2(1/3).
        let x = (1.0f64 / 3.0).sqrt();
        let cutoff = states::auto_cutoff(StateKind::Twb, x, DEFAULT_TAIL_TOL).unwrap();
        let j = states::twb_coefficients(x, cutoff, DEFAULT_TAIL_TOL).unwrap().joint().unwrap();
        let r = capacity(&j, 2).unwrap();
        assert_eq!(r.best_thresholds.thresholds(), &[0]);
        assert!((r.capacity_bits - 0.9182958340544895).abs() < 1e-9);
        assert_eq!(r.n_evaluated, cutoff as u64);
    }

    #[test]
    fn degenerate_distribution() {
        let mut probs = vec![0.0; 25];
        probs[2 * 5 + 2] = 1.0;
        let j = JointDistribution::from_entries(4, probs).unwrap();
        for m in [2, 4] {
            let r = capacity(&j, m).unwrap();
            assert_eq!(r.capacity_bits, 0.0);
            assert_eq!(r.best_thresholds, ThresholdSet::first(m).unwrap());
        }
        let vacuum = JointDistribution::diagonal(&[1.0]).unwrap();
        let r = capacity(&vacuum, 4).unwrap();
        assert_eq!(r.capacity_bits, 0.0);
        assert_eq!(r.best_thresholds.thresholds(), &[0, 1, 2]);
    }

    #[test]
    fn search_counts_all_tuples() {
        let w: Vec<f64> = (0..=12).map(|n| 0.5f64.powi(n + 1)).collect();
        let mut w = w;
        let rest: f64 = 1.0 - w.iter().sum::<f64>();
        w[0] += rest;
        let j = JointDistribution::diagonal(&w).unwrap();
        assert_eq!(capacity(&j, 2).unwrap().n_evaluated, 12);
        assert_eq!(capacity(&j, 3).unwrap().n_evaluated, 66);
        assert_eq!(capacity(&j, 4).unwrap().n_evaluated, 220);
    }

    #[test]
    fn search_matches_brute_force_with_direct_tables() {
        let source = Source::from_total_mean(StateKind::Twb, 3.0).unwrap();
        let ch = ChannelParams::new(0.8, 0.65).unwrap();
        let cutoff = source.auto_cutoff(1e-6).unwrap();
        let j = LossyJoint::new(source, ch).unwrap().distribution(cutoff, 1e-6).unwrap();
        let r = capacity(&j, 3).unwrap();
        let mut best = (f64::NEG_INFINITY, vec![]);
        for a in 0..cutoff {
            for b in a + 1..cutoff {
                let t = ThresholdSet::new(vec![a, b]).unwrap();
                let mi = info::mutual_information(&symbol_table(&j, &t).unwrap());
                if mi > best.0 + TIE_TOLERANCE_BITS {
                    best = (mi, vec![a, b]);
                }
            }
        }
        assert_eq!(r.best_thresholds.thresholds(), best.1.as_slice());
        assert!((r.capacity_bits - best.0).abs() < 1e-13);
    }

    #[test]
    fn curvature_zero_step() {
        let s = Source::from_total_mean(StateKind::Twb, 10.0).unwrap();
        let c = coincidence_curvature(&s, 0.8, 3, 0.0).unwrap();
        assert_eq!(c.coefficient, 0.0);
        assert!(c.stable);
        assert!(coincidence_curvature(&s, 0.8, 3, -1e-3).is_err());
    }

    #[test]
    fn asymmetric_arms_keep_overall_loss() {
        let ch = asymmetric_arms(0.8, 0.1).unwrap();
        assert_relative_eq!(ch.overall(), 0.8, max_relative = 1e-14);
        assert_relative_eq!(ch.eta1() - ch.eta2(), 0.1, max_relative = 1e-12);
        assert!(asymmetric_arms(0.99, 0.5).is_err());
    }

    #[test]
    fn asymmetry_sweep_rejects_out_of_range() {
        assert!(asymmetry_sweep(StateKind::Tmc, 10.0, 0.8, &[0.5], 2, DEFAULT_TAIL_TOL).is_err());
        assert!(asymmetry_sweep(StateKind::Tmc, 10.0, 0.8, &[1.1], 2, DEFAULT_TAIL_TOL).is_err());
    }

    fn random_joint() -> impl Strategy<Value = JointDistribution> {
        (2usize..9).prop_flat_map(|cutoff| {
            let dim = cutoff + 1;
            prop::collection::vec(0.0f64..1.0, dim * dim).prop_map(move |raw| {
                let total: f64 = raw.iter().sum::<f64>().max(1e-9);
                JointDistribution::from_entries(cutoff, raw.iter().map(|v| v / total).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn bins_partition_the_lattice(j in random_joint(), a in 0usize..4, gap in 1usize..4) {
            let t = ThresholdSet::new(vec![a, a + gap]).unwrap();
            let table = symbol_table(&j, &t).unwrap();
            let total: f64 = table.as_slice().iter().sum();
            prop_assert!((total - j.total_mass()).abs() < 1e-14);
        }

        #[test]
        fn quaternary_dominates_binary(j in random_joint()) {
            let c2 = capacity(&j, 2).unwrap().capacity_bits;
            let c4 = capacity(&j, 4).unwrap().capacity_bits;
            prop_assert!(c4 >= c2 - 1e-12);
            prop_assert!(c4 <= 2.0 + 1e-12);
        }

        #[test]
        fn capacity_invariant_under_mode_swap(j in random_joint()) {
            let a = capacity(&j, 3).unwrap().capacity_bits;
            let b = capacity(&j.transposed(), 3).unwrap().capacity_bits;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
