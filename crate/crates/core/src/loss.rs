//! Propagation of correlated states through independent pure-loss channels.
//!
//! Three routes to the output joint photon-number distribution live here:
//!
//! * closed forms for each state family ([`joint_tmc`], [`joint_twb`], [`joint_tth`]),
//! * the binomial thinning map ([`thinning_oracle`]), which is what the Kraus
//!   sum reduces to once the Kronecker deltas of the Kraus elements are applied,
//! * the literal Kraus double sum ([`kraus_reference`]), slow and only meant
//!   for tiny cutoffs.
//!
//! The closed forms carry half-integer powers of `1 − η_j`. They are only
//! evaluated in the combined form where every exponent is a nonnegative
//! integer, which also makes `η_j = 1` a regular point rather than a 0/0 limit.

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::JointDistribution;
use crate::error::{invalid, Error, Result};
use crate::specfun::{self, ln_pow, log_binomial, log_factorial, SeriesConfig};
use crate::states::{self, PhotonProfile, Source, TthSpec};

/// Transmissivities of the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams {
    eta1: f64,
    eta2: f64,
}

impl ChannelParams {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        check_eta("eta1", eta1)?;
        check_eta("eta2", eta2)?;
        Ok(Self { eta1, eta2 })
    }

    pub fn symmetric(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }

    pub fn lossless() -> Self {
        Self {
            eta1: 1.0,
            eta2: 1.0,
        }
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    /// Overall transmissivity `√(η₁ η₂)`.
    pub fn overall(&self) -> f64 {
        (self.eta1 * self.eta2).sqrt()
    }

    pub fn swapped(&self) -> Self {
        Self {
            eta1: self.eta2,
            eta2: self.eta1,
        }
    }
}

fn check_eta(name: &'static str, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid(name, eta, "transmissivity must lie in (0, 1]"));
    }
    Ok(())
}

/// Fock matrix element `⟨p| A_n |i⟩` of the `n`-th Kraus operator of a loss
/// channel with transmissivity `eta`.
pub fn kraus_element(p: usize, n: usize, i: usize, eta: f64) -> Result<f64> {
    check_eta("eta", eta)?;
    if i != p + n {
        return Ok(0.0);
    }
    // (1/η − 1)^{n/2} η^{(p+n)/2} = (1 − η)^{n/2} η^{p/2}
    let ln = 0.5
        * (ln_pow(1.0 - eta, n) + ln_pow(eta, p) - log_factorial(n) + log_factorial(p + n)
            - log_factorial(p));
    Ok(ln.exp())
}

/// `C(n, k) η^k (1 − η)^{n−k}`.
pub fn binomial_pmf(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    (log_binomial(n, k) + ln_pow(eta, k) + ln_pow(1.0 - eta, n - k)).exp()
}

/// Output distribution obtained by independent binomial thinning of each arm:
/// `P_out(p, q) = Σ_{n,m} P_in(n, m) Bin(n, p; η₁) Bin(m, q; η₂)`.
pub fn thinning_oracle(input: &JointDistribution, channel: &ChannelParams) -> Result<JointDistribution> {
    let dim = input.dim();
    let kernel = |eta: f64| -> Vec<f64> {
        let mut b = vec![0.0; dim * dim];
        for n in 0..dim {
            for k in 0..=n {
                b[n * dim + k] = binomial_pmf(n, k, eta);
            }
        }
        b
    };
    let b1 = kernel(channel.eta1);
    let b2 = kernel(channel.eta2);

    // half[p][m] = Σ_n B1[n][p] P[n][m]
    let half: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|p| {
            let mut row = vec![0.0; dim];
            for n in p..dim {
                let w = b1[n * dim + p];
                if w == 0.0 {
                    continue;
                }
                for (acc, v) in row.iter_mut().zip(input.row(n)) {
                    *acc += w * v;
                }
            }
            row
        })
        .collect();
    // out[p][q] = Σ_m half[p][m] B2[m][q]
    let probs: Vec<f64> = half
        .par_iter()
        .flat_map_iter(|row| {
            let b2 = &b2;
            (0..dim).map(move |q| (q..dim).map(|m| row[m] * b2[m * dim + q]).sum::<f64>())
        })
        .collect();
    JointDistribution::from_entries(input.cutoff(), probs)
}

/// One pure state of an input ensemble: its weight and its amplitudes on `|i, j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureComponent {
    pub weight: f64,
    pub amplitudes: Vec<((usize, usize), f64)>,
}

/// `Σ c_n |n, n⟩` as a single-component ensemble.
pub fn pnes_ensemble(profile: &PhotonProfile) -> Vec<PureComponent> {
    vec![PureComponent {
        weight: 1.0,
        amplitudes: profile
            .coefficients()
            .iter()
            .enumerate()
            .map(|(n, &c)| ((n, n), c))
            .collect(),
    }]
}

/// The two-mode thermal state as a mixture of beam-split Fock states
/// `|s⟩ ⊗ |0⟩ → Σ_k √(C(s,k) / 2^s) |k, s−k⟩`, with thermal weights
/// `N^s / (1+N)^{s+1}`, projected onto `0..=cutoff` in each mode.
pub fn tth_ensemble(spec: TthSpec, cutoff: usize) -> Vec<PureComponent> {
    let n = spec.mean_total;
    (0..=2 * cutoff)
        .map(|s| {
            let weight = (ln_pow(n, s) - (s as f64 + 1.0) * (1.0 + n).ln()).exp();
            let amplitudes = (s.saturating_sub(cutoff)..=s.min(cutoff))
                .map(|k| {
                    let amp = (0.5 * (log_binomial(s, k) - s as f64 * 2f64.ln())).exp();
                    ((k, s - k), amp)
                })
                .collect();
            PureComponent { weight, amplitudes }
        })
        .collect()
}

/// Literal Kraus evaluation of `⟨p,q| Σ_{n,k} A_n A_k ρ A_k† A_n† |p,q⟩`.
///
/// Every Kraus index, every input amplitude pair and every output cell is
/// visited; nothing is collapsed in advance. Cost grows like `cutoff^6`.
pub fn kraus_reference(
    ensemble: &[PureComponent],
    channel: &ChannelParams,
    cutoff: usize,
) -> Result<JointDistribution> {
    let dim = cutoff + 1;
    // a1[p][n][i] = ⟨p|A_n|i⟩ on arm 1, likewise a2 on arm 2.
    let table = |eta: f64| -> Result<Vec<f64>> {
        let mut t = vec![0.0; dim * dim * dim];
        for p in 0..dim {
            for n in 0..dim {
                for i in 0..dim {
                    t[(p * dim + n) * dim + i] = kraus_element(p, n, i, eta)?;
                }
            }
        }
        Ok(t)
    };
    let a1 = table(channel.eta1)?;
    let a2 = table(channel.eta2)?;
    let at = |t: &[f64], p: usize, n: usize, i: usize| t[(p * dim + n) * dim + i];

    for comp in ensemble {
        if let Some(((i, j), _)) = comp.amplitudes.iter().find(|((i, j), _)| *i > cutoff || *j > cutoff) {
            return Err(Error::Malformed(format!(
                "amplitude on |{i}, {j}> lies beyond cutoff {cutoff}"
            )));
        }
    }

    JointDistribution::from_fn(cutoff, |p, q| {
        let mut total = 0.0;
        for n in 0..dim {
            for k in 0..dim {
                for comp in ensemble {
                    let mut acc = 0.0;
                    for &((i1, j1), c1) in &comp.amplitudes {
                        for &((i2, j2), c2) in &comp.amplitudes {
                            acc += c1
                                * c2
                                * at(&a1, p, n, i1)
                                * at(&a2, q, k, j1)
                                * at(&a1, p, n, i2)
                                * at(&a2, q, k, j2);
                        }
                    }
                    total += comp.weight * acc;
                }
            }
        }
        Ok(total)
    })
}

/// Closed-form evaluator for single entries of a lossy joint distribution.
#[derive(Debug, Clone)]
pub struct LossyJoint {
    source: Source,
    channel: ChannelParams,
    cfg: SeriesConfig,
    // Family-dependent constant term of the log-probability.
    ln_const: f64,
}

impl LossyJoint {
    pub fn new(source: Source, channel: ChannelParams) -> Result<Self> {
        Self::with_config(source, channel, SeriesConfig::default())
    }

    pub fn with_config(source: Source, channel: ChannelParams, cfg: SeriesConfig) -> Result<Self> {
        source.validate()?;
        let ln_const = match source {
            Source::Tmc { lambda } => -specfun::ln_bessel_i(0, 2.0 * lambda, &cfg)?,
            Source::Twb { x } => (1.0 - x * x).ln(),
            Source::Tth { .. } => 2f64.ln(),
        };
        Ok(Self {
            source,
            channel,
            cfg,
            ln_const,
        })
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn channel(&self) -> ChannelParams {
        self.channel
    }

    /// `P(p, q)` after loss.
    pub fn entry(&self, p: usize, q: usize) -> Result<f64> {
        let (e1, e2) = (self.channel.eta1, self.channel.eta2);
        let (u, v) = (1.0 - e1, 1.0 - e2);
        let arm_gain = ln_pow(e1, p) + ln_pow(e2, q);
        let d = p.abs_diff(q);
        let ln = match self.source {
            Source::Tmc { lambda } => {
                // λ^{p+q} η₁^p η₂^q / (p! q!) · (λ w)^d Σ_k (λ² u v)^k / (k! (k+d)!),
                // with w the loss factor of the arm that received fewer photons.
                let w = if p >= q { v } else { u };
                self.ln_const + ln_pow(lambda, p + q) + arm_gain
                    - log_factorial(p)
                    - log_factorial(q)
                    + ln_pow(lambda * w, d)
                    + specfun::ln_bessel_series(d, lambda * lambda * u * v, &self.cfg)?
            }
            Source::Twb { x } => {
                let (hi, lo) = (p.max(q), p.min(q));
                let x2 = x * x;
                self.ln_const
                    + arm_gain
                    + ln_pow(x2, hi)
                    + ln_pow(u, hi - p)
                    + ln_pow(v, hi - q)
                    + log_binomial(hi, lo)
                    + specfun::ln_hyp2f1_equal(hi, d, x2 * u * v, &self.cfg)?
            }
            Source::Tth { mean } => {
                let s = p + q;
                self.ln_const + arm_gain + ln_pow(mean, s)
                    - (s as f64 + 1.0) * (2.0 + mean * (e1 + e2)).ln()
                    + log_binomial(s, p)
            }
        };
        Ok(ln.exp())
    }

    /// The full distribution on `0..=cutoff` squared, rejected if its tail mass exceeds `tail_tol`.
    pub fn distribution(&self, cutoff: usize, tail_tol: f64) -> Result<JointDistribution> {
        let dim = cutoff + 1;
        let rows: Vec<Vec<f64>> = (0..dim)
            .into_par_iter()
            .map(|p| (0..dim).map(|q| self.entry(p, q)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        JointDistribution::from_entries(cutoff, rows.concat())?.require_tail_below(tail_tol)
    }
}

/// Lossy pair-coherent state.
pub fn joint_tmc(lambda: f64, channel: &ChannelParams, cutoff: usize, tail_tol: f64) -> Result<JointDistribution> {
    LossyJoint::new(Source::Tmc { lambda }, *channel)?.distribution(cutoff, tail_tol)
}

/// Lossy twin beam.
pub fn joint_twb(x: f64, channel: &ChannelParams, cutoff: usize, tail_tol: f64) -> Result<JointDistribution> {
    LossyJoint::new(Source::Twb { x }, *channel)?.distribution(cutoff, tail_tol)
}

/// Lossy two-mode thermal state.
pub fn joint_tth(mean_total: f64, channel: &ChannelParams, cutoff: usize, tail_tol: f64) -> Result<JointDistribution> {
    LossyJoint::new(Source::Tth { mean: mean_total }, *channel)?.distribution(cutoff, tail_tol)
}

/// Closed-form lossy distribution for any family.
pub fn joint_lossy(source: &Source, channel: &ChannelParams, cutoff: usize, tail_tol: f64) -> Result<JointDistribution> {
    LossyJoint::new(*source, *channel)?.distribution(cutoff, tail_tol)
}

/// Closed-form correlation index after loss.
///
/// Loss scales the covariance by `η₁ η₂` and each variance by `η_j (1 + η_j Q)`
/// relative to the mean, so for a pair-coherent input with Mandel parameter
/// `Q` the index is `√(η₁η₂) (1 + Q) / √((1 + η₁Q)(1 + η₂Q))`. It reduces to
/// `√(η₁η₂)` only for Poissonian marginals.
pub fn correlation_after_loss(source: &Source, channel: &ChannelParams) -> Result<f64> {
    source.validate()?;
    let (e1, e2) = (channel.eta1, channel.eta2);
    let root = (e1 * e2).sqrt();
    let n = source.total_mean()?;
    if n == 0.0 {
        return Err(Error::ZeroVariance("correlation index"));
    }
    Ok(match source {
        Source::Tmc { .. } => {
            let q = source.ideal_mandel_q()?;
            root * (1.0 + q) / ((1.0 + e1 * q) * (1.0 + e2 * q)).sqrt()
        }
        Source::Twb { .. } => (2.0 + n) * root / ((2.0 + n * e1) * (2.0 + n * e2)).sqrt(),
        Source::Tth { .. } => n * root / ((2.0 + n * e1) * (2.0 + n * e2)).sqrt(),
    })
}

/// Mandel parameters of the two output marginals, `(η₁ Q, η₂ Q)`.
pub fn mandel_after_loss(source: &Source, channel: &ChannelParams) -> Result<(f64, f64)> {
    let q = source.ideal_mandel_q()?;
    Ok((channel.eta1 * q, channel.eta2 * q))
}

/// Input ensemble of `source` truncated at `cutoff`, for [`kraus_reference`].
pub fn ensemble_for(source: &Source, cutoff: usize, tail_tol: f64) -> Result<Vec<PureComponent>> {
    Ok(match *source {
        Source::Tmc { lambda } => pnes_ensemble(&states::tmc_coefficients(lambda, cutoff, tail_tol)?),
        Source::Twb { x } => pnes_ensemble(&states::twb_coefficients(x, cutoff, tail_tol)?),
        Source::Tth { mean } => tth_ensemble(TthSpec::new(mean)?, cutoff),
    })
}
