//! Correlated two-mode states: twin-beam (TWB), pair-coherent (TMC) and
//! the separable two-mode thermal state (TTH), with their lossless statistics.
//!
//! Mean photon numbers are always the two-mode total `N`; each mode carries `N/2`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::distribution::JointDistribution;
use crate::error::{invalid, Error, Result};
use crate::info;
use crate::specfun::{self, log_binomial, log_factorial, SeriesConfig};

/// Largest tolerated omitted probability mass unless a caller says otherwise.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Tmc,
    Twb,
    Tth,
}

impl StateKind {
    pub const ALL: [StateKind; 3] = [StateKind::Tmc, StateKind::Twb, StateKind::Tth];

    pub fn is_pnes(self) -> bool {
        matches!(self, StateKind::Tmc | StateKind::Twb)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StateKind::Tmc => "tmc",
            StateKind::Twb => "twb",
            StateKind::Tth => "tth",
        }
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tmc" => Ok(StateKind::Tmc),
            "twb" => Ok(StateKind::Twb),
            "tth" => Ok(StateKind::Tth),
            other => Err(format!("unknown state kind `{other}` (expected tmc, twb or tth)")),
        }
    }
}

/// A state family together with its native parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Source {
    /// Pair-coherent state with real amplitude `lambda >= 0`.
    Tmc { lambda: f64 },
    /// Twin beam with real `x` in `[0, 1)`.
    Twb { x: f64 },
    /// Two-mode thermal state with total mean photon number `mean`.
    Tth { mean: f64 },
}

impl Source {
    /// Energy-matched constructor from the total mean photon number.
    pub fn from_total_mean(kind: StateKind, total_mean: f64) -> Result<Self> {
        Ok(match kind {
            StateKind::Tmc => Source::Tmc {
                lambda: lambda_for_mean(total_mean)?,
            },
            StateKind::Twb => Source::Twb {
                x: x_for_mean(total_mean)?,
            },
            StateKind::Tth => Source::Tth {
                mean: TthSpec::new(total_mean)?.mean_total,
            },
        })
    }

    pub fn kind(&self) -> StateKind {
        match self {
            Source::Tmc { .. } => StateKind::Tmc,
            Source::Twb { .. } => StateKind::Twb,
            Source::Tth { .. } => StateKind::Tth,
        }
    }

    /// `lambda`, `x` or `N` depending on the family.
    pub fn parameter(&self) -> f64 {
        match *self {
            Source::Tmc { lambda } => lambda,
            Source::Twb { x } => x,
            Source::Tth { mean } => mean,
        }
    }

    pub fn total_mean(&self) -> Result<f64> {
        match *self {
            Source::Tmc { lambda } => tmc_mean_photons(lambda),
            Source::Twb { x } => Ok(twb_mean_photons(x)),
            Source::Tth { mean } => Ok(mean),
        }
    }

    pub fn auto_cutoff(&self, tail_tol: f64) -> Result<usize> {
        auto_cutoff(self.kind(), self.parameter(), tail_tol)
    }

    /// Lossless joint photon-number distribution.
    pub fn ideal_joint(&self, cutoff: usize, tail_tol: f64) -> Result<JointDistribution> {
        match *self {
            Source::Tmc { lambda } => tmc_coefficients(lambda, cutoff, tail_tol)?.joint(),
            Source::Twb { x } => twb_coefficients(x, cutoff, tail_tol)?.joint(),
            Source::Tth { mean } => tth_joint_ideal(TthSpec::new(mean)?, cutoff, tail_tol),
        }
    }

    /// Single-mode Mandel parameter of the lossless state.
    pub fn ideal_mandel_q(&self) -> Result<f64> {
        match *self {
            Source::Tmc { lambda } => tmc_mandel_q(lambda),
            Source::Twb { x } => {
                let n = twb_mean_photons(x);
                if n == 0.0 {
                    return Err(Error::ZeroEnergy("Mandel parameter"));
                }
                Ok(n / 2.0)
            }
            Source::Tth { mean } => mandel_q_ideal(IdealState::Tth(TthSpec::new(mean)?)),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Source::Tmc { lambda } => check_lambda(lambda),
            Source::Twb { x } => check_x(x),
            Source::Tth { mean } => TthSpec::new(mean).map(|_| ()),
        }
    }
}

/// Schmidt coefficients `c_0..=c_cutoff` of a photon-number entangled state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonProfile {
    kind: StateKind,
    parameter: f64,
    coefficients: Vec<f64>,
    tail_mass: f64,
}

impl PhotonProfile {
    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn cutoff(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Omitted mass `Σ_{n > cutoff} c_n²`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Schmidt weights `c_n²`, which are also the single-mode marginal.
    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c * c).collect()
    }

    /// `diag(c_n²)`: the photon-number distribution of the lossless state.
    pub fn joint(&self) -> Result<JointDistribution> {
        JointDistribution::diagonal(&self.weights())
    }
}

/// Parameters of a two-mode thermal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TthSpec {
    pub mean_total: f64,
}

impl TthSpec {
    pub fn new(mean_total: f64) -> Result<Self> {
        if !(mean_total >= 0.0) || !mean_total.is_finite() {
            return Err(invalid("mean_total", mean_total, "must be finite and >= 0"));
        }
        Ok(Self { mean_total })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", lambda, "must be finite and >= 0"));
    }
    Ok(())
}

fn check_x(x: f64) -> Result<()> {
    if !(0.0..1.0).contains(&x) {
        return Err(invalid("x", x, "must lie in [0, 1)"));
    }
    Ok(())
}

fn check_tol(tail_tol: f64) -> Result<()> {
    if !(tail_tol > 0.0) {
        return Err(invalid("tail_tol", tail_tol, "must be positive"));
    }
    Ok(())
}

/// `ln c_n² = 2n ln λ − 2 ln n! − ln I₀(2λ)` for λ > 0.
fn tmc_ln_weight(n: usize, ln_lambda: f64, ln_i0: f64) -> f64 {
    2.0 * n as f64 * ln_lambda - 2.0 * log_factorial(n) - ln_i0
}

/// Weights `c_n²` beyond `cutoff`, summed forward until the geometric bound on
/// what remains is negligible next to the running total.
fn tmc_tail(lambda: f64, cutoff: usize) -> Result<f64> {
    let ln_i0 = specfun::ln_bessel_i(0, 2.0 * lambda, &SeriesConfig::default())?;
    let ln_lambda = lambda.ln();
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    loop {
        let w = tmc_ln_weight(n, ln_lambda, ln_i0).exp();
        tail += w;
        let ratio = lambda * lambda / ((n + 1) as f64 * (n + 1) as f64);
        if ratio < 1.0 && (w * ratio / (1.0 - ratio) <= 1e-17 * tail || w == 0.0) {
            return Ok(tail);
        }
        n += 1;
    }
}

/// Pair-coherent state amplitudes `c_n = λⁿ / (n! √I₀(2λ))`.
pub fn tmc_coefficients(lambda: f64, cutoff: usize, tail_tol: f64) -> Result<PhotonProfile> {
    check_lambda(lambda)?;
    check_tol(tail_tol)?;
    if lambda == 0.0 {
        let mut coefficients = vec![0.0; cutoff + 1];
        coefficients[0] = 1.0;
        return Ok(PhotonProfile {
            kind: StateKind::Tmc,
            parameter: 0.0,
            coefficients,
            tail_mass: 0.0,
        });
    }
    let ln_i0 = specfun::ln_bessel_i(0, 2.0 * lambda, &SeriesConfig::default())?;
    let ln_lambda = lambda.ln();
    let coefficients = (0..=cutoff)
        .map(|n| (0.5 * tmc_ln_weight(n, ln_lambda, ln_i0)).exp())
        .collect();
    let tail_mass = tmc_tail(lambda, cutoff)?;
    if tail_mass > tail_tol {
        return Err(Error::CutoffTooSmall {
            cutoff,
            tail_mass,
            tail_tol,
        });
    }
    Ok(PhotonProfile {
        kind: StateKind::Tmc,
        parameter: lambda,
        coefficients,
        tail_mass,
    })
}

/// Twin-beam amplitudes `c_n = √(1 − x²) xⁿ`.
pub fn twb_coefficients(x: f64, cutoff: usize, tail_tol: f64) -> Result<PhotonProfile> {
    check_x(x)?;
    check_tol(tail_tol)?;
    let norm = (1.0 - x * x).sqrt();
    let coefficients = (0..=cutoff)
        .map(|n| if n == 0 { norm } else { norm * x.powi(n as i32) })
        .collect();
    let tail_mass = (x * x).powi(cutoff as i32 + 1);
    if tail_mass > tail_tol {
        return Err(Error::CutoffTooSmall {
            cutoff,
            tail_mass,
            tail_tol,
        });
    }
    Ok(PhotonProfile {
        kind: StateKind::Twb,
        parameter: x,
        coefficients,
        tail_mass,
    })
}

/// Total mean photon number of a pair-coherent state, `2λ I₁(2λ) / I₀(2λ)`.
pub fn tmc_mean_photons(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let cfg = SeriesConfig::default();
    let ratio = (specfun::ln_bessel_i(1, 2.0 * lambda, &cfg)?
        - specfun::ln_bessel_i(0, 2.0 * lambda, &cfg)?)
    .exp();
    Ok(2.0 * lambda * ratio)
}

/// Total mean photon number of a twin beam, `2x² / (1 − x²)`.
pub fn twb_mean_photons(x: f64) -> f64 {
    2.0 * x * x / (1.0 - x * x)
}

/// Inverts [`tmc_mean_photons`] by bracketing and bisection.
pub fn lambda_for_mean(target_total: f64) -> Result<f64> {
    if !(target_total >= 0.0) || !target_total.is_finite() {
        return Err(invalid("mean", target_total, "must be finite and >= 0"));
    }
    if target_total == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while tmc_mean_photons(hi)? < target_total {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = tmc_mean_photons(mid)?;
        if value == target_total {
            return Ok(mid);
        }
        if value < target_total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (f_lo, f_hi) = (tmc_mean_photons(lo)?, tmc_mean_photons(hi)?);
    Ok(if (f_lo - target_total).abs() <= (f_hi - target_total).abs() {
        lo
    } else {
        hi
    })
}

/// Twin-beam parameter with total mean `N`: `x = √(N / (N + 2))`.
pub fn x_for_mean(target_total: f64) -> Result<f64> {
    if !(target_total >= 0.0) || !target_total.is_finite() {
        return Err(invalid("mean", target_total, "must be finite and >= 0"));
    }
    Ok((target_total / (target_total + 2.0)).sqrt())
}

/// Closed-form Mandel parameter of either TMC partial trace,
/// `λ (I₀² − I₁²) / (I₀ I₁) − 1`.
pub fn tmc_mandel_q(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Err(Error::ZeroEnergy("Mandel parameter"));
    }
    let cfg = SeriesConfig::default();
    let r = (specfun::ln_bessel_i(1, 2.0 * lambda, &cfg)?
        - specfun::ln_bessel_i(0, 2.0 * lambda, &cfg)?)
    .exp();
    Ok(lambda * (1.0 / r - r) - 1.0)
}

/// Lossless input for [`mandel_q_ideal`].
#[derive(Debug, Clone, Copy)]
pub enum IdealState<'a> {
    Profile(&'a PhotonProfile),
    Tth(TthSpec),
}

/// Single-mode Mandel parameter of a lossless state.
///
/// Profiles use their marginal `c_n²` directly; the thermal state uses `N/2`.
pub fn mandel_q_ideal(state: IdealState<'_>) -> Result<f64> {
    match state {
        IdealState::Profile(profile) => info::mandel_q(&profile.weights()),
        IdealState::Tth(spec) => {
            if spec.mean_total == 0.0 {
                return Err(Error::ZeroEnergy("Mandel parameter"));
            }
            Ok(spec.mean_total / 2.0)
        }
    }
}

/// Entanglement entropy in bits: the von Neumann entropy of either partial trace.
pub fn entanglement_entropy(profile: &PhotonProfile) -> f64 {
    profile
        .coefficients
        .iter()
        .map(|c| c * c)
        .filter(|&w| w > 0.0)
        .map(|w| -w * w.log2())
        .sum()
}

/// Joint distribution `P(p,q) = C(p+q, p) [N / (2(1+N))]^{p+q} / (1+N)` of the
/// two-mode thermal state.
pub fn tth_joint_ideal(spec: TthSpec, cutoff: usize, tail_tol: f64) -> Result<JointDistribution> {
    check_tol(tail_tol)?;
    let n = spec.mean_total;
    let ln_norm = -(1.0 + n).ln();
    let ln_base = (n / (2.0 * (1.0 + n))).ln();
    JointDistribution::from_fn(cutoff, |p, q| {
        let s = p + q;
        if s == 0 {
            return Ok((ln_norm).exp());
        }
        if n == 0.0 {
            return Ok(0.0);
        }
        Ok((ln_norm + log_binomial(s, p) + s as f64 * ln_base).exp())
    })?
    .require_tail_below(tail_tol)
}

/// Correlation index of the two-mode thermal state, `N / (N + 2)`.
pub fn tth_correlation_ideal(spec: TthSpec) -> Result<f64> {
    if spec.mean_total == 0.0 {
        return Err(Error::ZeroVariance("correlation index"));
    }
    Ok(spec.mean_total / (spec.mean_total + 2.0))
}

/// Smallest cutoff whose omitted probability mass is at most `tail_tol`.
///
/// TWB uses the exact geometric tail, TMC sums the tail directly, and TTH
/// bounds the mass outside the square by the two thermal-marginal tails.
pub fn auto_cutoff(kind: StateKind, parameter: f64, tail_tol: f64) -> Result<usize> {
    check_tol(tail_tol)?;
    match kind {
        StateKind::Twb => {
            check_x(parameter)?;
            geometric_cutoff(parameter * parameter, 1.0, tail_tol)
        }
        StateKind::Tth => {
            let spec = TthSpec::new(parameter)?;
            let n = spec.mean_total;
            geometric_cutoff(n / (n + 2.0), 2.0, tail_tol)
        }
        StateKind::Tmc => {
            check_lambda(parameter)?;
            if parameter == 0.0 {
                return Ok(0);
            }
            tmc_cutoff(parameter, tail_tol)
        }
    }
}

/// Smallest `K` with `scale * ratio^{K+1} <= tail_tol`.
fn geometric_cutoff(ratio: f64, scale: f64, tail_tol: f64) -> Result<usize> {
    if ratio == 0.0 {
        return Ok(0);
    }
    let mut tail = scale * ratio;
    let mut k = 0usize;
    while tail > tail_tol {
        tail *= ratio;
        k += 1;
        if k > 1_000_000 {
            return Err(invalid("parameter", ratio, "tail decays too slowly for any cutoff"));
        }
    }
    Ok(k)
}

fn tmc_cutoff(lambda: f64, tail_tol: f64) -> Result<usize> {
    let ln_i0 = specfun::ln_bessel_i(0, 2.0 * lambda, &SeriesConfig::default())?;
    let ln_lambda = lambda.ln();
    // Collect weights until the bound on everything beyond is far below tail_tol.
    let mut weights = Vec::new();
    let mut n = 0usize;
    loop {
        let w = tmc_ln_weight(n, ln_lambda, ln_i0).exp();
        weights.push(w);
        let ratio = lambda * lambda / ((n + 1) as f64 * (n + 1) as f64);
        if ratio < 1.0 && w * ratio / (1.0 - ratio) <= 1e-6 * tail_tol {
            break;
        }
        n += 1;
    }
    let mut tail = 0.0;
    let mut cutoff = weights.len() - 1;
    // Walk down while dropping the current top weight still keeps the tail small.
    while cutoff > 0 && tail + weights[cutoff] <= tail_tol {
        tail += weights[cutoff];
        cutoff -= 1;
    }
    Ok(cutoff)
}
