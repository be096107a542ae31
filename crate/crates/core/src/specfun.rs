//! Special functions used by the closed-form lossy joint distributions.
//!
//! Everything here works on nonnegative real arguments and integer orders.
//! The series are positive-term series whose successive term ratios are
//! non-increasing once summation starts, which gives a rigorous geometric
//! bound on the neglected tail and therefore a reliable stopping rule.
//! Sums are carried with a running log-scale so that large arguments do not
//! overflow before the final exponentiation.

use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};

/// Stopping rule for the power series in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    /// Relative bound on the neglected tail.
    pub rel_tol: f64,
    /// Hard cap on the number of summed terms.
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            max_terms: 10_000,
        }
    }
}

impl SeriesConfig {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || !rel_tol.is_finite() {
            return Err(invalid("rel_tol", rel_tol, "must be positive and finite"));
        }
        if max_terms == 0 {
            return Err(invalid("max_terms", 0.0, "must be at least 1"));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

const TABLE_LEN: usize = 1024;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Kahan-compensated running sum of ln k.
        let mut table = Vec::with_capacity(TABLE_LEN);
        let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
        table.push(0.0);
        for k in 1..TABLE_LEN {
            let y = (k as f64).ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            table.push(sum);
        }
        table
    })
}

/// Natural logarithm of `n!`.
pub fn log_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        return log_factorial_table()[n];
    }
    // Stirling series; the first omitted term is below 1e-24 for n >= 1024.
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Natural logarithm of the binomial coefficient `C(n, k)`; `-inf` when `k > n`.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    log_factorial(n) - (log_factorial(k) + log_factorial(n - k))
}

/// `exponent * ln(base)` with the convention `0^0 = 1`.
pub(crate) fn ln_pow(base: f64, exponent: usize) -> f64 {
    if exponent == 0 {
        0.0
    } else {
        exponent as f64 * base.ln()
    }
}

const RESCALE_AT: f64 = 1e280;

/// Sums `1 + t_1 + t_2 + ...` where `t_{k+1} = t_k * ratio(k)` and returns the
/// natural log of the sum. `ratio` must be non-increasing in `k`.
fn ln_ratio_series(
    function: &'static str,
    cfg: &SeriesConfig,
    ratio: impl Fn(usize) -> f64,
) -> Result<f64> {
    let mut sum = 1.0_f64;
    let mut term = 1.0_f64;
    let mut log_scale = 0.0_f64;
    for k in 0..cfg.max_terms {
        let r = ratio(k);
        if r == 0.0 {
            return Ok(sum.ln() + log_scale);
        }
        if r < 1.0 && term * r / (1.0 - r) <= cfg.rel_tol * sum {
            return Ok(sum.ln() + log_scale);
        }
        term *= r;
        sum += term;
        if sum > RESCALE_AT {
            sum /= RESCALE_AT;
            term /= RESCALE_AT;
            log_scale += RESCALE_AT.ln();
        }
        if term == 0.0 {
            return Ok(sum.ln() + log_scale);
        }
    }
    Err(Error::NonConvergence {
        function,
        max_terms: cfg.max_terms,
    })
}

/// `ln Σ_k y^k / (k! (k+order)!)`, the scaled series behind `I_order`.
///
/// `I_ν(x) = (x/2)^ν · Σ_k (x²/4)^k / (k! (k+ν)!)`, so callers that carry extra
/// powers of the argument (the lossy TMC distribution does) can fold them in
/// before exponentiating.
pub fn ln_bessel_series(order: usize, y: f64, cfg: &SeriesConfig) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(invalid("y", y, "bessel series argument must be finite and >= 0"));
    }
    let nu = order as f64;
    let tail = ln_ratio_series("bessel_i", cfg, |k| {
        let k = k as f64;
        y / ((k + 1.0) * (k + 1.0 + nu))
    })?;
    Ok(tail - log_factorial(order))
}

/// `ln I_order(x)`; `-inf` for `x = 0` and `order > 0`.
pub fn ln_bessel_i(order: usize, x: f64, cfg: &SeriesConfig) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid("x", x, "bessel argument must be finite and >= 0"));
    }
    if x == 0.0 {
        return Ok(if order == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let half = 0.5 * x;
    Ok(order as f64 * half.ln() + ln_bessel_series(order, half * half, cfg)?)
}

/// Modified Bessel function of the first kind, `I_order(x)`, for `x >= 0`.
pub fn bessel_i(order: usize, x: f64, cfg: &SeriesConfig) -> Result<f64> {
    ln_bessel_i(order, x, cfg).map(f64::exp)
}

/// `ln ₂F₁(1+m, 1+m; 1+d; z)` for `d <= m` and `0 <= z < 1`.
pub fn ln_hyp2f1_equal(m: usize, d: usize, z: f64, cfg: &SeriesConfig) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(invalid("z", z, "hypergeometric argument must lie in [0, 1)"));
    }
    if d > m {
        return Err(invalid(
            "d",
            d as f64,
            "lower parameter offset must not exceed the upper one",
        ));
    }
    let a = 1.0 + m as f64;
    let c = 1.0 + d as f64;
    ln_ratio_series("hyp2f1", cfg, |k| {
        let k = k as f64;
        (a + k) * (a + k) / ((c + k) * (k + 1.0)) * z
    })
}

/// Gauss hypergeometric function with equal upper parameters,
/// `₂F₁(1+m, 1+m; 1+d; z)`.
pub fn hyp2f1_equal(m: usize, d: usize, z: f64, cfg: &SeriesConfig) -> Result<f64> {
    ln_hyp2f1_equal(m, d, z, cfg).map(f64::exp)
}
