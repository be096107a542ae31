//! Self-checks of the closed-form lossy distributions over a parameter grid.
//!
//! Each grid point is evaluated once; the suites then report the largest
//! absolute deviation they saw against their tolerance.

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::JointDistribution;
use crate::error::Result;
use crate::info;
use crate::loss::{self, ChannelParams};
use crate::states::{Source, StateKind};

pub const ORACLE_TOL: f64 = 1e-10;
pub const NORMALIZATION_TOL: f64 = 1e-9;
pub const CORRELATION_TOL: f64 = 1e-8;
pub const MANDEL_TOL: f64 = 1e-8;

/// Total mean photon numbers crossed with every ordered pair of arm transmissivities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyGrid {
    pub means_total: Vec<f64>,
    pub etas: Vec<f64>,
}

impl VerifyGrid {
    pub fn default_grid() -> Self {
        Self {
            means_total: vec![1.0, 5.0, 10.0],
            etas: vec![0.6, 0.85, 0.95, 1.0],
        }
    }

    pub fn quick() -> Self {
        Self {
            means_total: vec![1.0, 5.0],
            etas: vec![0.6, 1.0],
        }
    }

    /// `(kind, N, η₁, η₂)` for every family, N-major then η₁ then η₂.
    pub fn points(&self) -> Vec<(StateKind, f64, f64, f64)> {
        let mut out = Vec::new();
        for kind in StateKind::ALL {
            for &n in &self.means_total {
                for &e1 in &self.etas {
                    for &e2 in &self.etas {
                        out.push((kind, n, e1, e2));
                    }
                }
            }
        }
        out
    }
}

/// Everything the suites need from one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCheck {
    pub kind: StateKind,
    pub mean_total: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub cutoff: usize,
    /// Largest entrywise gap between the closed form and the thinning oracle.
    pub oracle_deviation: f64,
    /// `|1 − Σ P|` of the closed form.
    pub normalization_deviation: f64,
    pub correlation_deviation: f64,
    /// True when the lossy correlation exceeds the lossless one.
    pub correlation_increased: bool,
    pub mandel_deviation: f64,
    /// True when loss flipped the sign of either marginal's Q.
    pub mandel_sign_flipped: bool,
}

pub fn check_point(kind: StateKind, mean_total: f64, eta1: f64, eta2: f64, tail_tol: f64) -> Result<PointCheck> {
    let source = Source::from_total_mean(kind, mean_total)?;
    let channel = ChannelParams::new(eta1, eta2)?;
    let cutoff = source.auto_cutoff(tail_tol)?;
    let closed = loss::joint_lossy(&source, &channel, cutoff, tail_tol)?;
    let oracle = loss::thinning_oracle(&source.ideal_joint(cutoff, tail_tol)?, &channel)?;

    let gamma = info::correlation_index(&info::moments(&closed))?;
    let gamma_formula = loss::correlation_after_loss(&source, &channel)?;
    let gamma_ideal = loss::correlation_after_loss(&source, &ChannelParams::lossless())?;

    let (m1, m2) = info::marginals(&closed);
    let q_ideal = source.ideal_mandel_q()?;
    let (q1_formula, q2_formula) = loss::mandel_after_loss(&source, &channel)?;
    let (q1, q2) = (info::mandel_q(&m1)?, info::mandel_q(&m2)?);
    let flipped = |q: f64| q * q_ideal < 0.0;

    Ok(PointCheck {
        kind,
        mean_total,
        eta1,
        eta2,
        cutoff,
        oracle_deviation: closed.max_abs_diff(&oracle)?,
        normalization_deviation: normalization_deviation(&closed),
        correlation_deviation: (gamma - gamma_formula).abs(),
        correlation_increased: gamma_formula > gamma_ideal + 1e-15,
        mandel_deviation: (q1 - q1_formula).abs().max((q2 - q2_formula).abs()),
        mandel_sign_flipped: flipped(q1) || flipped(q2),
    })
}

pub fn normalization_deviation(joint: &JointDistribution) -> f64 {
    (1.0 - joint.total_mass()).abs()
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub points: usize,
    /// Qualitative failures (monotonicity, sign) counted separately from the deviation.
    pub violations: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance && self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub tail_tol: f64,
    pub grid: VerifyGrid,
    pub suites: Vec<SuiteReport>,
    pub points: Vec<PointCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

fn suite(
    name: &'static str,
    tolerance: f64,
    points: &[PointCheck],
    deviation: impl Fn(&PointCheck) -> f64,
    violated: impl Fn(&PointCheck) -> bool,
) -> SuiteReport {
    SuiteReport {
        name,
        max_deviation: points.iter().map(&deviation).fold(0.0, f64::max),
        tolerance,
        points: points.len(),
        violations: points.iter().filter(|p| violated(p)).count(),
    }
}

/// Runs the oracle, normalization, correlation and Mandel suites over `grid`.
pub fn run(grid: &VerifyGrid, tail_tol: f64) -> Result<VerifyReport> {
    let points: Vec<PointCheck> = grid
        .points()
        .into_par_iter()
        .map(|(kind, n, e1, e2)| check_point(kind, n, e1, e2, tail_tol))
        .collect::<Result<_>>()?;
    let suites = vec![
        suite("oracle-equivalence", ORACLE_TOL, &points, |p| p.oracle_deviation, |_| false),
        suite("normalization", NORMALIZATION_TOL, &points, |p| p.normalization_deviation, |_| false),
        suite(
            "correlation-formula",
            CORRELATION_TOL,
            &points,
            |p| p.correlation_deviation,
            |p| p.correlation_increased,
        ),
        suite("mandel-rescaling", MANDEL_TOL, &points, |p| p.mandel_deviation, |p| p.mandel_sign_flipped),
    ];
    Ok(VerifyReport {
        tail_tol,
        grid: grid.clone(),
        suites,
        points,
    })
}
