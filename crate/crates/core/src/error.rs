use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function} series did not converge within {max_terms} terms")]
    NonConvergence {
        function: &'static str,
        max_terms: usize,
    },

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("cutoff {cutoff} leaves tail mass {tail_mass:e}, above tolerance {tail_tol:e}")]
    CutoffTooSmall {
        cutoff: usize,
        tail_mass: f64,
        tail_tol: f64,
    },

    #[error("{0} is undefined for a distribution with zero variance")]
    ZeroVariance(&'static str),

    #[error("{0} is undefined for a state with zero mean photon number")]
    ZeroEnergy(&'static str),

    #[error("thresholds must be strictly increasing: {0:?}")]
    UnorderedThresholds(Vec<usize>),

    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(usize),

    #[error("symbol table is not normalized: total mass {0}")]
    NotNormalized(f64),

    #[error("malformed distribution: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason,
    }
}
