use std::fmt;

use thiserror::Error;

/// Which standing assumption failed in [`crate::cone::validate_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// `G` does not have full row rank.
    Rank,
    /// The push cone has no direction strictly inside the state cone.
    InteriorPush,
    /// No growth direction bounds the push cone.
    GrowthPush,
    /// No growth direction bounds the state cone.
    GrowthState,
    /// No growth direction bounds the control cone.
    GrowthControl,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::Rank => "rank(G) = k",
            Assumption::InteriorPush => "U ∩ int X ≠ ∅",
            Assumption::GrowthPush => "u·û1 ≥ a0|u| on U",
            Assumption::GrowthState => "x·û1 ≥ a0|x| on X",
            Assumption::GrowthControl => "y·ŷ1 ≥ a0|y| on Y",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate cone: {0}")]
    DegenerateCone(String),

    #[error("assumption violated ({which}): {detail}")]
    AssumptionViolated { which: Assumption, detail: String },

    #[error("direction does not reach the truncation surface")]
    NoExit,

    #[error("not in cone: {0}")]
    NotInCone(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("covariance is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("inadmissible control: {0}")]
    Inadmissible(String),

    #[error("grid: {0}")]
    Grid(String),

    #[error("evaluation point {0:?} lies outside the grid")]
    OutsideGrid(Vec<f64>),

    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    NoConvergence {
        iterations: usize,
        last_update: f64,
        history: Vec<f64>,
    },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("inconsistent: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DegenerateCone(_) => "degenerate_cone",
            Error::AssumptionViolated { .. } => "assumption_violated",
            Error::NoExit => "no_exit",
            Error::NotInCone(_) => "not_in_cone",
            Error::InvalidPath(_) => "invalid_path",
            Error::NotPsd(_) => "not_psd",
            Error::Inadmissible(_) => "inadmissible",
            Error::Grid(_) => "grid",
            Error::OutsideGrid(_) => "outside_grid",
            Error::NoConvergence { .. } => "no_convergence",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::RankDeficient(_) => "rank_deficient",
            Error::Infeasible(_) => "infeasible",
            Error::Inconsistent(_) => "inconsistent",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
