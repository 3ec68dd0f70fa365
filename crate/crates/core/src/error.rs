use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid angular momentum argument: {0}")]
    AngularMomentum(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("detuning {detuning_mhz} MHz lies on the resonance at {pole_mhz} MHz")]
    Singularity { detuning_mhz: f64, pole_mhz: f64 },

    #[error("no interior minimum: {0}")]
    NoSolution(NoSolutionReason),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("fit did not converge after {iterations} iterations (last relative step {last_step:e}, rms residual {residual:e})")]
    FitFailure {
        iterations: usize,
        last_step: f64,
        residual: f64,
    },
}

/// Why the magic-detuning search found nothing to refine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoSolutionReason {
    /// The objective is constant over the search interval.
    FlatObjective,
    /// The smallest grid value sits on the interval boundary.
    BoundaryMinimum,
}

impl std::fmt::Display for NoSolutionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoSolutionReason::FlatObjective => write!(f, "objective is flat over the interval"),
            NoSolutionReason::BoundaryMinimum => write!(f, "minimum lies on the interval boundary"),
        }
    }
}

impl Error {
    /// True for failures of the numerics (fits, poles, solvers) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singularity { .. } | Error::NoSolution(_) | Error::FitFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
