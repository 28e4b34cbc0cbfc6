use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Poisson mass beyond the Fock cutoff is too large to ignore.
    #[error("Fock cutoff {n_max} leaves a tail mass of {tail:e} (limit 1e-12)")]
    CutoffInsufficient { n_max: usize, tail: f64 },

    #[error("adaptive step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error(
        "quadrature did not converge (error estimate {error_estimate:e}, tolerance {tolerance:e})"
    )]
    QuadratureNotConverged { error_estimate: f64, tolerance: f64 },

    #[error("operation requires sideband order 0, got k = {0}")]
    WrongSideband(u32),

    #[error("detuning is zero: the sigma22 identity carries no information")]
    ZeroDetuning,

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("all observed frequencies are 0 or 1; weights are degenerate")]
    DegenerateWeights,

    #[error("fit basis mismatch: expected {expected}, found {found}")]
    WrongBasis {
        expected: &'static str,
        found: &'static str,
    },
}

impl Error {
    /// Failures of a numerical method (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::QuadratureNotConverged { .. }
                | Error::SingularDesign(_)
                | Error::DegenerateWeights
        )
    }
}
