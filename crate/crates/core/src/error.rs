use thiserror::Error;

pub type Result<T> = std::result::Result<T, ForgeError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForgeError {
    #[error("group closure exceeded {cap} elements")]
    ClosureExceeded { cap: usize },
    #[error("matrix {index} is not unitary (residual {residual:.3e})")]
    NotUnitary { index: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("operator is not equivariant (residual {residual:.3e})")]
    NotEquivariant { residual: f64 },
    #[error("operator is not odd for the given involution (residual {residual:.3e})")]
    NotOdd { residual: f64 },
    #[error("operator is not normal, no orthonormal eigenbasis")]
    NotDiagonalizable,
    #[error("spectral parameter within {distance:.3e} of the spectrum")]
    NearSpectrum { distance: f64 },
    #[error("contour offset {offset} is not below the bottom of the spectrum {bottom}")]
    ContourHitsSpectrum { offset: f64, bottom: f64 },
    #[error("quadrature did not converge (refinement changed result by {change:.3e})")]
    QuadratureNotConverged { change: f64 },
    #[error("spectral gap violated: {0}")]
    GapViolation(String),
    #[error("operator is not invertible (smallest |eigenvalue| {min_abs:.3e})")]
    NotInvertible { min_abs: f64 },
    #[error("Volterra series needs {needed} terms, cap is {cap}")]
    TermCapExceeded { needed: usize, cap: usize },
    #[error("spectral gap closes along the path at r = {r:.12}")]
    GapClosed { r: f64 },
    #[error("no admissible profile scale after {halvings} halvings")]
    NoAdmissibleEps { halvings: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
