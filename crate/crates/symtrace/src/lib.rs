//! Exact trace algebra over ℚ(i) for expressions in t, λ, b, q = λ² + b²,
//! E(α) = exp(−α t² q) and a single noncommuting symbol d = ∂_λ b.

pub mod coeff;
pub mod eqfe;
pub mod expr;
pub mod parse;
pub mod rewrite;

pub use coeff::{rat, Coeff};
pub use eqfe::{
    build_r_symbolic, eqfe_rhs, idempotency_defect, mutation_sweep, verify_eqfe, verify_eqfe_for, EqfeReport,
    MutationSweep,
};
pub use expr::{differentiate, trace_normalize, Comm, Mat2, Monomial, TraceExpr, Var};
pub use parse::{parse_expr, print_expr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("product carries two d factors")]
    TwoDFactors,
    #[error("expression already contains d")]
    AlreadyHasD,
    #[error("not an invertible monomial")]
    NotInvertible,
    #[error("nonzero residual: {0}")]
    NonzeroResidual(String),
}
