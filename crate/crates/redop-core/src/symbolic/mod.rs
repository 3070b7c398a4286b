//! Exact symbolic expression kernel.
//!
//! [`Expr`] is always in canonical rational normal form: a quotient of
//! polynomials over the rationals whose indeterminates are [`Atom`]s.
//! Transcendental kernels are opaque atoms with a small set of structural
//! rules (exponential merging, `exp(n*ln a) = a^n`, `sqrt(a)^2 = a`, and
//! the formal branch `sqrt(p^2) = p`).

mod atom;
mod calculus;
mod eval;
mod expr;
mod gcd;
mod poly;
mod render;
mod tree;

use thiserror::Error;

pub use atom::{Application, Atom, FormalArg, Name, UnknownFunction};
pub use calculus::Derivation;
pub use eval::{
    is_zero, is_zero_with, nonvanishing_atom, provably_nonvanishing, RandomPoint, SampleConfig,
    TriBool, Valuation, FLOAT_TOLERANCE,
};
pub use expr::Expr;
pub use poly::{rat, ratio, Monomial, Poly, Rat};
pub use render::{render, render_atom, render_equation, symbol_name, Names};
pub use tree::ExprTree;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolicError {
    #[error("denominator normalizes to zero")]
    DivisionByZero,
    #[error("every sample point was singular after {attempts} attempts")]
    EvaluationExhausted { attempts: u32 },
    #[error("unknown variable {name}")]
    UnknownVariable { name: String },
    #[error("function {function} has repeated formal arguments")]
    DuplicateFormalArg { function: String },
    #[error("assumption does not refer to a derivative of {function}")]
    ForeignAssumption { function: String },
    #[error("domain error: {detail}")]
    Domain { detail: String },
    #[error("malformed expression tree: {detail}")]
    MalformedTree { detail: String },
}

/// Partial derivative with respect to a declared variable.
pub fn diff(e: &Expr, v: &Atom, declared: &[Atom]) -> Result<Expr, SymbolicError> {
    if !declared.contains(v) {
        return Err(SymbolicError::UnknownVariable {
            name: v.to_string(),
        });
    }
    Ok(e.diff(v))
}
