//! Scalar expressions over `x1..xn`, evaluated with dual numbers.

mod ast;
mod dual;
mod field;
mod parser;

pub use ast::{Expr, Func};
pub use dual::{Dual, Scalar};
pub use field::ScalarField;
pub use parser::{parse, ParseError, MAX_DEPTH};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("non-finite result")]
    NonFinite,
    #[error("point has dimension {got}, field expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}
