//! Problem representation: expression trees, constrained problems, and the
//! separable-form classifier used by the Ising encoder.

mod expr;
mod parse;
mod problem;
mod separable;
mod tape;

use thiserror::Error;

pub use expr::{Exponent, ScalarExpr};
pub use parse::{is_numeric_literal, parse_expr};
pub use problem::{Diagnostic, NlpProblem, ProblemDocument, Sense, Variable, VariableDocument, PROBLEM_FORMAT_VERSION};
pub use separable::{to_separable, BivariateTerm, Separability, SeparableForm, UnivariateTerm};
pub use tape::Tape;

/// Dense point aligned with a problem's variable order.
pub type Point = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("evaluation overflow at node `{node}`")]
    Overflow { node: String },
    #[error("gradient is singular at node `{node}`")]
    GradientSingularity { node: String },
    #[error("negative base {value} under fractional power at node `{node}`")]
    Domain { node: String, value: f64 },
    #[error("variable index {index} out of range for a point of length {len}")]
    VariableOutOfRange { index: usize, len: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Evaluates `expr` at `at`.
pub fn evaluate(expr: &ScalarExpr, at: &[f64]) -> Result<f64, ModelError> {
    expr.evaluate(at)
}

/// Forward-mode gradient of `expr` at `at`.
pub fn gradient(expr: &ScalarExpr, at: &[f64]) -> Result<Point, ModelError> {
    expr.gradient(at)
}
