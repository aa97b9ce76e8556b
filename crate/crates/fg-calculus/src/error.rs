//! Error taxonomy shared by every module in the crate.
//!
//! Numeric-domain problems (poles, coincident nodes, out-of-domain
//! parameters) are kept distinct from resource problems (term caps) and from
//! convergence problems (divergent series, insufficient bilateral windows) so
//! that callers — the CLI in particular — can map them to distinct outcomes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FgError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FgError {
    /// An evaluation point sits on a pole or outside a function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A would-be division by an exact or numerically vanishing factor.
    #[error("division by zero: {0}")]
    DivisionByZero(String),

    /// A denominator g(b_i, b_k) or f-factor required by an operator or
    /// matrix entry vanished; carries the offending index pair.
    #[error("zero denominator at (i = {i}, k = {k}): {what}")]
    ZeroDenominator { i: usize, k: usize, what: String },

    /// Two nodes of a node system coincide within the distinctness tolerance.
    #[error("coincident nodes b_{i} and b_{j}: |difference| = {separation:.3e}")]
    CoincidentNodes { i: usize, j: usize, separation: f64 },

    /// A named pair/function/case was requested without a required parameter.
    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    /// A series or product hit its term cap before meeting the tail threshold.
    #[error("maximum term count {0} exceeded before convergence")]
    MaxTermsExceeded(usize),

    /// Terms grow persistently; the series diverges at these parameters.
    #[error("series diverges: {0}")]
    Divergent(String),

    /// A bilateral sum window left a tail above the truncation threshold.
    #[error("bilateral window {window} too small: residual tail bound {tail:.3e}")]
    WindowTooSmall { window: usize, tail: f64 },

    /// A lower series parameter of the form q^{-m} produces a pole before
    /// the series terminates.
    #[error("pole in lower parameters: {0}")]
    PoleInLowerParams(String),

    /// An index outside the valid range (e.g. binomial k outside 0..=n).
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Parameters violate an identity case's stated domain.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// Invalid construction input (e.g. |q| >= 1).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A name lookup (pair, function, corpus case) failed; carries the
    /// valid names so front ends can echo them.
    #[error("unknown name `{name}`; valid names: {valid}")]
    UnknownName { name: String, valid: String },
}

impl FgError {
    /// True for errors that indicate a numeric-domain problem (as opposed to
    /// usage or convergence-resource problems); the CLI maps these to its
    /// domain-error exit code.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            FgError::Domain(_)
                | FgError::DivisionByZero(_)
                | FgError::ZeroDenominator { .. }
                | FgError::CoincidentNodes { .. }
                | FgError::DomainViolation(_)
                | FgError::PoleInLowerParams(_)
        )
    }
}
