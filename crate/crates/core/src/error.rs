use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("invalid step: {0}")]
    InvalidStep(String),

    #[error("solution blew up (|x| > 1e6) at t = {t}")]
    BlowUp { t: f64 },

    #[error("{op} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("rightmost characteristic root is complex (J*tau = {j_tau}); real-root regime required")]
    ComplexRegime { j_tau: f64 },

    #[error("integrand singular inside [{lo}, {hi}]: a - x vanishes at y = {y}")]
    SingularIntegrand { lo: f64, hi: f64, y: f64 },

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("bisection stopped after {iterations} iterations with bracket [{lo}, {hi}]")]
    BracketNotConverged { lo: f64, hi: f64, iterations: usize },

    #[error("no crossing: {0}")]
    NoCrossing(String),

    #[error("too few crossings: need {needed}, have {have}")]
    TooFewCrossings { needed: usize, have: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        op,
        detail: detail.into(),
    }
}
