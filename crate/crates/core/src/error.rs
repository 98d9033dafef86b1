use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where and how a chain left the finite, bounded region.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDivergence {
    pub chain: usize,
    /// 1-based index of the update that produced the offending state.
    pub step: usize,
    /// Euclidean norm of the offending state (may be `inf` or `NaN`).
    pub norm: f64,
}

impl fmt::Display for ChainDivergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain {} diverged at step {} (state norm {:e})", self.chain, self.step, self.norm)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("potential returned non-finite value {value} at point {point:?}")]
    Evaluation { point: Vec<f64>, value: f64 },

    #[error("step size {eta} is not below the cap 2/(M + 2*lambda) = {cap}")]
    StepSize { eta: f64, cap: f64 },

    #[error("{}", format_divergences(.0))]
    Divergence(Vec<ChainDivergence>),

    #[error("unsupported parameters: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter { name, reason: reason.into() }
    }
}

fn format_divergences(list: &[ChainDivergence]) -> String {
    let mut out = format!("{} chain(s) diverged", list.len());
    for d in list {
        out.push_str("; ");
        out.push_str(&d.to_string());
    }
    out
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
