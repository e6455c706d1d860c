use std::fmt;

use thiserror::Error;

/// Errors produced by the solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a structural invariant (negative density, decreasing mass, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// A parameter lies outside the domain where the formula is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// The shooting integrator did not reach the free boundary.
    #[error("convergence error: {0}")]
    Convergence(String),
    /// The caller chose a solver that does not apply to the coefficients.
    #[error("wrong solver: {0}")]
    WrongSolver(String),
    /// Scenario setup is inconsistent (e.g. bracket endpoints classify the wrong way).
    #[error("setup error: {0}")]
    Setup(String),
    /// Time stepping broke down (non-finite values, monotonicity lost).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single configuration problem, tied to the line it was found on (0 when
/// the problem is not attached to a line, e.g. a missing section).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// Every problem found while parsing a configuration, not just the first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl ConfigErrors {
    pub fn push(&mut self, line: usize, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            line,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConfigIssue> {
        self.0.iter()
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.0.len())?;
        for issue in &self.0 {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}
