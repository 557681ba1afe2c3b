use thiserror::Error;

/// Errors raised by the simulator and the security analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument lies outside the domain of the operation.
    #[error("{name} = {value} is out of range: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// One or more fields of a parameter bundle failed validation.
    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An iterative numerical routine stopped before meeting its tolerance.
    #[error("numerical routine did not converge: {0}")]
    NonConvergence(String),

    #[error("malformed record at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_domain(
    ok: bool,
    name: &'static str,
    value: f64,
    reason: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            reason,
        })
    }
}
