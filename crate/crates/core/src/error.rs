use alloc::string::String;

/// Errors produced by the model toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid dimensions: expected {expected}, found {found}")]
    InvalidDimensions { expected: usize, found: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no positive equilibrium: spectral abscissa {abscissa} is not positive")]
    NoPositiveEquilibrium { abscissa: f64 },
    #[error("step size underflow at t = {t}")]
    Stiffness { t: f64 },
    #[error("integrator left the invariant region at t = {t} (violation {violation:e})")]
    IntegratorAccuracy { t: f64, violation: f64 },
    #[error("insufficient horizon: {0}")]
    InsufficientHorizon(String),
}

pub type Result<T> = core::result::Result<T, Error>;
