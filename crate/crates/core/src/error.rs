use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{routine} did not converge within {iterations} iterations")]
    Convergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("moments m1={m1}, m2={m2} cannot be matched by a beta distribution")]
    UnfittableMoments { m1: f64, m2: f64 },

    #[error("mode {mode} requires Nakagami m = 1, got m = {m}")]
    ModeMismatch { mode: &'static str, m: u32 },
}

impl Error {
    /// True for failures of numerical routines rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::UnfittableMoments { .. }
        )
    }
}
