use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("circulant embedding eigenvalue {value:e} at index {index} is below the clipping threshold")]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("increment covariance is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("path value {value} at time index {index} lies outside the spatial grid [{lo}, {hi}]")]
    OutsideGrid {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("non-finite function value at argument {argument}")]
    NonFinite { argument: f64 },

    #[error("non-finite state at step {step}; reduce the time step or raise the cap")]
    Unstable { step: usize },

    #[error("grid of {points} points cannot represent {modes} Fourier modes without aliasing")]
    Aliasing { points: usize, modes: usize },

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("ensembles were not built from the same noise seeds")]
    Uncoupled,

    #[error("malformed data: {0}")]
    Malformed(String),
}

pub(crate) fn check(cond: bool, name: &'static str, value: f64, constraint: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint,
        })
    }
}
