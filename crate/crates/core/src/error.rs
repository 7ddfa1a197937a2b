use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample has tied values {value} at positions {first} and {second}")]
    Ties {
        first: usize,
        second: usize,
        value: f64,
    },

    #[error("piece on [{lo}, {hi}] vanishes identically; zero count is infinite")]
    InfiniteZeros { lo: f64, hi: f64 },

    #[error("candidate is not certifiable: fitted density is zero at observation {index} (log-likelihood is -inf)")]
    NotCertifiable { index: usize },

    #[error("infeasible support: no atom lies beyond the largest observation")]
    InfeasibleSupport,

    #[error("every atom was pruned from the mixing measure")]
    EmptyMeasure,

    #[error("brute-force oracle is limited to n <= 3 (got n = {0})")]
    TooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
