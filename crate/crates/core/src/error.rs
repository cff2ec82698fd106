use thiserror::Error;

/// Errors raised by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("primary system is unstable: load per channel {rho} is not below 1")]
    UnstableSystem { rho: f64 },

    #[error("unknown subcell id {0}")]
    UnknownSubcell(usize),

    #[error("route has no links")]
    EmptyRoute,

    #[error("no route: route length must be positive")]
    NoRoute,

    #[error("transition structure is singular or ill-conditioned (residual {residual:e})")]
    Singular { residual: f64 },

    #[error("malformed chain: {0}")]
    MalformedChain(String),

    #[error("link reliability {xi_min} is unattainable for any switching interval")]
    Infeasible { xi_min: f64 },

    #[error("empty search range: lower bound {lo} exceeds upper bound {hi}")]
    EmptySearchRange { lo: usize, hi: usize },

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that `value` is a probability.
pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{value} is not in [0, 1]")))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("{value} must be finite and > 0"),
        ))
    }
}
