use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point set is empty")]
    EmptySet,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("perturbation amplitude {0} is outside [0, 0.3)")]
    AmplitudeCap(f64),
    #[error("radial function is not positive: the domain is not star-shaped about the origin")]
    NotStarShaped,
    #[error("point lies outside the domain")]
    OutsideDomain,
    #[error("ball does not meet the boundary")]
    EmptyClip,
    #[error("censored trajectory fraction {fraction:.5} reaches the 0.1% limit")]
    Censored { fraction: f64 },
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad inputs or configuration rather than by
    /// a computation that ran out of budget or resolution.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::EmptySet | Error::Invalid(_) | Error::AmplitudeCap(_) | Error::NotStarShaped
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::Insufficient(msg.into())
    }
}
