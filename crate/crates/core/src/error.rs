use thiserror::Error;

use crate::evolution::ScalingRow;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("construction failure: {0}")]
    ConstructionFailure(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The sampled curve has no interior minimum.
    #[error("no interior minimum on the sampled curve")]
    NoMinimum,

    #[error("coordinate singularity at {coordinate} = {value}")]
    SingularPoint { coordinate: &'static str, value: f64 },

    /// A λ value of a scaling sweep failed; rows computed before it are kept.
    #[error("scaling study failed at lambda = {lambda}: {source}")]
    Scaling {
        lambda: u32,
        partial: Vec<ScalingRow>,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
