use thiserror::Error;

use crate::causal::ConsistencyReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("observational joint sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("{arm} arm of the experimental table has no units")]
    EmptyArm { arm: &'static str },

    #[error("observational table has no units")]
    EmptyTable,

    #[error("expected an {expected} count table")]
    WrongTableKind { expected: &'static str },

    #[error("experimental and observational data are inconsistent: {report}")]
    InconsistentData { report: ConsistencyReport },

    #[error("{quantity} conditions on {event}, which has probability 0")]
    UndefinedConditional {
        quantity: &'static str,
        event: &'static str,
    },

    /// The experimental data pin PNS to a single value, so there is nothing
    /// an observational study could tighten.
    #[error("PNS is point-identified at {value}")]
    PointIdentified { value: f64 },

    /// `sigma = 0`: the benefit function equals `W` regardless of PNS.
    #[error("gain equality: the benefit function is the point value {value}")]
    GainEquality { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
