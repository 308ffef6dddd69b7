use std::path::PathBuf;

use pcause::causal::ConsistencyReport;
use serde_json::{json, Value};
use thiserror::Error;

/// Everything that ends a command with a nonzero exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable input or input that does not match the schema.
    #[error("{0}")]
    Usage(String),
    #[error("observational data are inconsistent with the experimental data")]
    Inconsistent(ConsistencyReport),
    #[error("PNS is point-identified at {0}; an observational study cannot tighten it")]
    PointIdentified(f64),
    #[error("sigma is zero, so the benefit is identified at W = {0}")]
    GainEquality(f64),
    #[error("cannot write {}: {message}", path.display())]
    Output { path: PathBuf, message: String },
    /// Carries the summary, which is still written to the output.
    #[error("oracle check failed")]
    OracleFailed(Value),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Inconsistent(_) => 3,
            CliError::PointIdentified(_) => 4,
            CliError::GainEquality(_) => 5,
            CliError::Output { .. } => 6,
            CliError::OracleFailed(_) => 7,
        }
    }

    /// The object printed on stderr.
    pub fn to_json(&self) -> Value {
        let message = self.to_string();
        match self {
            CliError::Usage(_) => json!({ "error": "usage", "message": message }),
            CliError::Inconsistent(report) => json!({
                "error": "inconsistent_data",
                "message": message,
                "consistency": report,
            }),
            CliError::PointIdentified(v) => json!({
                "error": "point_identified",
                "message": message,
                "point_identified": v,
            }),
            CliError::GainEquality(w) => json!({
                "error": "gain_equality",
                "message": message,
                "gain_equality_value": w,
            }),
            CliError::Output { path, .. } => json!({
                "error": "output",
                "message": message,
                "path": path.display().to_string(),
            }),
            CliError::OracleFailed(_) => json!({ "error": "oracle_check_failed", "message": message }),
        }
    }
}

impl From<pcause::Error> for CliError {
    fn from(err: pcause::Error) -> Self {
        use pcause::Error as E;
        match err {
            E::InconsistentData { report } => CliError::Inconsistent(report),
            E::PointIdentified { value } => CliError::PointIdentified(value),
            E::GainEquality { value } => CliError::GainEquality(value),
            other => CliError::Usage(other.to_string()),
        }
    }
}
