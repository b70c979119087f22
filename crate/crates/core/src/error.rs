use thiserror::Error;

use crate::qstate::BasisLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("label {0} is outside the map's domain")]
    LabelMismatch(BasisLabel),
    #[error("map flagged {kind} fails the isometry audit (max deviation {deviation:.3e})")]
    NotIsometric { kind: &'static str, deviation: f64 },
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time-stamp `{0}` is not part of the schedule")]
    UnknownTime(String),
    #[error("time-stamp `{later}` does not come after `{earlier}`")]
    TimeOrder { earlier: String, later: String },
    #[error("probability not conserved at `{time}`: total {total:.15} (deviation {deviation:.3e})")]
    ConservationBreach {
        time: String,
        total: f64,
        deviation: f64,
    },
    #[error("pre- and post-selected states are orthogonal at `{0}` (|<phi|psi>| < 1e-12)")]
    OrthogonalBoundaries(String),
    #[error("family `{0}` is not consistent; history probabilities are undefined")]
    InconsistentFamily(String),
    #[error("family `{0}` is empty")]
    EmptyFamily(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of a numerical invariant, as opposed to bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::ConservationBreach { .. } | Error::NotIsometric { .. }
        )
    }
}
