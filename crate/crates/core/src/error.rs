use alloc::boxed::Box;
use alloc::string::String;

use crate::levels::Transition;
use crate::state::StateDiagnostics;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "conflicting rotating frame on transition {transition:?} at t = {time} ns: \
         overlapping drives with carriers {first} GHz and {second} GHz"
    )]
    FrameConflict {
        transition: Transition,
        time: f64,
        first: f64,
        second: f64,
    },

    #[error("step size underflow at t = {time} ns (h = {step:e} ns)")]
    StepUnderflow { time: f64, step: f64 },

    #[error("step budget exhausted at t = {time} ns")]
    StepBudget { time: f64 },

    #[error("state invariant violated at t = {time} ns: {diagnostics}")]
    InvariantViolation {
        time: f64,
        diagnostics: StateDiagnostics,
    },

    #[error("ensemble node {index} (detuning {detuning} GHz): {source}")]
    Node {
        index: usize,
        detuning: f64,
        source: Box<Error>,
    },

    #[error("propagation grid could not be refined to a stable step ({reason})")]
    GridUnstable { reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
