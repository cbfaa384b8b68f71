use alloc::string::String;

use crate::rules::RuleId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("job {0} is out of range")]
    NoSuchJob(usize),
    #[error("job {0} has no unscheduled operations")]
    JobFinished(usize),
    #[error("state is terminal: every operation is scheduled")]
    TerminalState,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset has {have} samples but k = {k}")]
    DatasetTooSmall { have: usize, k: usize },
    #[error("no samples to fit")]
    EmptyInput,
    #[error("rule {0} is not deterministic and cannot serve as a fixed reference")]
    NonDeterministicRule(RuleId),
    #[error("reference makespan is zero")]
    ZeroReference,
    #[error("unknown rule name {0:?}")]
    UnknownRule(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
