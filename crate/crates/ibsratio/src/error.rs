use thiserror::Error;

/// Snapshot of ledger bookkeeping, attached to errors raised mid-estimation
/// so the operator can see how far the procedure got on finite data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerSnapshot {
    pub pairs_drawn: u64,
    pub consumed1: u64,
    pub consumed2: u64,
    pub surplus1: usize,
    pub surplus2: usize,
}

/// Progress of an estimation session at the moment it was interrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimationProgress {
    /// 1 while collecting successes, 2 while collecting failures.
    pub phase: u8,
    pub n_prime: u64,
    pub n_dprime: u64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "replay data exhausted (pairs={}, consumed1={}, consumed2={})",
        snapshot.pairs_drawn, snapshot.consumed1, snapshot.consumed2
    )]
    ReplayExhausted {
        snapshot: LedgerSnapshot,
        progress: Option<EstimationProgress>,
    },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("infeasible cell: {0}")]
    InfeasibleCell(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
