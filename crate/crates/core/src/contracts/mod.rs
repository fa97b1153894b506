//! Native state machines for the cooperative sensing contract and the
//! sealed second-price spectrum auction contract.

pub mod csc;
pub mod sac;

use thiserror::Error;

use crate::ids::AccountId;
use crate::payload::SettlementKind;
use crate::trust::TrustFixed;

pub use csc::{convert, fuse_majority, CscConfig, CscPhase, CscState, Registration, SensingReveal};
pub use sac::{bid_commitment, SacConfig, SacPhase, SacState, Winner};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("operation not allowed in phase {0}")]
    WrongPhase(&'static str),
    #[error("deposit {offered} below required {required}")]
    InsufficientDeposit { required: u64, offered: u64 },
    #[error("effective trust {effective:?} not above threshold {threshold:?}")]
    BelowThreshold {
        effective: TrustFixed,
        threshold: TrustFixed,
    },
    #[error("effective trust {effective:?} does not beat the lowest selected {lowest:?}")]
    NotCompetitive { effective: TrustFixed, lowest: TrustFixed },
    #[error("account already registered")]
    AlreadyRegistered,
    #[error("account not registered")]
    NotRegistered,
    #[error("ring signature invalid or ring has an unregistered member")]
    IllegalRing,
    #[error("upload at {now} after deadline {deadline}")]
    PastDeadline { now: u64, deadline: u64 },
    #[error("a packet with this msgID tag was already uploaded")]
    DuplicateTag,
    #[error("account already committed")]
    DuplicateCommitment,
    #[error("no packets uploaded; task voided")]
    NoPackets,
    #[error("bidder limit reached")]
    TooManyBidders,
    #[error("commit limit reached")]
    TooManyCommits,
    #[error("bidder already revealed")]
    AlreadyRevealed,
    #[error("reveal has {found} openings for {expected} commitments")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no valid bids")]
    NoBidders,
    #[error("channel is busy; auction does not open")]
    ChannelBusy,
    #[error("self-destruct not before {at}, now {now}")]
    TooEarly { now: u64, at: u64 },
    #[error("contract destroyed")]
    ContractDestroyed,
}

/// Token movement out of a contract for one account.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Payout {
    pub account: AccountId,
    pub kind: SettlementKind,
    /// Tokens credited to the account (escrow returned plus any reward).
    pub credit: u64,
    /// Escrow destroyed.
    pub forfeited: u64,
    /// Newly minted tokens included in `credit`.
    pub minted: u64,
}
