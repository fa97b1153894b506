//! Blocks, transactions, account state and the chain store.

mod block;
mod chain;
pub mod export;
pub mod merkle;
mod tx;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::ConsensusError;
use crate::ids::AccountId;
use crate::trust::{TrustFixed, TrustState};

pub use block::{seal_block, Block, BlockHeader, SealRequest};
pub use chain::{build_compressed_genesis, compression_authority, verify_compression, Chain, ChainConfig};
pub use merkle::merkle_root;
pub use tx::{Authorization, Transaction, TxError, PROTOCOL_CONTRACT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum TxKind {
    ContractDeploy = 1,
    Deposit = 2,
    BidCommit = 3,
    SensingUpload = 4,
    SensingCommit = 5,
    Reveal = 6,
    Settlement = 7,
    Reward = 8,
}

impl TxKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        use TxKind::*;
        Some(match v {
            1 => ContractDeploy,
            2 => Deposit,
            3 => BidCommit,
            4 => SensingUpload,
            5 => SensingCommit,
            6 => Reveal,
            7 => Settlement,
            8 => Reward,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountState {
    pub account_id: AccountId,
    pub balance: u64,
    pub trust: TrustState,
}

impl AccountState {
    pub fn new(account_id: AccountId, balance: u64) -> Self {
        AccountState {
            account_id,
            balance,
            trust: TrustState::default(),
        }
    }

    /// `id [32] | balance u64 | trust state`, the account-state merkle leaf.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(80);
        out.extend_from_slice(self.account_id.as_bytes());
        out.extend_from_slice(&self.balance.to_be_bytes());
        out.extend_from_slice(&self.trust.canonical_bytes());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("prev_hash does not match the tip")]
    BadParent,
    #[error("timestamp {found} not after parent timestamp {parent}")]
    BadTimestamp { parent: u64, found: u64 },
    #[error("transaction {0} repeats an earlier transaction")]
    DuplicateTransaction(usize),
    #[error("{0} merkle root mismatch")]
    BadRoot(&'static str),
    #[error("miner signature invalid")]
    BadSignature,
    #[error("miner trust field {found:?} disagrees with parent state {expected:?}")]
    BadTrustField {
        expected: Option<TrustFixed>,
        found: TrustFixed,
    },
    #[error("base difficulty {found} differs from the expected {expected}")]
    BadBaseDifficulty { expected: u64, found: u64 },
    #[error("header hash misses the {required}-bit target")]
    BadPoW { required: u32 },
    #[error("transaction {index} invalid: {source}")]
    BadTransaction { index: usize, source: TxError },
    #[error("account state map is inconsistent: {0}")]
    BadState(&'static str),
    #[error("{0} is not the highest-trust account")]
    NotAuthorized(AccountId),
    #[error("chain has {length} blocks, compression needs {needed}")]
    NotDue { length: usize, needed: usize },
    #[error("compressed state differs from the tip at {0:?}")]
    StateMismatch(Option<AccountId>),
    #[error(transparent)]
    Mining(#[from] ConsensusError),
    #[error("import line {line}: {message}")]
    Import { line: usize, message: String },
}
