use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::merkle::merkle_root;
use super::{AccountState, LedgerError, Transaction};
use crate::consensus::{mine_with, pow_hash, target_for, ConsensusError, MiningTarget};
use crate::crypto::rsa::{KeyPair, PublicKey};
use crate::crypto::sig::{self, Signature};
use crate::hash::Digest;
use crate::ids::AccountId;
use crate::par::Execution;
use crate::trust::TrustFixed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_hash: Digest,
    pub tx_root: Digest,
    pub state_root: Digest,
    pub timestamp_ms: u64,
    pub miner: AccountId,
    pub miner_pk: PublicKey,
    pub miner_trust: TrustFixed,
    /// Base difficulty this block was mined against.
    pub beta: u64,
    pub miner_sig: Signature,
    pub nonce: u64,
}

impl BlockHeader {
    /// Every field except the signature and nonce, in declaration order.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(256);
        out.extend_from_slice(&self.height.to_be_bytes());
        out.extend_from_slice(self.prev_hash.as_bytes());
        out.extend_from_slice(self.tx_root.as_bytes());
        out.extend_from_slice(self.state_root.as_bytes());
        out.extend_from_slice(&self.timestamp_ms.to_be_bytes());
        out.extend_from_slice(self.miner.as_bytes());
        out.extend_from_slice(&self.miner_pk.to_bytes());
        out.extend_from_slice(&self.miner_trust.0.to_be_bytes());
        out.extend_from_slice(&self.beta.to_be_bytes());
        out
    }

    /// Signing bytes followed by the length-prefixed signature; the nonce is
    /// appended to this when hashing.
    pub fn mining_preimage(&self) -> Vec<u8> {
        let mut out = self.signing_bytes();
        out.extend_from_slice(&(self.miner_sig.0.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.miner_sig.0);
        out
    }

    pub fn hash(&self) -> Digest {
        pow_hash(&self.mining_preimage(), self.nonce)
    }

    pub fn target(&self) -> MiningTarget {
        target_for(self.miner_trust.to_f64(), self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
    pub account_states: BTreeMap<AccountId, AccountState>,
}

impl Block {
    pub fn hash(&self) -> Digest {
        self.header.hash()
    }

    pub fn compute_tx_root(transactions: &[Transaction]) -> Digest {
        let leaves: Vec<Vec<u8>> = transactions.iter().map(Transaction::canonical_bytes).collect();
        merkle_root(&leaves)
    }

    /// Root over account states in ascending account-id order.
    pub fn compute_state_root(states: &BTreeMap<AccountId, AccountState>) -> Digest {
        let leaves: Vec<Vec<u8>> = states.values().map(AccountState::canonical_bytes).collect();
        merkle_root(&leaves)
    }

    /// Checks that depend only on the block itself.
    pub(crate) fn check_self_consistent(&self) -> Result<(), LedgerError> {
        if self.account_states.iter().any(|(id, s)| *id != s.account_id) {
            return Err(LedgerError::BadState("map key differs from account id"));
        }
        if self.account_states.values().any(|s| !(0.0..=1.0).contains(&s.trust.tv)) {
            return Err(LedgerError::BadState("trust value outside [0, 1]"));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, tx) in self.transactions.iter().enumerate() {
            if !seen.insert(tx.canonical_bytes()) {
                return Err(LedgerError::DuplicateTransaction(i));
            }
        }
        if Self::compute_tx_root(&self.transactions) != self.header.tx_root {
            return Err(LedgerError::BadRoot("transaction"));
        }
        if Self::compute_state_root(&self.account_states) != self.header.state_root {
            return Err(LedgerError::BadRoot("account state"));
        }
        let h = &self.header;
        if h.miner_pk.account_id() != h.miner || !sig::verify(&h.signing_bytes(), &h.miner_sig, &h.miner_pk) {
            return Err(LedgerError::BadSignature);
        }
        Ok(())
    }
}

/// Everything needed to assemble and mine a block.
#[derive(Debug, Clone)]
pub struct SealRequest<'a> {
    pub height: u64,
    pub prev_hash: Digest,
    pub timestamp_ms: u64,
    pub miner: &'a KeyPair,
    pub miner_trust: TrustFixed,
    pub beta: u64,
    pub transactions: Vec<Transaction>,
    pub account_states: BTreeMap<AccountId, AccountState>,
    /// Nonce budget per timestamp before retrying with `timestamp + 1`.
    pub max_trials: u64,
}

/// Build, sign and mine a block. Returns the block and the total number of
/// hash trials spent.
pub fn seal_block(exec: Execution, req: SealRequest<'_>) -> Result<(Block, u64), LedgerError> {
    let mut header = BlockHeader {
        height: req.height,
        prev_hash: req.prev_hash,
        tx_root: Block::compute_tx_root(&req.transactions),
        state_root: Block::compute_state_root(&req.account_states),
        timestamp_ms: req.timestamp_ms,
        miner: req.miner.public.account_id(),
        miner_pk: req.miner.public.clone(),
        miner_trust: req.miner_trust,
        beta: req.beta,
        miner_sig: Signature::default(),
        nonce: 0,
    };
    let target = header.target();
    let mut spent = 0u64;
    for _ in 0..64 {
        header.miner_sig = sig::sign(&header.signing_bytes(), req.miner);
        match mine_with(exec, &header.mining_preimage(), target, 0, req.max_trials) {
            Ok(found) => {
                header.nonce = found.nonce;
                spent += found.trials;
                let block = Block {
                    header,
                    transactions: req.transactions,
                    account_states: req.account_states,
                };
                return Ok((block, spent));
            }
            Err(ConsensusError::Exhausted { trials }) => {
                spent += trials;
                header.timestamp_ms += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(ConsensusError::Exhausted { trials: spent }.into())
}
