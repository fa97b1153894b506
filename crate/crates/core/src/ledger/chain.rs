use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::block::{seal_block, Block, SealRequest};
use super::{AccountState, LedgerError};
use crate::consensus::{adapt_base, DifficultyParams};
use crate::crypto::rsa::KeyPair;
use crate::ids::AccountId;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub difficulty: DifficultyParams,
    /// Compress after this many blocks.
    pub compress_every: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            difficulty: DifficultyParams::default(),
            compress_every: 100,
        }
    }
}

/// An append-only chain that validates every block it accepts.
#[derive(Debug, Clone)]
pub struct Chain {
    config: ChainConfig,
    blocks: Vec<Block>,
    next_beta: u64,
}

/// Budget of nonce trials per timestamp when sealing.
fn trial_budget(beta: u64) -> u64 {
    beta.saturating_mul(64).max(1 << 16)
}

impl Chain {
    /// Start a chain from an already mined genesis block. The genesis miner's
    /// trust is checked against the genesis state itself.
    pub fn new(config: ChainConfig, genesis: Block) -> Result<Self, LedgerError> {
        genesis.check_self_consistent()?;
        check_trust_and_work(&genesis, &genesis.account_states)?;
        Ok(Chain {
            next_beta: genesis.header.beta,
            config,
            blocks: vec![genesis],
        })
    }

    /// Mine a fresh genesis block at `beta0` holding `states`.
    pub fn genesis(
        config: ChainConfig,
        miner: &KeyPair,
        states: BTreeMap<AccountId, AccountState>,
        timestamp_ms: u64,
        exec: Execution,
    ) -> Result<Self, LedgerError> {
        let id = miner.public.account_id();
        let trust = states
            .get(&id)
            .ok_or(LedgerError::BadState("genesis miner has no account"))?
            .trust
            .fixed();
        let beta = config.difficulty.beta0;
        let (block, _) = seal_block(
            exec,
            SealRequest {
                height: 0,
                prev_hash: crate::hash::Digest::ZERO,
                timestamp_ms,
                miner,
                miner_trust: trust,
                beta,
                transactions: Vec::new(),
                account_states: states,
                max_trials: trial_budget(beta),
            },
        )?;
        Chain::new(config, block)
    }

    /// Rebuild a chain from stored blocks, re-validating each one.
    pub fn from_blocks(config: ChainConfig, blocks: Vec<Block>) -> Result<Self, LedgerError> {
        let mut it = blocks.into_iter();
        let genesis = it.next().ok_or(LedgerError::BadState("no blocks"))?;
        let mut chain = Chain::new(config, genesis)?;
        for b in it {
            chain.append_block(b)?;
        }
        Ok(chain)
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds a genesis block")
    }

    pub fn state(&self) -> &BTreeMap<AccountId, AccountState> {
        &self.tip().account_states
    }

    pub fn account(&self, id: &AccountId) -> Option<&AccountState> {
        self.state().get(id)
    }

    /// Base difficulty the next block must be mined against.
    pub fn next_beta(&self) -> u64 {
        self.next_beta
    }

    pub fn next_height(&self) -> u64 {
        self.tip().header.height + 1
    }

    pub fn append_block(&mut self, block: Block) -> Result<(), LedgerError> {
        let parent = self.tip();
        let h = &block.header;
        if h.prev_hash != parent.hash() || h.height != parent.header.height + 1 {
            return Err(LedgerError::BadParent);
        }
        if h.timestamp_ms <= parent.header.timestamp_ms {
            return Err(LedgerError::BadTimestamp {
                parent: parent.header.timestamp_ms,
                found: h.timestamp_ms,
            });
        }
        block.check_self_consistent()?;
        if h.beta != self.next_beta {
            check_trust(&block, &parent.account_states)?;
            return Err(LedgerError::BadBaseDifficulty {
                expected: self.next_beta,
                found: h.beta,
            });
        }
        check_trust_and_work(&block, &parent.account_states)?;
        for (index, tx) in block.transactions.iter().enumerate() {
            tx.verify()
                .map_err(|source| LedgerError::BadTransaction { index, source })?;
        }
        let parent_ts = parent.header.timestamp_ms;
        self.next_beta = adapt_base(h.beta, h.timestamp_ms, parent_ts, &self.config.difficulty);
        self.blocks.push(block);
        Ok(())
    }

    /// Seal `transactions` and `states` on top of the tip and append.
    /// Returns the hash trials spent.
    pub fn seal_and_append(
        &mut self,
        exec: Execution,
        miner: &KeyPair,
        transactions: Vec<super::Transaction>,
        states: BTreeMap<AccountId, AccountState>,
        timestamp_ms: u64,
    ) -> Result<u64, LedgerError> {
        let id = miner.public.account_id();
        let trust = self
            .account(&id)
            .ok_or(LedgerError::BadTrustField {
                expected: None,
                found: Default::default(),
            })?
            .trust
            .fixed();
        let beta = self.next_beta;
        let (block, trials) = seal_block(
            exec,
            SealRequest {
                height: self.next_height(),
                prev_hash: self.tip().hash(),
                timestamp_ms: timestamp_ms.max(self.tip().header.timestamp_ms + 1),
                miner,
                miner_trust: trust,
                beta,
                transactions,
                account_states: states,
                max_trials: trial_budget(beta),
            },
        )?;
        self.append_block(block)?;
        Ok(trials)
    }

    /// Recompute every header hash and compare it with the child's link.
    pub fn verify_links(&self) -> bool {
        self.blocks
            .windows(2)
            .all(|w| w[1].header.prev_hash == w[0].hash() && w[1].header.height == w[0].header.height + 1)
    }

    pub fn compression_due(&self) -> bool {
        self.blocks.len() >= self.config.compress_every
    }

    /// Replace the chain with a verified compressed genesis block.
    pub fn install_compressed(&mut self, genesis: Block) -> Result<(), LedgerError> {
        verify_compression(self, &genesis)?;
        self.blocks = vec![genesis];
        self.next_beta = self.config.difficulty.beta0;
        Ok(())
    }

    /// Build, verify and install a compressed genesis mined by `compressor`.
    pub fn compress(&mut self, compressor: &KeyPair, timestamp_ms: u64, exec: Execution) -> Result<(), LedgerError> {
        let genesis = build_compressed_genesis(self, compressor, timestamp_ms, exec)?;
        self.install_compressed(genesis)
    }
}

fn check_trust(block: &Block, parent_state: &BTreeMap<AccountId, AccountState>) -> Result<(), LedgerError> {
    let h = &block.header;
    let expected = parent_state.get(&h.miner).map(|a| a.trust.fixed());
    if expected != Some(h.miner_trust) {
        return Err(LedgerError::BadTrustField {
            expected,
            found: h.miner_trust,
        });
    }
    Ok(())
}

fn check_trust_and_work(block: &Block, parent_state: &BTreeMap<AccountId, AccountState>) -> Result<(), LedgerError> {
    check_trust(block, parent_state)?;
    let target = block.header.target();
    if !target.is_met(&block.hash()) {
        return Err(LedgerError::BadPoW { required: target.0 });
    }
    Ok(())
}

/// Highest-trust account, ties going to the smallest account id.
pub fn compression_authority(states: &BTreeMap<AccountId, AccountState>) -> Option<AccountId> {
    states
        .values()
        .min_by(|a, b| b.trust.tv.total_cmp(&a.trust.tv).then(a.account_id.cmp(&b.account_id)))
        .map(|a| a.account_id)
}

/// New genesis carrying the tip's full account state, mined at `beta0` by
/// the compression authority.
pub fn build_compressed_genesis(
    chain: &Chain,
    compressor: &KeyPair,
    timestamp_ms: u64,
    exec: Execution,
) -> Result<Block, LedgerError> {
    let id = compressor.public.account_id();
    if compression_authority(chain.state()) != Some(id) {
        return Err(LedgerError::NotAuthorized(id));
    }
    if !chain.compression_due() {
        return Err(LedgerError::NotDue {
            length: chain.len(),
            needed: chain.config.compress_every,
        });
    }
    let tip = chain.tip();
    let beta = chain.config.difficulty.beta0;
    let (block, _) = seal_block(
        exec,
        SealRequest {
            height: tip.header.height + 1,
            prev_hash: tip.hash(),
            timestamp_ms: timestamp_ms.max(tip.header.timestamp_ms + 1),
            miner: compressor,
            miner_trust: tip.account_states[&id].trust.fixed(),
            beta,
            transactions: Vec::new(),
            account_states: tip.account_states.clone(),
            max_trials: trial_budget(beta),
        },
    )?;
    Ok(block)
}

/// Check a compressed genesis against the current tip before the old blocks
/// are discarded.
pub fn verify_compression(chain: &Chain, genesis: &Block) -> Result<(), LedgerError> {
    let tip = chain.tip();
    if genesis.header.prev_hash != tip.hash() || genesis.header.height != tip.header.height + 1 {
        return Err(LedgerError::BadParent);
    }
    let authority = compression_authority(&tip.account_states);
    if authority != Some(genesis.header.miner) {
        return Err(LedgerError::NotAuthorized(genesis.header.miner));
    }
    if !genesis.transactions.is_empty() {
        return Err(LedgerError::BadState("compressed genesis carries transactions"));
    }
    let old: Vec<_> = tip.account_states.keys().collect();
    let new: Vec<_> = genesis.account_states.keys().collect();
    if old != new {
        return Err(LedgerError::StateMismatch(None));
    }
    for (id, state) in &tip.account_states {
        if genesis.account_states[id].canonical_bytes() != state.canonical_bytes() {
            return Err(LedgerError::StateMismatch(Some(*id)));
        }
    }
    genesis.check_self_consistent()?;
    if genesis.header.beta != chain.config.difficulty.beta0 {
        return Err(LedgerError::BadBaseDifficulty {
            expected: chain.config.difficulty.beta0,
            found: genesis.header.beta,
        });
    }
    check_trust_and_work(genesis, &tip.account_states)
}
