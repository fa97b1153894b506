//! Proof of Trust: trust-scaled mining difficulty, nonce search, base
//! difficulty adaptation and fork choice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{sha256_concat, Digest};
use crate::ids::AccountId;
use crate::par::Execution;

pub const MAX_TARGET_BITS: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("no nonce found in {trials} trials")]
    Exhausted { trials: u64 },
    #[error("invalid difficulty parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyParams {
    pub beta0: u64,
    pub t0_ms: u64,
    pub beta_min: u64,
}

impl Default for DifficultyParams {
    fn default() -> Self {
        DifficultyParams {
            beta0: 262_144,
            t0_ms: 1000,
            beta_min: 1024,
        }
    }
}

impl DifficultyParams {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.beta0 == 0 {
            return Err(ConsensusError::InvalidParams("beta0 must be positive".into()));
        }
        if self.t0_ms == 0 {
            return Err(ConsensusError::InvalidParams("t0_ms must be positive".into()));
        }
        if self.beta_min == 0 || self.beta_min > self.beta0 {
            return Err(ConsensusError::InvalidParams("beta_min must be in 1..=beta0".into()));
        }
        Ok(())
    }
}

/// Required number of leading zero bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MiningTarget(pub u32);

impl MiningTarget {
    pub fn is_met(self, hash: &Digest) -> bool {
        hash.leading_zero_bits() >= self.0
    }
}

/// Trust-scaled difficulty `beta * (1 - sin(pi/2 * tv))`, floored at 1.
pub fn difficulty(tv: f64, beta: u64) -> f64 {
    let tv = tv.clamp(0.0, 1.0);
    let d = beta as f64 * (1.0 - (std::f64::consts::FRAC_PI_2 * tv).sin());
    d.max(1.0)
}

/// Leading-zero-bit target for a difficulty value.
pub fn target_from_difficulty(d: f64) -> MiningTarget {
    let z = d.max(2.0).log2().ceil() as i64;
    MiningTarget(z.clamp(1, MAX_TARGET_BITS as i64) as u32)
}

pub fn target_for(tv: f64, beta: u64) -> MiningTarget {
    target_from_difficulty(difficulty(tv, beta))
}

/// Expected hash evaluations to meet `z` leading zero bits.
pub fn expected_cost(z: MiningTarget) -> f64 {
    2f64.powi(z.0 as i32)
}

/// Hash of a mining preimage with a nonce: `H(preimage | nonce u64 BE)`.
pub fn pow_hash(preimage: &[u8], nonce: u64) -> Digest {
    sha256_concat(&[preimage, &nonce.to_be_bytes()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningResult {
    pub nonce: u64,
    pub trials: u64,
}

const BATCH: u64 = 1 << 14;

pub fn mine(
    preimage: &[u8],
    target: MiningTarget,
    nonce_start: u64,
    max_trials: u64,
) -> Result<MiningResult, ConsensusError> {
    mine_with(Execution::default(), preimage, target, nonce_start, max_trials)
}

/// Smallest nonce at or after `nonce_start` meeting `target`. The result is
/// the same in every execution mode.
pub fn mine_with(
    exec: Execution,
    preimage: &[u8],
    target: MiningTarget,
    nonce_start: u64,
    max_trials: u64,
) -> Result<MiningResult, ConsensusError> {
    let end = nonce_start.saturating_add(max_trials);
    let mut lo = nonce_start;
    while lo < end {
        let hi = lo.saturating_add(BATCH).min(end);
        if let Some(nonce) = exec.find_first(lo, hi, |n| target.is_met(&pow_hash(preimage, n))) {
            return Ok(MiningResult {
                nonce,
                trials: nonce - nonce_start + 1,
            });
        }
        lo = hi;
    }
    Err(ConsensusError::Exhausted {
        trials: end - nonce_start,
    })
}

pub fn check_pow(preimage: &[u8], nonce: u64, target: MiningTarget) -> bool {
    target.is_met(&pow_hash(preimage, nonce))
}

/// Lower the base difficulty by `floor(beta/128)` for every full `t0` between
/// the two previous blocks, never going below `beta_min`.
pub fn adapt_base(beta: u64, t_prev_ms: u64, t_prev2_ms: u64, params: &DifficultyParams) -> u64 {
    let steps = t_prev_ms.saturating_sub(t_prev2_ms) / params.t0_ms;
    let step = beta / 128;
    beta.saturating_sub(steps.saturating_mul(step)).max(params.beta_min)
}

/// A competing chain tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkCandidate {
    pub hash: Digest,
    pub miner: AccountId,
    pub miner_trust: f64,
    pub timestamp_ms: u64,
}

/// Preference order: higher miner trust first, then earlier timestamp, then
/// smaller block hash.
pub fn fork_order(a: &ForkCandidate, b: &ForkCandidate) -> std::cmp::Ordering {
    b.miner_trust
        .total_cmp(&a.miner_trust)
        .then(a.timestamp_ms.cmp(&b.timestamp_ms))
        .then(a.hash.cmp(&b.hash))
}

pub fn resolve_fork(candidates: &[ForkCandidate]) -> Option<&ForkCandidate> {
    candidates.iter().min_by(|a, b| fork_order(a, b))
}
