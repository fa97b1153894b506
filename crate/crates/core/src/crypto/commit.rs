//! Commit-and-reveal linking an account to its anonymous packet.
//!
//! Commitment digest layout: `SHA256(SR u8 | RND [32] | msgID [..])`.

use serde::{Deserialize, Serialize};

use super::packet::SensingPacket;
use crate::hash::{sha256, sha256_concat, Digest};
use crate::ids::{AccountId, ContractId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    pub csc_id: ContractId,
    pub digest: Digest,
    pub committer: AccountId,
}

pub fn commitment_digest(sr: bool, rnd: &[u8; 32], msg_id: &[u8]) -> Digest {
    sha256_concat(&[&[u8::from(sr)], rnd, msg_id])
}

pub fn commit(sr: bool, rnd: &[u8; 32], msg_id: &[u8], csc_id: ContractId, committer: AccountId) -> Commitment {
    Commitment {
        csc_id,
        digest: commitment_digest(sr, rnd, msg_id),
        committer,
    }
}

/// Index of the single packet this reveal opens, if any. The reveal must
/// match the commitment, its `msgID` must hash to exactly one packet's tag,
/// and that packet must carry the committed sensing bit.
pub fn link_reveal(
    c: &Commitment,
    sr: bool,
    rnd: &[u8; 32],
    msg_id: &[u8],
    packets: &[SensingPacket],
) -> Option<usize> {
    if commitment_digest(sr, rnd, msg_id) != c.digest {
        return None;
    }
    let tag = sha256(msg_id);
    let mut hits = packets.iter().enumerate().filter(|(_, p)| p.msg_id_hash == tag);
    let (idx, packet) = hits.next()?;
    if hits.next().is_some() || packet.sensing_result != sr {
        return None;
    }
    Some(idx)
}

pub fn reveal_check(c: &Commitment, sr: bool, rnd: &[u8; 32], msg_id: &[u8], packets: &[SensingPacket]) -> bool {
    link_reveal(c, sr, rnd, msg_id, packets).is_some()
}
