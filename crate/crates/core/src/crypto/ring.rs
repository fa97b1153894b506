//! Ring signatures over RSA trapdoor permutations.
//!
//! A signature is `(pk_1..pk_n, v, x_1..x_n)`. With `y_i = g_i(x_i)` and
//! `k = H(packet)`, it is valid when the ring equation closes:
//!
//! ```text
//! E_k(y_n xor E_k(y_{n-1} xor ... E_k(y_1 xor v)...)) = v
//! ```
//!
//! All `x_i`, `y_i` and `v` live in a common domain of `8 * w` bits, where
//! `w` is [`domain_width`] of the ring.

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::cipher::{xor, FeistelCipher};
use super::packet::SensingPacket;
use super::rsa::{KeyPair, PublicKey};
use super::CryptoError;
use crate::par::Execution;

/// Slack bits above the largest modulus so the identity region of the
/// extended permutations is negligible.
const DOMAIN_SLACK_BITS: u64 = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingSignature {
    pub ring: Vec<PublicKey>,
    #[serde(with = "hex_bytes")]
    pub glue: Vec<u8>,
    #[serde(with = "hex_vec")]
    pub xs: Vec<Vec<u8>>,
}

/// Common domain width in bytes (always even, so the Feistel halves match).
pub fn domain_width(ring: &[PublicKey]) -> usize {
    let max_bits = ring.iter().map(PublicKey::bits).max().unwrap_or(0);
    let bytes = (max_bits + DOMAIN_SLACK_BITS).div_ceil(8) as usize;
    bytes + bytes % 2
}

fn to_block(v: &BigUint, width: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    let mut out = vec![0u8; width];
    out[width - raw.len()..].copy_from_slice(&raw);
    out
}

fn forward(pk: &PublicKey, x: &[u8], width: usize) -> Vec<u8> {
    let bits = 8 * width as u64;
    to_block(&pk.apply_extended(&BigUint::from_bytes_be(x), bits), width)
}

fn random_block<R: RngCore + ?Sized>(width: usize, rng: &mut R) -> Vec<u8> {
    let mut b = vec![0u8; width];
    rng.fill_bytes(&mut b);
    b
}

pub fn ring_sign<R: RngCore + ?Sized>(
    packet: &SensingPacket,
    signer_index: usize,
    signer: &KeyPair,
    ring: &[PublicKey],
    rng: &mut R,
) -> Result<RingSignature, CryptoError> {
    if signer_index >= ring.len() {
        return Err(CryptoError::SignerOutOfRing {
            index: signer_index,
            size: ring.len(),
        });
    }
    if ring[signer_index] != signer.public || !signer.is_consistent() {
        return Err(CryptoError::BadKey);
    }
    let width = domain_width(ring);
    let cipher = FeistelCipher::new(packet.symmetric_key(), width);
    let glue = random_block(width, rng);

    let mut xs = vec![Vec::new(); ring.len()];
    let mut ys = vec![Vec::new(); ring.len()];
    for (i, pk) in ring.iter().enumerate() {
        if i != signer_index {
            xs[i] = random_block(width, rng);
            ys[i] = forward(pk, &xs[i], width);
        }
    }

    // value entering the signer's position
    let mut before = glue.clone();
    for y in &ys[..signer_index] {
        before = cipher.encrypt(&xor(y, &before));
    }
    // value the signer's position must output so the rest closes back to v
    let mut after = glue.clone();
    for y in ys[signer_index + 1..].iter().rev() {
        after = xor(&cipher.decrypt(&after), y);
    }
    let y_s = xor(&cipher.decrypt(&after), &before);
    let x_s = signer.invert_extended(&BigUint::from_bytes_be(&y_s), 8 * width as u64);
    xs[signer_index] = to_block(&x_s, width);

    Ok(RingSignature {
        ring: ring.to_vec(),
        glue,
        xs,
    })
}

pub fn ring_verify(packet: &SensingPacket, sig: &RingSignature) -> bool {
    ring_verify_with(Execution::default(), packet, sig)
}

pub fn ring_verify_with(exec: Execution, packet: &SensingPacket, sig: &RingSignature) -> bool {
    if sig.ring.is_empty() || sig.xs.len() != sig.ring.len() {
        return false;
    }
    let width = domain_width(&sig.ring);
    if sig.glue.len() != width || sig.xs.iter().any(|x| x.len() != width) {
        return false;
    }
    let pairs: Vec<(&PublicKey, &Vec<u8>)> = sig.ring.iter().zip(&sig.xs).collect();
    let ys = exec.map(&pairs, |(pk, x)| forward(pk, x, width));
    let cipher = FeistelCipher::new(packet.symmetric_key(), width);
    let closed = ys.iter().fold(sig.glue.clone(), |z, y| cipher.encrypt(&xor(y, &z)));
    closed == sig.glue
}

impl RingSignature {
    /// `u16 n | u16 w | v [w] | n x (public key bytes | x_i [w])`
    pub fn to_bytes(&self) -> Vec<u8> {
        let width = self.glue.len();
        let mut out = Vec::new();
        out.extend_from_slice(&(self.ring.len() as u16).to_be_bytes());
        out.extend_from_slice(&(width as u16).to_be_bytes());
        out.extend_from_slice(&self.glue);
        for (pk, x) in self.ring.iter().zip(&self.xs) {
            out.extend_from_slice(&pk.to_bytes());
            out.extend_from_slice(x);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let err = CryptoError::Malformed("ring signature");
        if bytes.len() < 4 {
            return Err(err);
        }
        let n = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
        let width = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
        let mut at = 4;
        let glue = bytes.get(at..at + width).ok_or(err.clone())?.to_vec();
        at += width;
        let mut ring = Vec::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let (pk, used) = PublicKey::from_bytes(&bytes[at..])?;
            at += used;
            xs.push(bytes.get(at..at + width).ok_or(err.clone())?.to_vec());
            at += width;
            ring.push(pk);
        }
        if at != bytes.len() {
            return Err(err);
        }
        Ok(RingSignature { ring, glue, xs })
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

mod hex_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(hex::encode).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|h| hex::decode(h).map_err(serde::de::Error::custom))
            .collect()
    }
}
