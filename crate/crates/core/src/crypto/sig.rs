//! Ordinary account signatures: RSA full-domain-hash.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::rsa::{KeyPair, PublicKey};
use crate::hash::sha256_concat;

const TAG: &[u8] = b"spectrust/fdh";

/// Signature bytes, left-padded to the modulus length.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Signature(#[serde(with = "hex_serde")] pub Vec<u8>);

fn full_domain_hash(payload: &[u8], pk: &PublicKey) -> BigUint {
    let len = pk.modulus_len() + 16;
    let mut out = Vec::with_capacity(len + 32);
    let mut ctr = 0u32;
    while out.len() < len {
        out.extend_from_slice(sha256_concat(&[TAG, &ctr.to_be_bytes(), payload]).as_bytes());
        ctr += 1;
    }
    out.truncate(len);
    BigUint::from_bytes_be(&out) % &pk.modulus
}

pub fn sign(payload: &[u8], key: &KeyPair) -> Signature {
    let s = key.invert(&full_domain_hash(payload, &key.public));
    let raw = s.to_bytes_be();
    let mut out = vec![0u8; key.public.modulus_len()];
    out[key.public.modulus_len() - raw.len()..].copy_from_slice(&raw);
    Signature(out)
}

pub fn verify(payload: &[u8], sig: &Signature, pk: &PublicKey) -> bool {
    if sig.0.len() != pk.modulus_len() {
        return false;
    }
    let s = BigUint::from_bytes_be(&sig.0);
    if s >= pk.modulus {
        return false;
    }
    pk.apply(&s) == full_domain_hash(payload, pk)
}

mod hex_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
