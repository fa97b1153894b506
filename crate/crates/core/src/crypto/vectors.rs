//! Ring-signature conformance vectors: canonical packet bytes, ring keys,
//! signature and the expected verification result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::packet::{Location, SensingPacket};
use super::ring::{ring_sign, ring_verify, RingSignature};
use super::rsa::{KeyPair, PublicKey};
use super::CryptoError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingVector {
    pub name: String,
    pub packet_hex: String,
    pub signature: RingSignature,
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorFile {
    pub description: String,
    pub vectors: Vec<RingVector>,
}

impl RingVector {
    /// Verify this vector, returning the observed result.
    pub fn check(&self) -> Result<bool, CryptoError> {
        let bytes = hex::decode(&self.packet_hex).map_err(|_| CryptoError::Malformed("packet hex"))?;
        let packet = SensingPacket::from_canonical(&bytes)?;
        Ok(ring_verify(&packet, &self.signature))
    }
}

/// Deterministically generate a vector set with toy moduli.
pub fn generate(seed: u64, key_bits: u64) -> Result<VectorFile, CryptoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Vec::new();
    for size in [1usize, 2, 3, 5] {
        let keys: Vec<KeyPair> = (0..size)
            .map(|_| KeyPair::generate(key_bits, &mut rng))
            .collect::<Result<_, _>>()?;
        let ring: Vec<PublicKey> = keys.iter().map(|k| k.public.clone()).collect();
        let signer = rng.gen_range(0..size);
        let msg_id: [u8; 16] = rng.gen();
        let packet = SensingPacket::new(
            &msg_id,
            rng.gen(),
            rng.gen_range(1_600_000_000_000..1_700_000_000_000),
            Location::from_degrees(rng.gen_range(-90.0..90.0), rng.gen_range(-180.0..180.0)),
        );
        let sig = ring_sign(&packet, signer, &keys[signer], &ring, &mut rng)?;
        let packet_hex = hex::encode(packet.canonical_bytes());
        vectors.push(RingVector {
            name: format!("ring{size}-valid"),
            packet_hex: packet_hex.clone(),
            signature: sig.clone(),
            expected: true,
        });

        let mut flipped = packet.clone();
        flipped.sensing_result = !flipped.sensing_result;
        vectors.push(RingVector {
            name: format!("ring{size}-flipped-sr"),
            packet_hex: hex::encode(flipped.canonical_bytes()),
            signature: sig.clone(),
            expected: ring_verify(&flipped, &sig),
        });

        let mut bad = sig.clone();
        let idx = rng.gen_range(0..size);
        rng.fill(&mut bad.xs[idx][..]);
        vectors.push(RingVector {
            name: format!("ring{size}-replaced-x{idx}"),
            packet_hex,
            expected: ring_verify(&packet, &bad),
            signature: bad,
        });
    }
    Ok(VectorFile {
        description: format!("ring signature vectors, {key_bits}-bit RSA members, Feistel E_k, SHA-256 key derivation"),
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_vectors_self_check() {
        let file = generate(99, 64).unwrap();
        assert_eq!(file.vectors.len(), 12);
        for v in &file.vectors {
            assert_eq!(v.check().unwrap(), v.expected, "{}", v.name);
            if v.name.ends_with("valid") {
                assert!(v.expected);
            } else {
                assert!(!v.expected, "{}", v.name);
            }
        }
        assert_eq!(generate(99, 64).unwrap(), file);
    }
}
