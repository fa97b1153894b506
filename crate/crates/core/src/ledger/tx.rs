use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TxKind;
use crate::crypto::ring::{ring_verify, RingSignature};
use crate::crypto::rsa::{KeyPair, PublicKey};
use crate::crypto::sig::{self, Signature};
use crate::crypto::SensingPacket;
use crate::ids::{AccountId, ContractId};
use crate::payload::{Payload, PayloadError};

/// Issuer of protocol-level outputs such as mining rewards.
pub const PROTOCOL_CONTRACT: ContractId = ContractId(0);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error("payload does not match the declared kind")]
    KindMismatch,
    #[error("signature does not verify")]
    BadSignature,
    #[error("payload account differs from the signer")]
    SignerMismatch,
    #[error("{0:?} cannot be issued under this authorization")]
    Unauthorized(TxKind),
}

/// Who vouches for a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Authorization {
    Account {
        public_key: PublicKey,
        signature: Signature,
    },
    /// Anonymous upload: the ring signature is over the sensing packet.
    Ring(RingSignature),
    /// Output of a native contract, validated by re-execution rather than a
    /// signature.
    Contract(ContractId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub kind: TxKind,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    pub auth: Authorization,
}

fn signing_bytes(kind: TxKind, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 5);
    out.push(kind as u8);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

impl Transaction {
    pub fn signed(payload: &Payload, key: &KeyPair) -> Self {
        let kind = payload.kind();
        let bytes = payload.encode();
        let signature = sig::sign(&signing_bytes(kind, &bytes), key);
        Transaction {
            kind,
            payload: bytes,
            auth: Authorization::Account {
                public_key: key.public.clone(),
                signature,
            },
        }
    }

    pub fn ring_signed(csc_id: ContractId, packet: SensingPacket, signature: RingSignature) -> Self {
        let payload = Payload::SensingUpload { csc_id, packet };
        Transaction {
            kind: TxKind::SensingUpload,
            payload: payload.encode(),
            auth: Authorization::Ring(signature),
        }
    }

    pub fn contract_output(contract: ContractId, payload: &Payload) -> Self {
        Transaction {
            kind: payload.kind(),
            payload: payload.encode(),
            auth: Authorization::Contract(contract),
        }
    }

    /// `kind u8 | len u32 | payload`, the bytes an account signs.
    pub fn signing_bytes(&self) -> Vec<u8> {
        signing_bytes(self.kind, &self.payload)
    }

    /// Signing bytes followed by the authorization, the transaction merkle leaf.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = self.signing_bytes();
        match &self.auth {
            Authorization::Account { public_key, signature } => {
                out.push(0);
                out.extend_from_slice(&public_key.to_bytes());
                out.extend_from_slice(&(signature.0.len() as u16).to_be_bytes());
                out.extend_from_slice(&signature.0);
            }
            Authorization::Ring(sig) => {
                out.push(1);
                out.extend_from_slice(&sig.to_bytes());
            }
            Authorization::Contract(id) => {
                out.push(2);
                out.extend_from_slice(&id.0.to_be_bytes());
            }
        }
        out
    }

    pub fn decode_payload(&self) -> Result<Payload, PayloadError> {
        Payload::decode(&self.payload)
    }

    pub fn signer_id(&self) -> Option<AccountId> {
        match &self.auth {
            Authorization::Account { public_key, .. } => Some(public_key.account_id()),
            _ => None,
        }
    }

    pub fn verify(&self) -> Result<Payload, TxError> {
        let payload = self.decode_payload()?;
        if payload.kind() != self.kind {
            return Err(TxError::KindMismatch);
        }
        match &self.auth {
            Authorization::Account { public_key, signature } => {
                let account = match &payload {
                    Payload::CscDeploy { .. } | Payload::SacDeploy { .. } => None,
                    Payload::CscDeposit { pk, .. }
                    | Payload::SacDeposit { pk, .. }
                    | Payload::BidCommit { pk, .. }
                    | Payload::SensingCommit { pk, .. }
                    | Payload::SensingReveal { pk, .. }
                    | Payload::BidReveal { pk, .. } => Some(*pk),
                    _ => return Err(TxError::Unauthorized(self.kind)),
                };
                if !sig::verify(&self.signing_bytes(), signature, public_key) {
                    return Err(TxError::BadSignature);
                }
                if account.is_some_and(|pk| pk != public_key.account_id()) {
                    return Err(TxError::SignerMismatch);
                }
            }
            Authorization::Ring(sig) => {
                let Payload::SensingUpload { packet, .. } = &payload else {
                    return Err(TxError::Unauthorized(self.kind));
                };
                if !ring_verify(packet, sig) {
                    return Err(TxError::BadSignature);
                }
            }
            Authorization::Contract(id) => match &payload {
                Payload::Settlement { contract, .. } if contract == id => {}
                Payload::Reward { .. } if *id == PROTOCOL_CONTRACT => {}
                _ => return Err(TxError::Unauthorized(self.kind)),
            },
        }
        Ok(payload)
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ring::ring_sign;
    use crate::crypto::Location;
    use crate::payload::SettlementKind;
    use crate::trust::TrustFixed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn keys(n: usize) -> Vec<KeyPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..n).map(|_| KeyPair::generate(128, &mut rng).unwrap()).collect()
    }

    #[test]
    fn account_signed_deposit() {
        let k = keys(2);
        let p = Payload::CscDeposit {
            pk: k[0].public.account_id(),
            tv: TrustFixed(9100),
            csc_id: ContractId(1),
            deposit: 100,
        };
        let tx = Transaction::signed(&p, &k[0]);
        assert_eq!(tx.verify().unwrap(), p);

        let mut forged = Transaction::signed(&p, &k[1]);
        assert_eq!(forged.verify(), Err(TxError::SignerMismatch));
        forged.auth = tx.auth.clone();
        forged.payload[40] ^= 1;
        assert_eq!(forged.verify(), Err(TxError::BadSignature));
    }

    #[test]
    fn ring_signed_upload() {
        let k = keys(3);
        let ring: Vec<PublicKey> = k.iter().map(|k| k.public.clone()).collect();
        let packet = SensingPacket::new(b"m", true, 10, Location::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sig = ring_sign(&packet, 1, &k[1], &ring, &mut rng).unwrap();
        let tx = Transaction::ring_signed(ContractId(4), packet.clone(), sig.clone());
        assert!(tx.verify().is_ok());
        assert_eq!(tx.signer_id(), None);

        let mut other = packet;
        other.sensing_result = false;
        let bad = Transaction::ring_signed(ContractId(4), other, sig);
        assert_eq!(bad.verify(), Err(TxError::BadSignature));
    }

    #[test]
    fn contract_outputs_are_scoped() {
        let pk = keys(1)[0].public.account_id();
        let s = Payload::Settlement {
            contract: ContractId(3),
            pk,
            kind: SettlementKind::SensingReward,
            credit: 10,
            forfeited: 0,
        };
        assert!(Transaction::contract_output(ContractId(3), &s).verify().is_ok());
        assert_eq!(
            Transaction::contract_output(ContractId(4), &s).verify(),
            Err(TxError::Unauthorized(TxKind::Settlement))
        );
        let r = Payload::Reward {
            pk,
            amount: 5,
            round: 1,
        };
        assert!(Transaction::contract_output(PROTOCOL_CONTRACT, &r).verify().is_ok());
        let mut tx = Transaction::contract_output(PROTOCOL_CONTRACT, &r);
        tx.kind = TxKind::Deposit;
        assert_eq!(tx.verify(), Err(TxError::KindMismatch));
    }
}
