//! Hash-based commitments, account signatures and ring signatures.

pub mod cipher;
pub mod commit;
pub mod packet;
pub mod ring;
pub mod rsa;
pub mod sig;
pub mod vectors;

use thiserror::Error;

pub use commit::{commit, link_reveal, reveal_check, Commitment};
pub use packet::{Location, SensingPacket};
pub use ring::{ring_sign, ring_verify, ring_verify_with, RingSignature};
pub use rsa::{KeyPair, PublicKey};
pub use sig::{sign, verify, Signature};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("secret key does not invert the ring member's public key")]
    BadKey,
    #[error("signer index {index} outside ring of size {size}")]
    SignerOutOfRing { index: usize, size: usize },
    #[error("unsupported modulus size {0} bits")]
    BadKeySize(u64),
    #[error("malformed {0}")]
    Malformed(&'static str),
}
