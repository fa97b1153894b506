use serde::{Deserialize, Serialize};

use super::CryptoError;
use crate::hash::{sha256, Digest};

/// Position in micro-degrees (six decimal digits).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Location {
    pub lat_micro: i32,
    pub lon_micro: i32,
}

impl Location {
    pub fn from_degrees(lat: f64, lon: f64) -> Self {
        Location {
            lat_micro: (lat * 1e6).round() as i32,
            lon_micro: (lon * 1e6).round() as i32,
        }
    }
}

/// An anonymous sensing upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingPacket {
    pub msg_id_hash: Digest,
    pub sensing_result: bool,
    pub timestamp_ms: u64,
    pub location: Location,
}

impl SensingPacket {
    pub const ENCODED_LEN: usize = 49;

    pub fn new(msg_id: &[u8], sensing_result: bool, timestamp_ms: u64, location: Location) -> Self {
        SensingPacket {
            msg_id_hash: sha256(msg_id),
            sensing_result,
            timestamp_ms,
            location,
        }
    }

    /// `H(msgID) [32] | SR u8 | time u64 | lat i32 | lon i32`, big-endian.
    /// The ring-signature key is the hash of exactly these bytes.
    pub fn canonical_bytes(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        out[..32].copy_from_slice(self.msg_id_hash.as_bytes());
        out[32] = u8::from(self.sensing_result);
        out[33..41].copy_from_slice(&self.timestamp_ms.to_be_bytes());
        out[41..45].copy_from_slice(&self.location.lat_micro.to_be_bytes());
        out[45..49].copy_from_slice(&self.location.lon_micro.to_be_bytes());
        out
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(CryptoError::Malformed("packet length"));
        }
        let sr = match bytes[32] {
            0 => false,
            1 => true,
            _ => return Err(CryptoError::Malformed("packet sensing bit")),
        };
        Ok(SensingPacket {
            msg_id_hash: Digest(bytes[..32].try_into().unwrap()),
            sensing_result: sr,
            timestamp_ms: u64::from_be_bytes(bytes[33..41].try_into().unwrap()),
            location: Location {
                lat_micro: i32::from_be_bytes(bytes[41..45].try_into().unwrap()),
                lon_micro: i32::from_be_bytes(bytes[45..49].try_into().unwrap()),
            },
        })
    }

    pub fn symmetric_key(&self) -> Digest {
        sha256(&self.canonical_bytes())
    }
}
