//! Fixed-layout transaction payloads.
//!
//! Every payload starts with a one-byte tag, followed by big-endian
//! fixed-width fields in the order listed on each variant. Widths: contract
//! ids, times (ms) and token amounts are `u64`; counts are `u32`; trust is
//! [`TrustFixed`] as `u32`; accounts and digests are 32 bytes; booleans are a
//! single `0`/`1` byte; coordinates are `i32` micro-degrees.

use thiserror::Error;

use crate::crypto::packet::{Location, SensingPacket};
use crate::hash::Digest;
use crate::ids::{AccountId, ContractId};
use crate::ledger::TxKind;
use crate::trust::TrustFixed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("payload truncated")]
    Truncated,
    #[error("unknown payload tag {0:#04x}")]
    UnknownTag(u8),
    #[error("invalid field {0}")]
    InvalidField(&'static str),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BidOpening {
    pub amount: u64,
    pub valid: bool,
    pub rnd: [u8; 32],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SettlementKind {
    SensingReward = 0,
    SensingForfeit = 1,
    AmbiguousLink = 2,
    AuctionWin = 3,
    AuctionRefund = 4,
    TaskVoided = 5,
    AuctionProceeds = 6,
}

impl SettlementKind {
    fn from_u8(v: u8) -> Result<Self, PayloadError> {
        use SettlementKind::*;
        Ok(match v {
            0 => SensingReward,
            1 => SensingForfeit,
            2 => AmbiguousLink,
            3 => AuctionWin,
            4 => AuctionRefund,
            5 => TaskVoided,
            6 => AuctionProceeds,
            _ => return Err(PayloadError::InvalidField("settlement kind")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// `0x01 | csc_id | t_ddl | n1 u32 | tv_thr | fusion u8 | d_s | reward_sensing`
    CscDeploy {
        csc_id: ContractId,
        t_ddl: u64,
        n1: u32,
        tv_thr: TrustFixed,
        fusion: u8,
        d_s: u64,
        reward_sensing: u64,
    },
    /// `0x02 | csc_id | sac_id | n2 u32 | t_self_d | win u8 | d_a`
    SacDeploy {
        csc_id: ContractId,
        sac_id: ContractId,
        n2: u32,
        t_self_d: u64,
        win: u8,
        d_a: u64,
    },
    /// `0x03 | pk [32] | tv | csc_id | deposit`
    CscDeposit {
        pk: AccountId,
        tv: TrustFixed,
        csc_id: ContractId,
        deposit: u64,
    },
    /// `0x04 | pk [32] | tv | sac_id | deposit | bid_commit [32] | value`
    SacDeposit {
        pk: AccountId,
        tv: TrustFixed,
        sac_id: ContractId,
        deposit: u64,
        bid_commit: Digest,
        value: u64,
    },
    /// `0x05 | sac_id | pk [32] | digest [32] | value`
    BidCommit {
        sac_id: ContractId,
        pk: AccountId,
        digest: Digest,
        value: u64,
    },
    /// `0x06 | csc_id | H(msgID) [32] | TS | SR | lat | lon`
    SensingUpload { csc_id: ContractId, packet: SensingPacket },
    /// `0x07 | csc_id | digest [32] | pk [32]`
    SensingCommit {
        csc_id: ContractId,
        digest: Digest,
        pk: AccountId,
    },
    /// `0x08 | csc_id | pk [32] | SR | RND [32] | len u16 | msgID`
    SensingReveal {
        csc_id: ContractId,
        pk: AccountId,
        sr: bool,
        rnd: [u8; 32],
        msg_id: Vec<u8>,
    },
    /// `0x09 | sac_id | pk [32] | count u16 | count x (amount | valid | RND [32])`
    BidReveal {
        sac_id: ContractId,
        pk: AccountId,
        openings: Vec<BidOpening>,
    },
    /// `0x0a | contract | pk [32] | kind u8 | credit | forfeited`
    Settlement {
        contract: ContractId,
        pk: AccountId,
        kind: SettlementKind,
        credit: u64,
        forfeited: u64,
    },
    /// `0x0b | pk [32] | amount | round`
    Reward { pk: AccountId, amount: u64, round: u64 },
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) -> &mut Self {
        self.0.push(v);
        self
    }
    fn u16(&mut self, v: u16) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn u32(&mut self, v: u32) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn u64(&mut self, v: u64) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn i32(&mut self, v: i32) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.0.extend_from_slice(v);
        self
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PayloadError> {
        let s = self.buf.get(self.at..self.at + n).ok_or(PayloadError::Truncated)?;
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, PayloadError> {
        Ok(self.take(1)?[0])
    }
    fn bool(&mut self) -> Result<bool, PayloadError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(PayloadError::InvalidField("boolean")),
        }
    }
    fn u16(&mut self) -> Result<u16, PayloadError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, PayloadError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, PayloadError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn i32(&mut self) -> Result<i32, PayloadError> {
        Ok(i32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn b32(&mut self) -> Result<[u8; 32], PayloadError> {
        Ok(self.take(32)?.try_into().unwrap())
    }
    fn digest(&mut self) -> Result<Digest, PayloadError> {
        self.b32().map(Digest)
    }
    fn account(&mut self) -> Result<AccountId, PayloadError> {
        self.digest().map(AccountId)
    }
    fn id(&mut self) -> Result<ContractId, PayloadError> {
        self.u64().map(ContractId)
    }
    fn trust(&mut self) -> Result<TrustFixed, PayloadError> {
        self.u32().map(TrustFixed)
    }
}

impl Payload {
    pub fn kind(&self) -> TxKind {
        use Payload::*;
        match self {
            CscDeploy { .. } | SacDeploy { .. } => TxKind::ContractDeploy,
            CscDeposit { .. } | SacDeposit { .. } => TxKind::Deposit,
            BidCommit { .. } => TxKind::BidCommit,
            SensingUpload { .. } => TxKind::SensingUpload,
            SensingCommit { .. } => TxKind::SensingCommit,
            SensingReveal { .. } | BidReveal { .. } => TxKind::Reveal,
            Settlement { .. } => TxKind::Settlement,
            Reward { .. } => TxKind::Reward,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(96));
        match self {
            Payload::CscDeploy {
                csc_id,
                t_ddl,
                n1,
                tv_thr,
                fusion,
                d_s,
                reward_sensing,
            } => {
                w.u8(0x01)
                    .u64(csc_id.0)
                    .u64(*t_ddl)
                    .u32(*n1)
                    .u32(tv_thr.0)
                    .u8(*fusion)
                    .u64(*d_s)
                    .u64(*reward_sensing);
            }
            Payload::SacDeploy {
                csc_id,
                sac_id,
                n2,
                t_self_d,
                win,
                d_a,
            } => {
                w.u8(0x02)
                    .u64(csc_id.0)
                    .u64(sac_id.0)
                    .u32(*n2)
                    .u64(*t_self_d)
                    .u8(*win)
                    .u64(*d_a);
            }
            Payload::CscDeposit {
                pk,
                tv,
                csc_id,
                deposit,
            } => {
                w.u8(0x03).bytes(pk.as_bytes()).u32(tv.0).u64(csc_id.0).u64(*deposit);
            }
            Payload::SacDeposit {
                pk,
                tv,
                sac_id,
                deposit,
                bid_commit,
                value,
            } => {
                w.u8(0x04)
                    .bytes(pk.as_bytes())
                    .u32(tv.0)
                    .u64(sac_id.0)
                    .u64(*deposit)
                    .bytes(bid_commit.as_bytes())
                    .u64(*value);
            }
            Payload::BidCommit {
                sac_id,
                pk,
                digest,
                value,
            } => {
                w.u8(0x05)
                    .u64(sac_id.0)
                    .bytes(pk.as_bytes())
                    .bytes(digest.as_bytes())
                    .u64(*value);
            }
            Payload::SensingUpload { csc_id, packet } => {
                w.u8(0x06)
                    .u64(csc_id.0)
                    .bytes(packet.msg_id_hash.as_bytes())
                    .u64(packet.timestamp_ms)
                    .u8(u8::from(packet.sensing_result))
                    .i32(packet.location.lat_micro)
                    .i32(packet.location.lon_micro);
            }
            Payload::SensingCommit { csc_id, digest, pk } => {
                w.u8(0x07).u64(csc_id.0).bytes(digest.as_bytes()).bytes(pk.as_bytes());
            }
            Payload::SensingReveal {
                csc_id,
                pk,
                sr,
                rnd,
                msg_id,
            } => {
                w.u8(0x08)
                    .u64(csc_id.0)
                    .bytes(pk.as_bytes())
                    .u8(u8::from(*sr))
                    .bytes(rnd)
                    .u16(msg_id.len() as u16)
                    .bytes(msg_id);
            }
            Payload::BidReveal { sac_id, pk, openings } => {
                w.u8(0x09).u64(sac_id.0).bytes(pk.as_bytes()).u16(openings.len() as u16);
                for o in openings {
                    w.u64(o.amount).u8(u8::from(o.valid)).bytes(&o.rnd);
                }
            }
            Payload::Settlement {
                contract,
                pk,
                kind,
                credit,
                forfeited,
            } => {
                w.u8(0x0a)
                    .u64(contract.0)
                    .bytes(pk.as_bytes())
                    .u8(*kind as u8)
                    .u64(*credit)
                    .u64(*forfeited);
            }
            Payload::Reward { pk, amount, round } => {
                w.u8(0x0b).bytes(pk.as_bytes()).u64(*amount).u64(*round);
            }
        }
        w.0
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader { buf: bytes, at: 0 };
        let p = match r.u8()? {
            0x01 => Payload::CscDeploy {
                csc_id: r.id()?,
                t_ddl: r.u64()?,
                n1: r.u32()?,
                tv_thr: r.trust()?,
                fusion: r.u8()?,
                d_s: r.u64()?,
                reward_sensing: r.u64()?,
            },
            0x02 => Payload::SacDeploy {
                csc_id: r.id()?,
                sac_id: r.id()?,
                n2: r.u32()?,
                t_self_d: r.u64()?,
                win: r.u8()?,
                d_a: r.u64()?,
            },
            0x03 => Payload::CscDeposit {
                pk: r.account()?,
                tv: r.trust()?,
                csc_id: r.id()?,
                deposit: r.u64()?,
            },
            0x04 => Payload::SacDeposit {
                pk: r.account()?,
                tv: r.trust()?,
                sac_id: r.id()?,
                deposit: r.u64()?,
                bid_commit: r.digest()?,
                value: r.u64()?,
            },
            0x05 => Payload::BidCommit {
                sac_id: r.id()?,
                pk: r.account()?,
                digest: r.digest()?,
                value: r.u64()?,
            },
            0x06 => {
                let csc_id = r.id()?;
                let msg_id_hash = r.digest()?;
                let timestamp_ms = r.u64()?;
                let sensing_result = r.bool()?;
                let location = Location {
                    lat_micro: r.i32()?,
                    lon_micro: r.i32()?,
                };
                Payload::SensingUpload {
                    csc_id,
                    packet: SensingPacket {
                        msg_id_hash,
                        sensing_result,
                        timestamp_ms,
                        location,
                    },
                }
            }
            0x07 => Payload::SensingCommit {
                csc_id: r.id()?,
                digest: r.digest()?,
                pk: r.account()?,
            },
            0x08 => {
                let csc_id = r.id()?;
                let pk = r.account()?;
                let sr = r.bool()?;
                let rnd = r.b32()?;
                let len = r.u16()? as usize;
                Payload::SensingReveal {
                    csc_id,
                    pk,
                    sr,
                    rnd,
                    msg_id: r.take(len)?.to_vec(),
                }
            }
            0x09 => {
                let sac_id = r.id()?;
                let pk = r.account()?;
                let count = r.u16()?;
                let mut openings = Vec::with_capacity(count as usize);
                for _ in 0..count {
                    openings.push(BidOpening {
                        amount: r.u64()?,
                        valid: r.bool()?,
                        rnd: r.b32()?,
                    });
                }
                Payload::BidReveal { sac_id, pk, openings }
            }
            0x0a => Payload::Settlement {
                contract: r.id()?,
                pk: r.account()?,
                kind: SettlementKind::from_u8(r.u8()?)?,
                credit: r.u64()?,
                forfeited: r.u64()?,
            },
            0x0b => Payload::Reward {
                pk: r.account()?,
                amount: r.u64()?,
                round: r.u64()?,
            },
            t => return Err(PayloadError::UnknownTag(t)),
        };
        if r.at != bytes.len() {
            return Err(PayloadError::Trailing(bytes.len() - r.at));
        }
        Ok(p)
    }
}
