//! Cooperative sensing contract.
//!
//! Lifecycle: `Registering -> Sensing -> Revealing -> Settled`, or `Voided`
//! when no packet arrives before fusion. Packets are stored without any link
//! to an account until settlement opens the commitments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ContractError, Payout};
use crate::crypto::commit::{link_reveal, Commitment};
use crate::crypto::ring::{ring_verify, RingSignature};
use crate::crypto::rsa::PublicKey;
use crate::crypto::SensingPacket;
use crate::ids::{AccountId, ContractId};
use crate::payload::{Payload, SettlementKind};
use crate::trust::{Outcome, TrustFixed};

/// Wei per 0.0001 of trust (1000 wei per 0.01).
pub const WEI_PER_TRUST_UNIT: u64 = 10;
/// Largest boost a deposit can buy (0.10).
pub const BOOST_CAP: TrustFixed = TrustFixed(1000);

/// Trust boost bought by a deposit in excess of `d_s`.
pub fn convert(extra_wei: u64) -> TrustFixed {
    TrustFixed((extra_wei / WEI_PER_TRUST_UNIT).min(BOOST_CAP.0 as u64) as u32)
}

/// Extra deposit needed to lift `tv` strictly above `threshold`, if the cap
/// allows it.
pub fn boost_needed(tv: TrustFixed, threshold: TrustFixed) -> Option<u64> {
    let gap = (threshold.0 + 1).saturating_sub(tv.0);
    (gap <= BOOST_CAP.0).then_some(gap as u64 * WEI_PER_TRUST_UNIT)
}

/// Majority vote; an even split reports the channel busy. `None` when empty.
pub fn fuse_majority(bits: impl IntoIterator<Item = bool>) -> Option<bool> {
    let (mut ones, mut n) = (0usize, 0usize);
    for b in bits {
        n += 1;
        ones += usize::from(b);
    }
    (n > 0).then_some(2 * ones >= n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscConfig {
    pub csc_id: ContractId,
    pub t_ddl: u64,
    pub n1: u32,
    pub tv_thr: TrustFixed,
    pub d_s: u64,
    pub reward_sensing: u64,
}

impl CscConfig {
    pub fn deploy_payload(&self) -> Payload {
        Payload::CscDeploy {
            csc_id: self.csc_id,
            t_ddl: self.t_ddl,
            n1: self.n1,
            tv_thr: self.tv_thr,
            fusion: 0,
            d_s: self.d_s,
            reward_sensing: self.reward_sensing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CscPhase {
    Registering,
    Sensing,
    Revealing,
    Settled,
    Voided,
}

impl CscPhase {
    fn name(self) -> &'static str {
        match self {
            CscPhase::Registering => "Registering",
            CscPhase::Sensing => "Sensing",
            CscPhase::Revealing => "Revealing",
            CscPhase::Settled => "Settled",
            CscPhase::Voided => "Voided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub public_key: PublicKey,
    pub deposit: u64,
    pub tv_at_register: TrustFixed,
    pub effective_tv: TrustFixed,
    seq: u64,
}

/// Opening of a sensing commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingReveal {
    pub account: AccountId,
    pub sr: bool,
    pub rnd: [u8; 32],
    pub msg_id: Vec<u8>,
}

/// Settlement of one registered sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSettlement {
    pub payout: Payout,
    pub outcome: Outcome,
    /// Index of the packet this sensor was linked to.
    pub packet: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscState {
    pub config: CscConfig,
    pub phase: CscPhase,
    pub registered: BTreeMap<AccountId, Registration>,
    pub packets: Vec<(SensingPacket, RingSignature)>,
    pub commitments: Vec<Commitment>,
    pub fusion_result: Option<bool>,
    next_seq: u64,
}

impl CscState {
    pub fn new(config: CscConfig) -> Self {
        CscState {
            config,
            phase: CscPhase::Registering,
            registered: BTreeMap::new(),
            packets: Vec::new(),
            commitments: Vec::new(),
            fusion_result: None,
            next_seq: 0,
        }
    }

    fn expect(&self, phase: CscPhase) -> Result<(), ContractError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(ContractError::WrongPhase(self.phase.name()))
        }
    }

    /// Tokens currently held by the contract.
    pub fn escrow(&self) -> u64 {
        match self.phase {
            CscPhase::Settled | CscPhase::Voided => 0,
            _ => self.registered.values().map(|r| r.deposit).sum(),
        }
    }

    /// Register a sensor. On success the deposit is escrowed; if a weaker
    /// sensor was displaced, its refund is returned.
    pub fn register(
        &mut self,
        public_key: PublicKey,
        deposit: u64,
        tv: TrustFixed,
    ) -> Result<Option<Payout>, ContractError> {
        self.expect(CscPhase::Registering)?;
        let account = public_key.account_id();
        if self.registered.contains_key(&account) {
            return Err(ContractError::AlreadyRegistered);
        }
        if deposit < self.config.d_s {
            return Err(ContractError::InsufficientDeposit {
                required: self.config.d_s,
                offered: deposit,
            });
        }
        let effective = TrustFixed(tv.0.saturating_add(convert(deposit - self.config.d_s).0));
        if effective <= self.config.tv_thr {
            return Err(ContractError::BelowThreshold {
                effective,
                threshold: self.config.tv_thr,
            });
        }
        let mut evicted = None;
        if self.registered.len() >= self.config.n1 as usize {
            // weakest entry; among equals the latest registrant goes first
            let (&weakest, reg) = self
                .registered
                .iter()
                .min_by(|a, b| a.1.effective_tv.cmp(&b.1.effective_tv).then(b.1.seq.cmp(&a.1.seq)))
                .expect("n1 >= 1");
            if effective <= reg.effective_tv {
                return Err(ContractError::NotCompetitive {
                    effective,
                    lowest: reg.effective_tv,
                });
            }
            let reg = self.registered.remove(&weakest).expect("present");
            evicted = Some(Payout {
                account: weakest,
                kind: SettlementKind::TaskVoided,
                credit: reg.deposit,
                forfeited: 0,
                minted: 0,
            });
        }
        self.registered.insert(
            account,
            Registration {
                public_key,
                deposit,
                tv_at_register: tv,
                effective_tv: effective,
                seq: self.next_seq,
            },
        );
        self.next_seq += 1;
        Ok(evicted)
    }

    pub fn close_registration(&mut self) -> Result<(), ContractError> {
        self.expect(CscPhase::Registering)?;
        self.phase = CscPhase::Sensing;
        Ok(())
    }

    pub fn is_registered(&self, account: &AccountId) -> bool {
        self.registered.contains_key(account)
    }

    /// Accept an anonymous packet whose ring consists only of registered
    /// sensors.
    pub fn upload(&mut self, packet: SensingPacket, sig: RingSignature, now: u64) -> Result<(), ContractError> {
        self.expect(CscPhase::Sensing)?;
        if now > self.config.t_ddl {
            return Err(ContractError::PastDeadline {
                now,
                deadline: self.config.t_ddl,
            });
        }
        let members_ok = !sig.ring.is_empty()
            && sig.ring.iter().all(|pk| {
                self.registered
                    .get(&pk.account_id())
                    .is_some_and(|r| r.public_key == *pk)
            });
        if !members_ok || !ring_verify(&packet, &sig) {
            return Err(ContractError::IllegalRing);
        }
        if self.packets.iter().any(|(p, _)| p.msg_id_hash == packet.msg_id_hash) {
            return Err(ContractError::DuplicateTag);
        }
        self.packets.push((packet, sig));
        Ok(())
    }

    pub fn commit(&mut self, c: Commitment) -> Result<(), ContractError> {
        self.expect(CscPhase::Sensing)?;
        if c.csc_id != self.config.csc_id || !self.registered.contains_key(&c.committer) {
            return Err(ContractError::NotRegistered);
        }
        if self.commitments.iter().any(|x| x.committer == c.committer) {
            return Err(ContractError::DuplicateCommitment);
        }
        self.commitments.push(c);
        Ok(())
    }

    /// Fuse the uploaded results. With no packets the task is voided and
    /// [`Self::void_refunds`] returns every deposit.
    pub fn fuse(&mut self) -> Result<bool, ContractError> {
        self.expect(CscPhase::Sensing)?;
        match fuse_majority(self.packets.iter().map(|(p, _)| p.sensing_result)) {
            Some(bit) => {
                self.fusion_result = Some(bit);
                self.phase = CscPhase::Revealing;
                Ok(bit)
            }
            None => {
                self.phase = CscPhase::Voided;
                Err(ContractError::NoPackets)
            }
        }
    }

    /// Refunds owed after the task was voided.
    pub fn void_refunds(&self) -> Vec<Payout> {
        if self.phase != CscPhase::Voided {
            return Vec::new();
        }
        self.registered
            .iter()
            .map(|(id, r)| Payout {
                account: *id,
                kind: SettlementKind::TaskVoided,
                credit: r.deposit,
                forfeited: 0,
                minted: 0,
            })
            .collect()
    }

    /// Open commitments, link sensors to packets and pay out. Every
    /// registered sensor gets exactly one settlement.
    pub fn settle(&mut self, reveals: &[SensingReveal]) -> Result<Vec<SensorSettlement>, ContractError> {
        self.expect(CscPhase::Revealing)?;
        let fusion = self.fusion_result.expect("set by fuse");
        let packets: Vec<SensingPacket> = self.packets.iter().map(|(p, _)| p.clone()).collect();

        let mut links: BTreeMap<AccountId, usize> = BTreeMap::new();
        for r in reveals {
            if links.contains_key(&r.account) {
                continue;
            }
            let Some(c) = self.commitments.iter().find(|c| c.committer == r.account) else {
                continue;
            };
            if let Some(idx) = link_reveal(c, r.sr, &r.rnd, &r.msg_id, &packets) {
                links.insert(r.account, idx);
            }
        }
        let mut claims = vec![0usize; packets.len()];
        for &idx in links.values() {
            claims[idx] += 1;
        }

        let mut out = Vec::with_capacity(self.registered.len());
        for (id, reg) in &self.registered {
            let link = links.get(id).copied();
            let (kind, outcome) = match link {
                Some(idx) if claims[idx] > 1 => (SettlementKind::AmbiguousLink, Outcome::Inconsistent),
                Some(idx) if packets[idx].sensing_result == fusion => {
                    (SettlementKind::SensingReward, Outcome::Consistent)
                }
                _ => (SettlementKind::SensingForfeit, Outcome::Inconsistent),
            };
            let payout = if kind == SettlementKind::SensingReward {
                Payout {
                    account: *id,
                    kind,
                    credit: reg.deposit + self.config.reward_sensing,
                    forfeited: 0,
                    minted: self.config.reward_sensing,
                }
            } else {
                Payout {
                    account: *id,
                    kind,
                    credit: 0,
                    forfeited: reg.deposit,
                    minted: 0,
                }
            };
            out.push(SensorSettlement {
                payout,
                outcome,
                packet: link,
            });
        }
        self.phase = CscPhase::Settled;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::commit::commit;
    use crate::crypto::ring::ring_sign;
    use crate::crypto::rsa::KeyPair;
    use crate::crypto::Location;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn keys(n: usize) -> Vec<KeyPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        (0..n).map(|_| KeyPair::generate(128, &mut rng).unwrap()).collect()
    }

    fn config() -> CscConfig {
        CscConfig {
            csc_id: ContractId(1),
            t_ddl: 100,
            n1: 3,
            tv_thr: TrustFixed::from_f64(0.90),
            d_s: 100,
            reward_sensing: 50,
        }
    }

    #[test]
    fn conversion_rate_and_cap() {
        assert_eq!(convert(0), TrustFixed(0));
        assert_eq!(convert(6000), TrustFixed::from_f64(0.06));
        assert_eq!(convert(1_000_000_000), TrustFixed::from_f64(0.10));
        assert_eq!(boost_needed(TrustFixed(0), TrustFixed(0)), Some(10));
        assert_eq!(boost_needed(TrustFixed(9500), TrustFixed(9000)), Some(0));
        assert_eq!(boost_needed(TrustFixed(0), TrustFixed(9000)), None);
    }

    #[test]
    fn table_accounts_select_top_three() {
        let k = keys(5);
        let tvs = [0.91, 0.92, 0.87, 0.93, 0.94];
        let mut csc = CscState::new(config());
        let mut results = Vec::new();
        for (key, tv) in k.iter().zip(tvs) {
            results.push(csc.register(key.public.clone(), 100, TrustFixed::from_f64(tv)));
        }
        assert!(matches!(results[2], Err(ContractError::BelowThreshold { .. })));
        // 0.94 arrives with the contract full and displaces 0.91
        assert_eq!(results[3], Ok(None));
        assert_eq!(results[4].as_ref().unwrap().unwrap().account, k[0].public.account_id());
        let mut selected: Vec<f64> = csc.registered.values().map(|r| r.tv_at_register.to_f64()).collect();
        selected.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(selected, vec![0.94, 0.93, 0.92]);
        let late = keys(6).pop().unwrap();
        assert!(matches!(
            csc.register(late.public, 100, TrustFixed::from_f64(0.915)),
            Err(ContractError::NotCompetitive { .. })
        ));
    }

    #[test]
    fn deposit_boost_clears_threshold() {
        let k = keys(2);
        let mut csc = CscState::new(config());
        let low = TrustFixed::from_f64(0.85);
        assert!(matches!(
            csc.register(k[0].public.clone(), 100, low),
            Err(ContractError::BelowThreshold { .. })
        ));
        assert_eq!(
            csc.register(k[0].public.clone(), 99, low),
            Err(ContractError::InsufficientDeposit {
                required: 100,
                offered: 99
            })
        );
        csc.register(k[0].public.clone(), 100 + 6000, low).unwrap();
        assert_eq!(
            csc.registered[&k[0].public.account_id()].effective_tv,
            TrustFixed::from_f64(0.91)
        );
        assert_eq!(csc.escrow(), 6100);
        csc.close_registration().unwrap();
        assert_eq!(
            csc.register(k[1].public.clone(), 100, TrustFixed(9900)),
            Err(ContractError::WrongPhase("Sensing"))
        );
    }

    struct Round {
        keys: Vec<KeyPair>,
        csc: CscState,
        reveals: Vec<SensingReveal>,
    }

    /// Registered sensors upload `bits` under a ring of all registrants.
    fn round(bits: &[bool]) -> Round {
        let keys = keys(bits.len());
        let mut cfg = config();
        cfg.n1 = bits.len() as u32;
        let mut csc = CscState::new(cfg);
        for k in &keys {
            csc.register(k.public.clone(), 100, TrustFixed(9500)).unwrap();
        }
        csc.close_registration().unwrap();
        let ring: Vec<PublicKey> = keys.iter().map(|k| k.public.clone()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut reveals = Vec::new();
        for (i, (k, &sr)) in keys.iter().zip(bits).enumerate() {
            let msg_id = format!("I am User {i}").into_bytes();
            let packet = SensingPacket::new(&msg_id, sr, 10, Location::default());
            let sig = ring_sign(&packet, i, k, &ring, &mut rng).unwrap();
            csc.upload(packet, sig, 10).unwrap();
            let rnd = [i as u8; 32];
            csc.commit(commit(sr, &rnd, &msg_id, ContractId(1), k.public.account_id()))
                .unwrap();
            reveals.push(SensingReveal {
                account: k.public.account_id(),
                sr,
                rnd,
                msg_id,
            });
        }
        Round { keys, csc, reveals }
    }

    #[test]
    fn table_results_fuse_busy_and_settle() {
        let mut r = round(&[true, false, true]);
        assert_eq!(r.csc.fuse(), Ok(true));
        let s = r.csc.settle(&r.reveals).unwrap();
        for (k, want) in r.keys.iter().zip([true, false, true]) {
            let entry = s.iter().find(|e| e.payout.account == k.public.account_id()).unwrap();
            if want {
                assert_eq!(entry.outcome, Outcome::Consistent);
                assert_eq!(entry.payout.credit, 150);
                assert_eq!(entry.payout.minted, 50);
            } else {
                assert_eq!(entry.outcome, Outcome::Inconsistent);
                assert_eq!(entry.payout.forfeited, 100);
            }
        }
        assert_eq!(r.csc.escrow(), 0);
    }

    #[test]
    fn tie_declares_busy() {
        assert_eq!(fuse_majority([false, true]), Some(true));
        assert_eq!(fuse_majority([false, false]), Some(false));
        assert_eq!(fuse_majority([]), None);
    }

    #[test]
    fn wrong_nonce_forfeits_and_silence_is_inconsistent() {
        let mut r = round(&[false, false, false]);
        r.csc.fuse().unwrap();
        r.reveals[0].rnd[0] ^= 1;
        r.reveals.remove(2);
        let s = r.csc.settle(&r.reveals).unwrap();
        let by_id = |k: &KeyPair| {
            s.iter()
                .find(|e| e.payout.account == k.public.account_id())
                .unwrap()
                .clone()
        };
        assert_eq!(by_id(&r.keys[0]).payout.kind, SettlementKind::SensingForfeit);
        assert_eq!(by_id(&r.keys[1]).payout.kind, SettlementKind::SensingReward);
        assert_eq!(by_id(&r.keys[2]).outcome, Outcome::Inconsistent);
    }

    #[test]
    fn upload_gates() {
        let mut r = round(&[true, true]);
        let (p, sig) = r.csc.packets[0].clone();
        assert_eq!(
            r.csc.upload(p.clone(), sig.clone(), 10),
            Err(ContractError::DuplicateTag)
        );
        assert!(matches!(
            r.csc.upload(p.clone(), sig.clone(), 101),
            Err(ContractError::PastDeadline { .. })
        ));

        let outsider = keys(3).pop().unwrap();
        let packet = SensingPacket::new(b"x", true, 10, Location::default());
        let ring = vec![r.keys[0].public.clone(), outsider.public.clone()];
        let sig = ring_sign(&packet, 1, &outsider, &ring, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(
            r.csc.upload(packet.clone(), sig.clone(), 10),
            Err(ContractError::IllegalRing)
        );
        let mut other = packet;
        other.sensing_result = false;
        let ring = vec![r.keys[0].public.clone()];
        let sig = ring_sign(&other, 0, &r.keys[0], &ring, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        other.timestamp_ms += 1;
        assert_eq!(r.csc.upload(other, sig, 10), Err(ContractError::IllegalRing));
    }

    #[test]
    fn copied_commitment_makes_link_ambiguous() {
        let mut r = round(&[true, true, false]);
        // sensor 1 commits nothing of its own; replace its commitment with a
        // copy of sensor 0's digest and replay sensor 0's opening
        let copied = r.csc.commitments[0].digest;
        r.csc.commitments[1].digest = copied;
        r.reveals[1] = SensingReveal {
            account: r.keys[1].public.account_id(),
            ..r.reveals[0].clone()
        };
        r.csc.fuse().unwrap();
        let s = r.csc.settle(&r.reveals).unwrap();
        for k in &r.keys[..2] {
            let e = s.iter().find(|e| e.payout.account == k.public.account_id()).unwrap();
            assert_eq!(e.payout.kind, SettlementKind::AmbiguousLink);
            assert_eq!(e.payout.forfeited, 100);
        }
    }

    #[test]
    fn no_packets_voids_task() {
        let k = keys(2);
        let mut csc = CscState::new(config());
        csc.register(k[0].public.clone(), 300, TrustFixed(9500)).unwrap();
        csc.close_registration().unwrap();
        assert_eq!(csc.fuse(), Err(ContractError::NoPackets));
        let refunds = csc.void_refunds();
        assert_eq!(refunds.len(), 1);
        assert_eq!(refunds[0].credit, 300);
        assert_eq!(csc.escrow(), 0);
    }

    #[test]
    fn packets_carry_no_account_before_settlement() {
        let r = round(&[true, false, true]);
        let stored = serde_json::to_string(&r.csc.packets).unwrap();
        for k in &r.keys {
            let id = k.public.account_id().0.to_hex();
            assert!(!stored.contains(&id));
        }
        // a packet's only account-derived data is the ring, which lists every
        // registrant: each stored ring is the same registered set
        for (_, sig) in &r.csc.packets {
            let ids: Vec<AccountId> = sig.ring.iter().map(|pk| pk.account_id()).collect();
            assert_eq!(ids.len(), r.csc.registered.len());
            assert!(ids.iter().all(|id| r.csc.registered.contains_key(id)));
        }
    }

    #[test]
    fn fusion_matches_brute_force_count() {
        for n in 1..=9u32 {
            for mask in 0..(1u32 << n) {
                let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let ones = mask.count_ones();
                assert_eq!(fuse_majority(bits), Some(ones >= n - ones), "n={n} mask={mask:b}");
            }
        }
    }
}
