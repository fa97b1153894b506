//! Sealed-bid second-price spectrum auction.
//!
//! Lifecycle: `Registering -> Committing -> Revealing -> Closed -> Destroyed`.
//! When the paired sensing task reports the channel busy the auction closes
//! without reveals and every bidder is refunded at self-destruct.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ContractError, Payout};
use crate::hash::{sha256_concat, Digest};
use crate::ids::{AccountId, ContractId};
use crate::payload::{BidOpening, Payload, SettlementKind};

/// Blinded bid `H(amount u64 | valid u8 | RND [32])`.
pub fn bid_commitment(amount: u64, valid: bool, rnd: &[u8; 32]) -> Digest {
    sha256_concat(&[&amount.to_be_bytes(), &[u8::from(valid)], rnd])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub sac_id: ContractId,
    pub csc_id: ContractId,
    pub n2: u32,
    pub t_self_d: u64,
    pub d_a: u64,
    pub commit_cap: usize,
    /// Receives the clearing price.
    pub owner: AccountId,
}

impl SacConfig {
    pub fn deploy_payload(&self) -> Payload {
        Payload::SacDeploy {
            csc_id: self.csc_id,
            sac_id: self.sac_id,
            n2: self.n2,
            t_self_d: self.t_self_d,
            win: 0,
            d_a: self.d_a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SacPhase {
    Registering,
    Committing,
    Revealing,
    Closed,
    Destroyed,
}

impl SacPhase {
    fn name(self) -> &'static str {
        match self {
            SacPhase::Registering => "Registering",
            SacPhase::Committing => "Committing",
            SacPhase::Revealing => "Revealing",
            SacPhase::Closed => "Closed",
            SacPhase::Destroyed => "Destroyed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindedBid {
    pub digest: Digest,
    /// Tokens escrowed with this commitment.
    pub value: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealRecord {
    /// Sum of correctly revealed valid bids.
    pub total: u64,
    /// Escrow of correctly revealed decoys, returned in full.
    pub refund: u64,
    /// Escrow of commitments that failed to open.
    pub burned: u64,
    pub order: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bidder {
    pub deposit: u64,
    pub bids: Vec<BlindedBid>,
    pub reveal: Option<RevealRecord>,
}

impl Bidder {
    fn escrow(&self) -> u64 {
        self.deposit + self.bids.iter().map(|b| b.value).sum::<u64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Winner {
    pub account: AccountId,
    pub total: u64,
    pub price: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacState {
    pub config: SacConfig,
    pub phase: SacPhase,
    pub bidders: BTreeMap<AccountId, Bidder>,
    pub winner: Option<Winner>,
    /// Set when the channel was reported busy.
    pub cancelled: bool,
    reveal_seq: u64,
}

impl SacState {
    pub fn new(config: SacConfig) -> Self {
        SacState {
            config,
            phase: SacPhase::Registering,
            bidders: BTreeMap::new(),
            winner: None,
            cancelled: false,
            reveal_seq: 0,
        }
    }

    fn expect(&self, phase: SacPhase) -> Result<(), ContractError> {
        if self.phase == SacPhase::Destroyed {
            return Err(ContractError::ContractDestroyed);
        }
        if self.phase == phase {
            Ok(())
        } else {
            Err(ContractError::WrongPhase(self.phase.name()))
        }
    }

    pub fn escrow(&self) -> u64 {
        if self.phase == SacPhase::Destroyed {
            return 0;
        }
        self.bidders.values().map(Bidder::escrow).sum()
    }

    /// Register with the auction deposit and the first blinded bid carried by
    /// the deposit transaction.
    pub fn register(&mut self, account: AccountId, deposit: u64, first: BlindedBid) -> Result<(), ContractError> {
        self.expect(SacPhase::Registering)?;
        if self.bidders.contains_key(&account) {
            return Err(ContractError::AlreadyRegistered);
        }
        if deposit < self.config.d_a {
            return Err(ContractError::InsufficientDeposit {
                required: self.config.d_a,
                offered: deposit,
            });
        }
        if self.bidders.len() >= self.config.n2 as usize {
            return Err(ContractError::TooManyBidders);
        }
        self.bidders.insert(
            account,
            Bidder {
                deposit,
                bids: vec![first],
                reveal: None,
            },
        );
        Ok(())
    }

    pub fn open_commits(&mut self) -> Result<(), ContractError> {
        self.expect(SacPhase::Registering)?;
        self.phase = SacPhase::Committing;
        Ok(())
    }

    pub fn commit(&mut self, account: AccountId, bid: BlindedBid) -> Result<(), ContractError> {
        self.expect(SacPhase::Committing)?;
        let cap = self.config.commit_cap;
        let b = self.bidders.get_mut(&account).ok_or(ContractError::NotRegistered)?;
        if b.bids.len() >= cap {
            return Err(ContractError::TooManyCommits);
        }
        b.bids.push(bid);
        Ok(())
    }

    /// Open reveals if the sensing result says idle; otherwise close the
    /// auction for refund.
    pub fn open_reveals(&mut self, channel_busy: bool) -> Result<(), ContractError> {
        self.expect(SacPhase::Committing)?;
        if channel_busy {
            self.cancelled = true;
            self.phase = SacPhase::Closed;
            return Err(ContractError::ChannelBusy);
        }
        self.phase = SacPhase::Revealing;
        Ok(())
    }

    /// Open every commitment of `account`, in commit order. An opening counts
    /// only if it hashes to the commitment and its amount equals the escrowed
    /// value; anything else burns that commitment's escrow.
    pub fn reveal(&mut self, account: AccountId, openings: &[BidOpening]) -> Result<RevealRecord, ContractError> {
        self.expect(SacPhase::Revealing)?;
        let order = self.reveal_seq;
        let b = self.bidders.get_mut(&account).ok_or(ContractError::NotRegistered)?;
        if b.reveal.is_some() {
            return Err(ContractError::AlreadyRevealed);
        }
        if openings.len() != b.bids.len() {
            return Err(ContractError::LengthMismatch {
                expected: b.bids.len(),
                found: openings.len(),
            });
        }
        let mut rec = RevealRecord {
            total: 0,
            refund: 0,
            burned: 0,
            order,
        };
        for (bid, o) in b.bids.iter().zip(openings) {
            let opens = bid_commitment(o.amount, o.valid, &o.rnd) == bid.digest && o.amount == bid.value;
            match (opens, o.valid) {
                (false, _) => rec.burned += bid.value,
                (true, true) => rec.total += bid.value,
                (true, false) => rec.refund += bid.value,
            }
        }
        b.reveal = Some(rec);
        self.reveal_seq += 1;
        Ok(rec)
    }

    /// Close the auction. The highest total wins (ties: earliest reveal,
    /// then smallest account) and pays the runner-up's total, or its own
    /// total when unopposed.
    pub fn win(&mut self) -> Result<Winner, ContractError> {
        self.expect(SacPhase::Revealing)?;
        self.phase = SacPhase::Closed;
        let mut ranked: Vec<(AccountId, RevealRecord)> = self
            .bidders
            .iter()
            .filter_map(|(id, b)| b.reveal.filter(|r| r.total > 0).map(|r| (*id, r)))
            .collect();
        ranked.sort_by(|a, b| {
            b.1.total
                .cmp(&a.1.total)
                .then(a.1.order.cmp(&b.1.order))
                .then(a.0.cmp(&b.0))
        });
        let (account, top) = *ranked.first().ok_or(ContractError::NoBidders)?;
        let price = ranked.get(1).map_or(top.total, |r| r.1.total);
        let w = Winner {
            account,
            total: top.total,
            price,
        };
        self.winner = Some(w);
        Ok(w)
    }

    /// Self-destruct: pay refunds and the clearing price, burn what was not
    /// correctly revealed.
    pub fn destroy(&mut self, now: u64) -> Result<Vec<Payout>, ContractError> {
        if self.phase == SacPhase::Destroyed {
            return Err(ContractError::ContractDestroyed);
        }
        if now < self.config.t_self_d {
            return Err(ContractError::TooEarly {
                now,
                at: self.config.t_self_d,
            });
        }
        let reveals_opened = !self.cancelled && matches!(self.phase, SacPhase::Revealing | SacPhase::Closed);
        let mut out = Vec::new();
        for (id, b) in &self.bidders {
            let escrow = b.escrow();
            let payout = if !reveals_opened {
                Payout {
                    account: *id,
                    kind: SettlementKind::AuctionRefund,
                    credit: escrow,
                    forfeited: 0,
                    minted: 0,
                }
            } else if let Some(r) = b.reveal {
                let price = self.winner.filter(|w| w.account == *id).map(|w| w.price);
                Payout {
                    account: *id,
                    kind: if price.is_some() {
                        SettlementKind::AuctionWin
                    } else {
                        SettlementKind::AuctionRefund
                    },
                    credit: escrow - r.burned - price.unwrap_or(0),
                    forfeited: r.burned,
                    minted: 0,
                }
            } else {
                Payout {
                    account: *id,
                    kind: SettlementKind::AuctionRefund,
                    credit: 0,
                    forfeited: escrow,
                    minted: 0,
                }
            };
            out.push(payout);
        }
        if let Some(w) = self.winner.filter(|_| reveals_opened) {
            out.push(Payout {
                account: self.config.owner,
                kind: SettlementKind::AuctionProceeds,
                credit: w.price,
                forfeited: 0,
                minted: 0,
            });
        }
        self.phase = SacPhase::Destroyed;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::sha256;

    fn acct(n: u8) -> AccountId {
        AccountId(sha256(&[n]))
    }

    fn config() -> SacConfig {
        SacConfig {
            sac_id: ContractId(2),
            csc_id: ContractId(1),
            n2: 4,
            t_self_d: 500,
            d_a: 10,
            commit_cap: 8,
            owner: acct(0),
        }
    }

    fn opening(amount: u64, valid: bool, tag: u8) -> (BlindedBid, BidOpening) {
        let rnd = [tag; 32];
        (
            BlindedBid {
                digest: bid_commitment(amount, valid, &rnd),
                value: amount,
            },
            BidOpening { amount, valid, rnd },
        )
    }

    /// Register each bidder with its bids and reveal them in order.
    fn run(profile: &[&[(u64, bool)]]) -> SacState {
        let mut sac = SacState::new(config());
        let mut opens = Vec::new();
        for (i, bids) in profile.iter().enumerate() {
            let id = acct(i as u8 + 1);
            let pairs: Vec<_> = bids
                .iter()
                .enumerate()
                .map(|(j, &(a, v))| opening(a, v, (i * 16 + j) as u8))
                .collect();
            sac.register(id, 10, pairs[0].0).unwrap();
            opens.push((id, pairs));
        }
        sac.open_commits().unwrap();
        for (id, pairs) in &opens {
            for (bid, _) in &pairs[1..] {
                sac.commit(*id, *bid).unwrap();
            }
        }
        sac.open_reveals(false).unwrap();
        for (id, pairs) in &opens {
            let o: Vec<BidOpening> = pairs.iter().map(|p| p.1).collect();
            sac.reveal(*id, &o).unwrap();
        }
        sac
    }

    #[test]
    fn table_bids_second_bidder_pays_first_total() {
        let mut sac = run(&[&[(100, true), (200, false)], &[(150, true), (300, false)]]);
        let r1 = sac.bidders[&acct(1)].reveal.unwrap();
        let r2 = sac.bidders[&acct(2)].reveal.unwrap();
        assert_eq!((r1.total, r1.refund), (100, 200));
        assert_eq!((r2.total, r2.refund), (150, 300));
        let w = sac.win().unwrap();
        assert_eq!(w.account, acct(2));
        assert_eq!(w.price, 100);

        let before = sac.escrow();
        let payouts = sac.destroy(500).unwrap();
        let paid: u64 = payouts.iter().map(|p| p.credit + p.forfeited).sum();
        assert_eq!(paid, before);
        let owner = payouts
            .iter()
            .find(|p| p.kind == SettlementKind::AuctionProceeds)
            .unwrap();
        assert_eq!(owner.credit, 100);
        let winner = payouts.iter().find(|p| p.account == acct(2)).unwrap();
        assert_eq!(winner.credit, 10 + 150 + 300 - 100);
        assert_eq!(sac.destroy(600), Err(ContractError::ContractDestroyed));
    }

    #[test]
    fn degenerate_and_tied_auctions() {
        let mut single = run(&[&[(100, true)]]);
        assert_eq!(single.win().unwrap().price, 100);

        let mut tie = run(&[&[(150, true)], &[(150, true)]]);
        let w = tie.win().unwrap();
        assert_eq!((w.account, w.price), (acct(1), 150));

        let mut none = run(&[&[(150, false)]]);
        assert_eq!(none.win(), Err(ContractError::NoBidders));
    }

    #[test]
    fn bad_opening_burns_only_that_escrow() {
        let mut sac = SacState::new(config());
        let (a, oa) = opening(100, true, 1);
        let (b, mut ob) = opening(200, false, 2);
        sac.register(acct(1), 10, a).unwrap();
        sac.open_commits().unwrap();
        sac.commit(acct(1), b).unwrap();
        sac.open_reveals(false).unwrap();
        ob.rnd[0] ^= 1;
        let r = sac.reveal(acct(1), &[oa, ob]).unwrap();
        assert_eq!((r.total, r.refund, r.burned), (100, 0, 200));
        assert_eq!(sac.reveal(acct(1), &[oa, ob]), Err(ContractError::AlreadyRevealed));
    }

    #[test]
    fn phase_and_membership_gates() {
        let mut sac = SacState::new(config());
        let (a, oa) = opening(5, true, 1);
        assert_eq!(
            sac.register(acct(1), 9, a),
            Err(ContractError::InsufficientDeposit {
                required: 10,
                offered: 9
            })
        );
        for i in 1..=4 {
            sac.register(acct(i), 10, a).unwrap();
        }
        assert_eq!(sac.register(acct(9), 10, a), Err(ContractError::TooManyBidders));
        assert_eq!(sac.commit(acct(1), a), Err(ContractError::WrongPhase("Registering")));
        sac.open_commits().unwrap();
        assert_eq!(sac.commit(acct(7), a), Err(ContractError::NotRegistered));
        for _ in 0..7 {
            sac.commit(acct(1), a).unwrap();
        }
        assert_eq!(sac.commit(acct(1), a), Err(ContractError::TooManyCommits));
        assert_eq!(sac.reveal(acct(1), &[oa]), Err(ContractError::WrongPhase("Committing")));
        sac.open_reveals(false).unwrap();
        assert_eq!(
            sac.reveal(acct(1), &[oa]),
            Err(ContractError::LengthMismatch { expected: 8, found: 1 })
        );
        assert_eq!(sac.destroy(499), Err(ContractError::TooEarly { now: 499, at: 500 }));
    }

    #[test]
    fn busy_channel_refunds_everyone() {
        let mut sac = SacState::new(config());
        let (a, _) = opening(100, true, 1);
        sac.register(acct(1), 10, a).unwrap();
        sac.open_commits().unwrap();
        assert_eq!(sac.open_reveals(true), Err(ContractError::ChannelBusy));
        let p = sac.destroy(500).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].credit, p[0].forfeited), (110, 0));
    }

    #[test]
    fn unrevealed_escrow_is_burned() {
        let mut sac = SacState::new(config());
        let (a, oa) = opening(100, true, 1);
        let (b, _) = opening(70, true, 2);
        sac.register(acct(1), 10, a).unwrap();
        sac.register(acct(2), 10, b).unwrap();
        sac.open_commits().unwrap();
        sac.open_reveals(false).unwrap();
        sac.reveal(acct(1), &[oa]).unwrap();
        sac.win().unwrap();
        let p = sac.destroy(900).unwrap();
        let silent = p.iter().find(|x| x.account == acct(2)).unwrap();
        assert_eq!((silent.credit, silent.forfeited), (0, 80));
    }

    proptest::proptest! {
        #[test]
        fn destroy_pays_out_exactly_the_escrow(
            bidders in proptest::collection::vec(
                (proptest::collection::vec((1u64..50, proptest::bool::ANY, proptest::bool::ANY), 1..4), proptest::bool::ANY),
                1..5,
            ),
            busy in proptest::bool::ANY,
        ) {
            let mut sac = SacState::new(config());
            let mut opens = Vec::new();
            for (i, (bids, _)) in bidders.iter().enumerate() {
                let id = acct(i as u8 + 1);
                let pairs: Vec<_> = bids
                    .iter()
                    .enumerate()
                    .map(|(j, &(a, v, _))| opening(a, v, (i * 16 + j) as u8))
                    .collect();
                sac.register(id, 10, pairs[0].0).unwrap();
                opens.push((id, pairs));
            }
            sac.open_commits().unwrap();
            for (id, pairs) in &opens {
                for (bid, _) in &pairs[1..] {
                    sac.commit(*id, *bid).unwrap();
                }
            }
            if !busy && sac.open_reveals(false).is_ok() {
                for ((id, pairs), (bids, reveals)) in opens.iter().zip(&bidders) {
                    if !reveals {
                        continue;
                    }
                    let o: Vec<BidOpening> = pairs
                        .iter()
                        .zip(bids)
                        .map(|(p, &(_, _, corrupt))| BidOpening { amount: p.1.amount + u64::from(corrupt), ..p.1 })
                        .collect();
                    sac.reveal(*id, &o).unwrap();
                }
                let _ = sac.win();
            } else {
                let _ = sac.open_reveals(true);
            }
            let escrow = sac.escrow();
            let out = sac.destroy(1_000).unwrap();
            let paid: u64 = out.iter().map(|p| p.credit + p.forfeited).sum();
            proptest::prop_assert_eq!(paid, escrow);
            proptest::prop_assert!(out.iter().all(|p| p.minted == 0));
            proptest::prop_assert_eq!(sac.escrow(), 0);
        }
    }
}
