use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::node::{sense_with_draw, NodeKind, NodeProfile, SensorMemory};
use super::select::{select_sensors, Candidate, SelectionScheme};
use super::SimError;
use crate::consensus::{expected_cost, fork_order, target_for, DifficultyParams, ForkCandidate};
use crate::contracts::csc::boost_needed;
use crate::contracts::sac::BlindedBid;
use crate::contracts::{
    bid_commitment, ContractError, CscConfig, CscState, Payout, SacConfig, SacState, SensingReveal, Winner,
};
use crate::crypto::{commit, ring_sign, KeyPair, Location, SensingPacket};
use crate::ids::{AccountId, ContractId};
use crate::ledger::{
    compression_authority, seal_block, AccountState, Block, Chain, ChainConfig, SealRequest, Transaction,
    PROTOCOL_CONTRACT,
};
use crate::par::Execution;
use crate::payload::{BidOpening, Payload};
use crate::trust::{update_trust, Outcome, TrustFixed, TrustParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntry {
    pub profile: NodeProfile,
    pub count: usize,
}

/// The 20-node mix: 12 reliable, 3 on-off, 3 lazy, 2 intermittent.
pub fn standard_population() -> Vec<PopulationEntry> {
    [
        (NodeKind::Rnode, 12),
        (NodeKind::OOnode, 3),
        (NodeKind::Lnode, 3),
        (NodeKind::UAnode, 2),
    ]
    .into_iter()
    .map(|(kind, count)| PopulationEntry {
        profile: NodeProfile::standard(kind),
        count,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CscDefaults {
    pub n1: u32,
    pub tv_thr: f64,
    pub d_s: u64,
    pub reward_sensing: u64,
    /// Upload window after the round opens.
    pub t_ddl_ms: u64,
}

impl Default for CscDefaults {
    fn default() -> Self {
        CscDefaults {
            n1: 3,
            tv_thr: 0.0,
            d_s: 100,
            reward_sensing: 10,
            t_ddl_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacDefaults {
    pub n2: u32,
    pub d_a: u64,
    pub commit_cap: usize,
    /// Chance that a node enters a given auction.
    pub bid_participation: f64,
    /// Valuations and decoy amounts are uniform in `1..=max_valuation`.
    pub max_valuation: u64,
}

impl Default for SacDefaults {
    fn default() -> Self {
        SacDefaults {
            n2: 5,
            d_a: 100,
            commit_cap: 8,
            bid_participation: 0.25,
            max_valuation: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiningMode {
    /// Winner drawn with probability proportional to `2^-z`; the block
    /// interval is the expected time to the first solution.
    ExpectedCost,
    /// Every node draws a geometric trial count; the fewest trials wins.
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub seed: u64,
    pub trust: TrustParams,
    /// Difficulty used to price mining (`beta0` also fixes the hash rate).
    pub difficulty: DifficultyParams,
    /// Difficulty at which simulated blocks are actually sealed.
    pub seal_difficulty: DifficultyParams,
    pub csc: CscDefaults,
    pub sac: SacDefaults,
    pub population: Vec<PopulationEntry>,
    /// Prior probability that the primary user is transmitting.
    pub p_active: f64,
    pub selection: SelectionScheme,
    pub mining: MiningMode,
    pub key_bits: u64,
    pub initial_balance: u64,
    pub reward_mining: u64,
    pub compress_every: usize,
    /// Seal a competing block each round and settle it by fork choice.
    pub fork_injection: bool,
    /// Fix the channel state instead of drawing it.
    pub forced_pu: Option<bool>,
    /// Make `(node, round)` report the opposite of the channel state.
    pub inject_error: Option<(usize, u64)>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 1,
            trust: TrustParams {
                window: 5,
                ..TrustParams::default()
            },
            difficulty: DifficultyParams::default(),
            seal_difficulty: DifficultyParams {
                beta0: 256,
                t0_ms: 2000,
                beta_min: 2,
            },
            csc: CscDefaults::default(),
            sac: SacDefaults::default(),
            population: standard_population(),
            p_active: 0.5,
            selection: SelectionScheme::TrustValue,
            mining: MiningMode::ExpectedCost,
            key_bits: 128,
            initial_balance: 10_000_000,
            reward_mining: 50,
            compress_every: 100,
            fork_injection: false,
            forced_pu: None,
            inject_error: None,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        self.trust
            .validate()
            .map_err(|e| SimError::Config(format!("trust: {e}")))?;
        self.difficulty
            .validate()
            .map_err(|e| SimError::Config(format!("difficulty: {e}")))?;
        self.seal_difficulty
            .validate()
            .map_err(|e| SimError::Config(format!("seal_difficulty: {e}")))?;
        if self.population.iter().map(|p| p.count).sum::<usize>() == 0 {
            return bad("population must not be empty".into());
        }
        for (i, p) in self.population.iter().enumerate() {
            p.profile
                .validate()
                .map_err(|e| SimError::Config(format!("population[{i}]: {e}")))?;
        }
        if !(0.0..=1.0).contains(&self.p_active) {
            return bad("p_active must be in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.sac.bid_participation) {
            return bad("sac.bid_participation must be in [0, 1]".into());
        }
        if self.csc.n1 == 0 {
            return bad("csc.n1 must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.csc.tv_thr) {
            return bad("csc.tv_thr must be in [0, 1)".into());
        }
        if self.sac.max_valuation == 0 {
            return bad("sac.max_valuation must be at least 1".into());
        }
        if self.compress_every < 2 {
            return bad("compress_every must be at least 2".into());
        }
        Ok(())
    }

    /// Profiles in node order.
    pub fn profiles(&self) -> Vec<NodeProfile> {
        self.population
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.profile.clone(), p.count))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Channel = 1,
    Participation = 2,
    Arrival = 3,
    Selection = 4,
    Sensing = 5,
    Auction = 6,
    Mining = 7,
    Crypto = 8,
    Keys = 9,
}

/// Independent generator for one stream in one round, so the draws of a
/// round never depend on how many values earlier rounds consumed.
fn round_rng(seed: u64, stream: Stream, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.set_word_pos(u128::from(round) << 24);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRound {
    pub node: usize,
    pub kind: NodeKind,
    pub registered: bool,
    pub uploaded: bool,
    pub sr: Option<bool>,
    pub outcome: Outcome,
    pub tv_after: f64,
    /// Expected trials for this node's next block at its new trust value.
    pub expected_mining_cost: f64,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForkReport {
    pub candidates: Vec<usize>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: u64,
    pub pu_truth: bool,
    pub fusion_result: Option<bool>,
    pub task_issuer: usize,
    pub selected: Vec<usize>,
    pub auction: Option<AuctionReport>,
    pub miner: usize,
    pub block_interval_ms: u64,
    pub fork: Option<ForkReport>,
    pub compressed: bool,
    pub audit_ok: bool,
    pub nodes: Vec<NodeRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuctionReport {
    pub bidders: usize,
    pub winner: Option<WinnerReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WinnerReport {
    pub node: usize,
    pub total: u64,
    pub price: u64,
}

/// Scripted bids for one round: `(node, [(amount, valid)])`. The first
/// opening of each bidder rides on its deposit transaction.
pub type ScriptedBids = Vec<(usize, Vec<(u64, bool)>)>;

/// Overrides for a single hand-built round.
#[derive(Debug, Clone, Default)]
pub struct RoundScript {
    pub bids: Option<ScriptedBids>,
    /// Nodes that attempt to register, in order. Replaces participation,
    /// arrival shuffle and selection; the contract alone decides who stays.
    pub arrivals: Option<Vec<usize>>,
    /// Fixed sensing reports for these nodes.
    pub reports: Option<Vec<(usize, bool)>>,
    /// Register at plain `d_s`, without buying trust up to the threshold.
    pub no_boost: bool,
}

/// Token totals at the end of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TokenAudit {
    pub balances: u64,
    pub escrow: u64,
    pub burned: u64,
    pub initial: u64,
    pub minted: u64,
}

impl TokenAudit {
    pub fn holds(&self) -> bool {
        self.balances + self.escrow + self.burned == self.initial + self.minted
    }
}

pub struct World {
    config: WorldConfig,
    profiles: Vec<NodeProfile>,
    keys: Vec<KeyPair>,
    ids: Vec<AccountId>,
    index: BTreeMap<AccountId, usize>,
    locations: Vec<Location>,
    memory: Vec<SensorMemory>,
    chain: Chain,
    round: u64,
    clock_ms: u64,
    initial: u64,
    minted: u64,
    burned: u64,
    exec: Execution,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self, SimError> {
        Self::with_execution(config, Execution::Sequential)
    }

    /// `exec` is used for nonce search only; the round loop is sequential.
    pub fn with_execution(config: WorldConfig, exec: Execution) -> Result<Self, SimError> {
        config.validate()?;
        let profiles = config.profiles();
        let n = profiles.len();
        let mut rng = round_rng(config.seed, Stream::Keys, 0);
        let keys = (0..n)
            .map(|_| KeyPair::generate(config.key_bits, &mut rng))
            .collect::<Result<Vec<_>, _>>()?;
        let ids: Vec<AccountId> = keys.iter().map(|k| k.public.account_id()).collect();
        let index = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let locations = (0..n)
            .map(|_| Location::from_degrees(rng.gen_range(30.0..31.0), rng.gen_range(-98.0..-97.0)))
            .collect();
        let states: BTreeMap<AccountId, AccountState> = ids
            .iter()
            .map(|id| (*id, AccountState::new(*id, config.initial_balance)))
            .collect();
        let chain_config = ChainConfig {
            difficulty: config.seal_difficulty,
            compress_every: config.compress_every,
        };
        let chain = Chain::genesis(chain_config, &keys[0], states, 0, exec)?;
        Ok(World {
            initial: config.initial_balance * n as u64,
            profiles,
            keys,
            ids,
            index,
            locations,
            memory: vec![SensorMemory::default(); n],
            chain,
            round: 0,
            clock_ms: 0,
            minted: 0,
            burned: 0,
            exec,
            config,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[NodeProfile] {
        &self.profiles
    }

    pub fn account_id(&self, node: usize) -> AccountId {
        self.ids[node]
    }

    pub fn node_of(&self, id: &AccountId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn state(&self, node: usize) -> &AccountState {
        self.chain.account(&self.ids[node]).expect("every node has an account")
    }

    pub fn tv(&self, node: usize) -> f64 {
        self.state(node).trust.tv
    }

    /// Overwrite trust values, for hand-built scenarios, with a matching
    /// count of consistent rounds. Seals one block.
    pub fn set_trust(&mut self, tvs: &[(usize, f64)]) -> Result<(), SimError> {
        let mut states = self.chain.state().clone();
        for &(node, tv) in tvs {
            let t = &mut states.get_mut(&self.ids[node]).expect("known node").trust;
            t.tv = tv;
            // a history long enough to explain the value
            t.n_right = if tv < 1.0 {
                (-(1.0 - tv).ln() / self.config.trust.eta).ceil() as u64
            } else {
                1_000_000
            };
        }
        let miner = compression_authority(&states)
            .and_then(|id| self.node_of(&id))
            .unwrap_or(0);
        self.clock_ms += 1;
        let miner = self.keys[miner].clone();
        self.chain
            .seal_and_append(self.exec, &miner, vec![], states, self.clock_ms)?;
        Ok(())
    }

    pub fn audit(&self) -> TokenAudit {
        TokenAudit {
            balances: self.chain.state().values().map(|a| a.balance).sum(),
            escrow: 0,
            burned: self.burned,
            initial: self.initial,
            minted: self.minted,
        }
    }

    pub fn run_round(&mut self) -> Result<RoundReport, SimError> {
        self.run_scripted(&RoundScript::default())
    }

    /// Execute one full round: deploy, register, sense, fuse, auction,
    /// settle, update trust, mine.
    pub fn run_scripted(&mut self, script: &RoundScript) -> Result<RoundReport, SimError> {
        self.round += 1;
        let n = self.len();
        let round = self.round;
        let seed = self.config.seed;
        let start = self.clock_ms;
        let mut states = self.chain.state().clone();
        let mut txs: Vec<Transaction> = Vec::new();
        let mut minted = 0u64;
        let mut burned = 0u64;

        // Phase 1: the task issuer deploys both contracts.
        let ti = compression_authority(&states)
            .and_then(|id| self.node_of(&id))
            .expect("population is non-empty");
        let csc_id = ContractId(2 * round - 1);
        let sac_id = ContractId(2 * round);
        let c = &self.config;
        let mut csc = CscState::new(CscConfig {
            csc_id,
            t_ddl: start + c.csc.t_ddl_ms,
            n1: c.csc.n1,
            tv_thr: TrustFixed::from_f64(c.csc.tv_thr),
            d_s: c.csc.d_s,
            reward_sensing: c.csc.reward_sensing,
        });
        let mut sac = SacState::new(SacConfig {
            sac_id,
            csc_id,
            n2: c.sac.n2,
            t_self_d: start + c.csc.t_ddl_ms + 1,
            d_a: c.sac.d_a,
            commit_cap: c.sac.commit_cap,
            owner: self.ids[ti],
        });
        txs.push(Transaction::signed(&csc.config.deploy_payload(), &self.keys[ti]));
        txs.push(Transaction::signed(&sac.config.deploy_payload(), &self.keys[ti]));

        // Every stream draws a fixed amount per node, whatever happens.
        let mut rng = round_rng(seed, Stream::Channel, round);
        let pu_draw: f64 = rng.gen();
        let pu = c.forced_pu.unwrap_or(pu_draw < c.p_active);
        let mut rng = round_rng(seed, Stream::Participation, round);
        let wants: Vec<bool> = self
            .profiles
            .iter()
            .map(|p| rng.gen::<f64>() < p.participation)
            .collect();
        let mut rng = round_rng(seed, Stream::Sensing, round);
        let sense_draws: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut arrival: Vec<usize> = (0..n).collect();
        arrival.shuffle(&mut round_rng(seed, Stream::Arrival, round));
        let bid_plan = match &script.bids {
            Some(b) => b.clone(),
            None => self.draw_bids(round),
        };

        // Phase 2 and 3: sensors sign up, the selection scheme picks who
        // deposits, bidders escrow their first blinded bid.
        let selected = match &script.arrivals {
            Some(a) => a.clone(),
            None => {
                let candidates: Vec<Candidate> = arrival
                    .iter()
                    .filter(|&&i| wants[i])
                    .map(|&node| Candidate {
                        node,
                        tv: states[&self.ids[node]].trust.tv,
                    })
                    .collect();
                select_sensors(
                    &candidates,
                    c.selection,
                    c.csc.n1 as usize,
                    &mut round_rng(seed, Stream::Selection, round),
                )
            }
        };
        for &i in &selected {
            let id = self.ids[i];
            let tv = states[&id].trust.fixed();
            let extra = if script.no_boost {
                0
            } else {
                match boost_needed(tv, csc.config.tv_thr) {
                    Some(x) => x,
                    None => continue,
                }
            };
            let deposit = csc.config.d_s + extra;
            if states[&id].balance < deposit {
                continue;
            }
            match csc.register(self.keys[i].public.clone(), deposit, tv) {
                Ok(evicted) => {
                    states.get_mut(&id).expect("known").balance -= deposit;
                    txs.push(Transaction::signed(
                        &Payload::CscDeposit {
                            pk: id,
                            tv,
                            csc_id,
                            deposit,
                        },
                        &self.keys[i],
                    ));
                    if let Some(p) = evicted {
                        apply(&mut states, &mut txs, csc_id, &p, &mut minted, &mut burned);
                    }
                }
                Err(ContractError::BelowThreshold { .. } | ContractError::NotCompetitive { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }

        let mut crypto = round_rng(seed, Stream::Crypto, round);
        let mut openings: BTreeMap<AccountId, Vec<BidOpening>> = BTreeMap::new();
        for (node, bids) in &bid_plan {
            let id = self.ids[*node];
            let Some(((first, first_valid), rest)) = bids.split_first().map(|(f, r)| (*f, r)) else {
                continue;
            };
            let escrow = c.sac.d_a + bids.iter().map(|b| b.0).sum::<u64>();
            if states[&id].balance < escrow || bids.len() > c.sac.commit_cap {
                continue;
            }
            let rnds: Vec<[u8; 32]> = bids.iter().map(|_| random32(&mut crypto)).collect();
            let digest = bid_commitment(first, first_valid, &rnds[0]);
            match sac.register(id, c.sac.d_a, BlindedBid { digest, value: first }) {
                Ok(()) => {}
                Err(ContractError::TooManyBidders) => continue,
                Err(e) => return Err(e.into()),
            }
            states.get_mut(&id).expect("known").balance -= c.sac.d_a + first;
            txs.push(Transaction::signed(
                &Payload::SacDeposit {
                    pk: id,
                    tv: states[&id].trust.fixed(),
                    sac_id,
                    deposit: c.sac.d_a,
                    bid_commit: digest,
                    value: first,
                },
                &self.keys[*node],
            ));
            let mut ops = vec![BidOpening {
                amount: first,
                valid: first_valid,
                rnd: rnds[0],
            }];
            for (&(amount, valid), rnd) in rest.iter().zip(&rnds[1..]) {
                ops.push(BidOpening {
                    amount,
                    valid,
                    rnd: *rnd,
                });
            }
            openings.insert(id, ops);
        }
        csc.close_registration()?;
        sac.open_commits()?;
        for (id, ops) in &openings {
            let node = self.index[id];
            for o in &ops[1..] {
                let digest = bid_commitment(o.amount, o.valid, &o.rnd);
                sac.commit(
                    *id,
                    BlindedBid {
                        digest,
                        value: o.amount,
                    },
                )?;
                states.get_mut(id).expect("known").balance -= o.amount;
                txs.push(Transaction::signed(
                    &Payload::BidCommit {
                        sac_id,
                        pk: *id,
                        digest,
                        value: o.amount,
                    },
                    &self.keys[node],
                ));
            }
        }

        // Phase 4: anonymous uploads under a ring of all registered sensors,
        // each paired with a commitment, then fusion.
        let ring: Vec<_> = csc.registered.values().map(|r| r.public_key.clone()).collect();
        let mut reports: BTreeMap<usize, bool> = BTreeMap::new();
        let mut reveals = Vec::new();
        let now = start + 1;
        let uploaders: Vec<usize> = arrival
            .iter()
            .copied()
            .filter(|&i| csc.is_registered(&self.ids[i]))
            .collect();
        for &i in &uploaders {
            let id = self.ids[i];
            let mut sr = sense_with_draw(&self.profiles[i], &mut self.memory[i], pu, sense_draws[i]);
            if c.inject_error == Some((i, round)) {
                sr = !pu;
            }
            if let Some(&(_, fixed)) = script.reports.iter().flatten().find(|r| r.0 == i) {
                sr = fixed;
            }
            let mut msg_id = vec![0u8; 16];
            crypto.fill_bytes(&mut msg_id);
            let rnd = random32(&mut crypto);
            let packet = SensingPacket::new(&msg_id, sr, now, self.locations[i]);
            let pos = ring.iter().position(|pk| pk.account_id() == id).expect("registered");
            let sig = ring_sign(&packet, pos, &self.keys[i], &ring, &mut crypto)?;
            csc.upload(packet.clone(), sig.clone(), now)?;
            txs.push(Transaction::ring_signed(csc_id, packet, sig));
            let cm = commit(sr, &rnd, &msg_id, csc_id, id);
            txs.push(Transaction::signed(
                &Payload::SensingCommit {
                    csc_id,
                    digest: cm.digest,
                    pk: id,
                },
                &self.keys[i],
            ));
            csc.commit(cm)?;
            reports.insert(i, sr);
            reveals.push(SensingReveal {
                account: id,
                sr,
                rnd,
                msg_id,
            });
        }
        let fusion = match csc.fuse() {
            Ok(bit) => Some(bit),
            Err(ContractError::NoPackets) => None,
            Err(e) => return Err(e.into()),
        };

        // Phase 5: the auction proceeds only on a confirmed idle channel.
        let mut winner: Option<Winner> = None;
        let bidders = sac.bidders.len();
        let busy = fusion != Some(false);
        match sac.open_reveals(busy) {
            Ok(()) => {
                for (id, ops) in &openings {
                    if !sac.bidders.contains_key(id) {
                        continue;
                    }
                    sac.reveal(*id, ops)?;
                    txs.push(Transaction::signed(
                        &Payload::BidReveal {
                            sac_id,
                            pk: *id,
                            openings: ops.clone(),
                        },
                        &self.keys[self.index[id]],
                    ));
                }
                match sac.win() {
                    Ok(w) => winner = Some(w),
                    Err(ContractError::NoBidders) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            Err(ContractError::ChannelBusy) => {}
            Err(e) => return Err(e.into()),
        }
        for p in sac.destroy(sac.config.t_self_d)? {
            apply(&mut states, &mut txs, sac_id, &p, &mut minted, &mut burned);
        }

        // Phase 6: open commitments, pay sensors, update every trust value.
        let mut outcomes: BTreeMap<usize, Outcome> = BTreeMap::new();
        if fusion.is_some() {
            for (r, &i) in reveals.iter().zip(&uploaders) {
                txs.push(Transaction::signed(
                    &Payload::SensingReveal {
                        csc_id,
                        pk: r.account,
                        sr: r.sr,
                        rnd: r.rnd,
                        msg_id: r.msg_id.clone(),
                    },
                    &self.keys[i],
                ));
            }
            for s in csc.settle(&reveals)? {
                outcomes.insert(self.index[&s.payout.account], s.outcome);
                apply(&mut states, &mut txs, csc_id, &s.payout, &mut minted, &mut burned);
            }
        } else {
            for p in csc.void_refunds() {
                apply(&mut states, &mut txs, csc_id, &p, &mut minted, &mut burned);
            }
        }
        for (i, id) in self.ids.iter().enumerate() {
            let outcome = outcomes.get(&i).copied().unwrap_or(Outcome::Inactive);
            let acct = states.get_mut(id).expect("known");
            acct.trust = update_trust(&acct.trust, outcome, round, &c.trust)?;
        }

        // Mining: the winner is drawn from parent-state trust.
        let (order, interval) = self.draw_miners(round);
        let timestamp = start + c.csc.t_ddl_ms + interval;
        let contenders: Vec<usize> = if c.fork_injection && order.len() > 1 {
            order[..2].to_vec()
        } else {
            order[..1].to_vec()
        };
        let mut sealed: Vec<(usize, Block, u64)> = Vec::new();
        for &m in &contenders {
            let mut st = states.clone();
            let mut tx = txs.clone();
            st.get_mut(&self.ids[m]).expect("known").balance += c.reward_mining;
            tx.push(Transaction::contract_output(
                PROTOCOL_CONTRACT,
                &Payload::Reward {
                    pk: self.ids[m],
                    amount: c.reward_mining,
                    round,
                },
            ));
            let (block, _) = seal_block(
                self.exec,
                SealRequest {
                    height: self.chain.next_height(),
                    prev_hash: self.chain.tip().hash(),
                    timestamp_ms: timestamp.max(self.chain.tip().header.timestamp_ms + 1),
                    miner: &self.keys[m],
                    miner_trust: self.state(m).trust.fixed(),
                    beta: self.chain.next_beta(),
                    transactions: tx,
                    account_states: st,
                    max_trials: (self.chain.next_beta() << 8).max(1 << 20),
                },
            )?;
            let ts = block.header.timestamp_ms;
            sealed.push((m, block, ts));
        }
        let pick = if sealed.len() > 1 {
            let cands: Vec<ForkCandidate> = sealed
                .iter()
                .map(|(m, b, ts)| ForkCandidate {
                    hash: b.hash(),
                    miner: self.ids[*m],
                    miner_trust: b.header.miner_trust.to_f64(),
                    timestamp_ms: *ts,
                })
                .collect();
            (0..cands.len())
                .min_by(|&a, &b| fork_order(&cands[a], &cands[b]))
                .expect("non-empty")
        } else {
            0
        };
        let fork = (sealed.len() > 1).then(|| ForkReport {
            candidates: contenders.clone(),
            chosen: sealed[pick].0,
        });
        let (miner, block, ts) = sealed.swap_remove(pick);
        self.chain.append_block(block)?;
        minted += c.reward_mining;
        self.minted += minted;
        self.burned += burned;
        self.clock_ms = ts;

        let mut compressed = false;
        if self.chain.compression_due() {
            let auth = compression_authority(self.chain.state()).expect("non-empty");
            let key = self.keys[self.index[&auth]].clone();
            self.clock_ms += 1;
            self.chain.compress(&key, self.clock_ms, self.exec)?;
            compressed = true;
        }

        let audit = self.audit();
        let beta0 = self.config.difficulty.beta0;
        let nodes = (0..n)
            .map(|i| {
                let a = self.state(i);
                NodeRound {
                    node: i,
                    kind: self.profiles[i].kind,
                    registered: uploaders.contains(&i),
                    uploaded: reports.contains_key(&i),
                    sr: reports.get(&i).copied(),
                    outcome: outcomes.get(&i).copied().unwrap_or(Outcome::Inactive),
                    tv_after: a.trust.tv,
                    expected_mining_cost: expected_cost(target_for(a.trust.tv, beta0)),
                    tokens: a.balance,
                }
            })
            .collect();
        Ok(RoundReport {
            round,
            pu_truth: pu,
            fusion_result: fusion,
            task_issuer: ti,
            selected,
            auction: (bidders > 0).then(|| AuctionReport {
                bidders,
                winner: winner.map(|w| WinnerReport {
                    node: self.index[&w.account],
                    total: w.total,
                    price: w.price,
                }),
            }),
            miner,
            block_interval_ms: interval,
            fork,
            compressed,
            audit_ok: audit.holds(),
            nodes,
        })
    }

    /// One true bid and one decoy per participating node, in arrival order.
    fn draw_bids(&self, round: u64) -> ScriptedBids {
        let c = &self.config.sac;
        let mut rng = round_rng(self.config.seed, Stream::Auction, round);
        let mut plan = Vec::new();
        for i in 0..self.len() {
            let enter = rng.gen::<f64>() < c.bid_participation;
            let value = rng.gen_range(1..=c.max_valuation);
            let decoy = rng.gen_range(1..=c.max_valuation);
            if enter {
                plan.push((i, vec![(value, true), (decoy, false)]));
            }
        }
        plan
    }

    /// Nodes in the order they would find a block, plus the block interval
    /// in milliseconds.
    fn draw_miners(&self, round: u64) -> (Vec<usize>, u64) {
        let beta0 = self.config.difficulty.beta0;
        let rate = beta0 as f64 / self.config.difficulty.t0_ms as f64;
        let z: Vec<u32> = (0..self.len()).map(|i| target_for(self.tv(i), beta0).0).collect();
        let mut rng = round_rng(self.config.seed, Stream::Mining, round);
        let draws: Vec<f64> = (0..self.len()).map(|_| rng.gen()).collect();
        match self.config.mining {
            MiningMode::ExpectedCost => {
                // weighted draw without replacement via exponential keys
                let weights: Vec<f64> = z.iter().map(|&z| (-f64::from(z)).exp2()).collect();
                let mut keyed: Vec<(f64, usize)> = draws
                    .iter()
                    .zip(&weights)
                    .enumerate()
                    .map(|(i, (&u, &w))| (-(1.0 - u).ln() / w, i))
                    .collect();
                keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let total: f64 = weights.iter().sum();
                let interval = (1.0 / (rate * total)).round().max(1.0) as u64;
                (keyed.into_iter().map(|k| k.1).collect(), interval)
            }
            MiningMode::Stochastic => {
                let mut trials: Vec<(u64, usize)> = draws
                    .iter()
                    .zip(&z)
                    .enumerate()
                    .map(|(i, (&u, &z))| (geometric(u, (-f64::from(z)).exp2()), i))
                    .collect();
                trials.sort();
                let interval = (trials[0].0 as f64 / rate).round().max(1.0) as u64;
                (trials.into_iter().map(|t| t.1).collect(), interval)
            }
        }
    }
}

/// Trials until the first success with per-trial probability `p`.
fn geometric(u: f64, p: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let u = u.max(f64::MIN_POSITIVE);
    (u.ln() / (1.0 - p).ln()).ceil().max(1.0) as u64
}

fn random32<R: RngCore>(rng: &mut R) -> [u8; 32] {
    let mut b = [0u8; 32];
    rng.fill_bytes(&mut b);
    b
}

fn apply(
    states: &mut BTreeMap<AccountId, AccountState>,
    txs: &mut Vec<Transaction>,
    contract: ContractId,
    p: &Payout,
    minted: &mut u64,
    burned: &mut u64,
) {
    states.get_mut(&p.account).expect("payout to a known account").balance += p.credit;
    *minted += p.minted;
    *burned += p.forfeited;
    txs.push(Transaction::contract_output(
        contract,
        &Payload::Settlement {
            contract,
            pk: p.account,
            kind: p.kind,
            credit: p.credit,
            forfeited: p.forfeited,
        },
    ));
}
