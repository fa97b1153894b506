//! The headline experiments: expected mining cost per node type,
//! cooperative detection under each selection scheme, and trust curves
//! under on-off attack. Statistics skip a warm-up of `3 * window` rounds.

use std::collections::BTreeMap;

use serde::Serialize;

use super::node::{NodeKind, NodeProfile};
use super::select::SelectionScheme;
use super::world::{PopulationEntry, RoundReport, RoundScript, World, WorldConfig};
use super::SimError;
use crate::consensus::{expected_cost, target_for};
use crate::ledger::Block;
use crate::par::Execution;

pub fn warmup(config: &WorldConfig) -> u64 {
    3 * u64::from(config.trust.window)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiningRow {
    pub slot: u64,
    pub node_id: usize,
    pub node_type: NodeKind,
    pub tv: f64,
    pub z_bits: u32,
    pub expected_trials: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningCost {
    pub rows: Vec<MiningRow>,
    /// Mean expected trials per node type over post-warm-up slots.
    pub type_means: BTreeMap<NodeKind, f64>,
    /// Slots whose token audit failed.
    pub audit_failures: Vec<u64>,
    pub warmup: u64,
}

impl MiningCost {
    /// Rnode mean over the cheapest other type.
    pub fn reliable_ratio(&self) -> Option<f64> {
        let r = *self.type_means.get(&NodeKind::Rnode)?;
        let other = self
            .type_means
            .iter()
            .filter(|(k, _)| **k != NodeKind::Rnode)
            .map(|(_, v)| *v)
            .min_by(f64::total_cmp)?;
        Some(r / other)
    }
}

/// Run `slots` rounds and price every node's next block at its current trust.
pub fn mining_cost(config: &WorldConfig, slots: u64) -> Result<MiningCost, SimError> {
    let mut world = World::new(config.clone())?;
    let beta0 = config.difficulty.beta0;
    let warm = warmup(config);
    let mut rows = Vec::with_capacity(slots as usize * world.len());
    let mut sums: BTreeMap<NodeKind, (f64, u64)> = BTreeMap::new();
    let mut audit_failures = Vec::new();
    for _ in 0..slots {
        let r = world.run_round()?;
        if !r.audit_ok {
            audit_failures.push(r.round);
        }
        for n in &r.nodes {
            let z = target_for(n.tv_after, beta0);
            let cost = expected_cost(z);
            rows.push(MiningRow {
                slot: r.round,
                node_id: n.node,
                node_type: n.kind,
                tv: n.tv_after,
                z_bits: z.0,
                expected_trials: cost,
            });
            if r.round > warm {
                let e = sums.entry(n.kind).or_default();
                e.0 += cost;
                e.1 += 1;
            }
        }
    }
    Ok(MiningCost {
        rows,
        type_means: sums.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect(),
        audit_failures,
        warmup: warm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensingRow {
    pub scheme: SelectionScheme,
    pub n1: u32,
    pub rounds: u64,
    pub pd: f64,
    pub pf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingPoint {
    pub row: SensingRow,
    /// Fraction of post-warm-up rounds where the fused result missed the
    /// channel state (a voided task counts as a miss).
    pub error_rate: f64,
}

pub fn sensing_point(
    config: &WorldConfig,
    scheme: SelectionScheme,
    n1: u32,
    rounds: u64,
) -> Result<SensingPoint, SimError> {
    let mut c = config.clone();
    c.selection = scheme;
    c.csc.n1 = n1;
    let warm = warmup(&c);
    let mut world = World::new(c)?;
    let (mut busy, mut hits, mut idle, mut alarms, mut errors, mut counted) = (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    for _ in 0..rounds {
        let r = world.run_round()?;
        if r.round <= warm {
            continue;
        }
        counted += 1;
        let said_busy = r.fusion_result == Some(true);
        if r.fusion_result != Some(r.pu_truth) {
            errors += 1;
        }
        if r.pu_truth {
            busy += 1;
            hits += u64::from(said_busy);
        } else {
            idle += 1;
            alarms += u64::from(said_busy);
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(SensingPoint {
        row: SensingRow {
            scheme,
            n1,
            rounds,
            pd: ratio(hits, busy),
            pf: ratio(alarms, idle),
        },
        error_rate: ratio(errors, counted),
    })
}

/// Every `(scheme, n1)` pair, ordered scheme-major. Points are independent
/// worlds, fanned out with `exec`.
pub fn sensing_sweep(
    config: &WorldConfig,
    schemes: &[SelectionScheme],
    n1s: &[u32],
    rounds: u64,
    exec: Execution,
) -> Result<Vec<SensingPoint>, SimError> {
    let points: Vec<(SelectionScheme, u32)> = schemes.iter().flat_map(|&s| n1s.iter().map(move |&n| (s, n))).collect();
    exec.map(&points, |&(s, n)| sensing_point(config, s, n, rounds))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnOffRow {
    pub round: u64,
    pub node_type: NodeKind,
    pub mean_tv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnOff {
    pub rows: Vec<OnOffRow>,
    /// Mean trust per type over the last quarter of the run.
    pub steady: BTreeMap<NodeKind, f64>,
    /// Highest trust any on-off attacker reached after warm-up.
    pub max_attacker_tv: Option<f64>,
}

pub fn onoff(config: &WorldConfig, rounds: u64) -> Result<OnOff, SimError> {
    let mut world = World::new(config.clone())?;
    let warm = warmup(config);
    let tail_from = rounds - rounds / 4;
    let mut rows = Vec::new();
    let mut tail: BTreeMap<NodeKind, (f64, u64)> = BTreeMap::new();
    let mut max_attacker: Option<f64> = None;
    for _ in 0..rounds {
        let r = world.run_round()?;
        let mut per: BTreeMap<NodeKind, (f64, u64)> = BTreeMap::new();
        for n in &r.nodes {
            let e = per.entry(n.kind).or_default();
            e.0 += n.tv_after;
            e.1 += 1;
            if n.kind == NodeKind::OOnode && r.round > warm {
                max_attacker = Some(max_attacker.map_or(n.tv_after, |m| m.max(n.tv_after)));
            }
        }
        for (kind, (s, c)) in per {
            let mean_tv = s / c as f64;
            rows.push(OnOffRow {
                round: r.round,
                node_type: kind,
                mean_tv,
            });
            if r.round > tail_from {
                let e = tail.entry(kind).or_default();
                e.0 += mean_tv;
                e.1 += 1;
            }
        }
    }
    Ok(OnOff {
        rows,
        steady: tail.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect(),
        max_attacker_tv: max_attacker,
    })
}

/// Paired trust trajectories of one node, with and without a single wrong
/// report at round `at`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub node: usize,
    pub at: u64,
    pub clean: Vec<f64>,
    pub perturbed: Vec<f64>,
}

impl Recovery {
    /// Largest gap between the trajectories from round `at + k` onward.
    pub fn gap_after(&self, k: u64) -> f64 {
        let from = (self.at + k) as usize - 1;
        self.clean
            .iter()
            .zip(&self.perturbed)
            .skip(from)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Gap right after the error.
    pub fn initial_drop(&self) -> f64 {
        let i = self.at as usize - 1;
        self.clean[i] - self.perturbed[i]
    }
}

pub fn recovery(config: &WorldConfig, node: usize, at: u64, rounds: u64) -> Result<Recovery, SimError> {
    let trace = |inject: Option<(usize, u64)>| -> Result<Vec<f64>, SimError> {
        let mut c = config.clone();
        c.inject_error = inject;
        let mut w = World::new(c)?;
        (0..rounds)
            .map(|_| w.run_round().map(|r| r.nodes[node].tv_after))
            .collect()
    };
    Ok(Recovery {
        node,
        at,
        clean: trace(None)?,
        perturbed: trace(Some((node, at)))?,
    })
}

/// Trust values and sensing reports of the five sensors in the worked task
/// example, in arrival order.
pub const DEMO_TRUST: [f64; 5] = [0.91, 0.92, 0.87, 0.93, 0.94];
pub const DEMO_REPORTS: [bool; 5] = [false, true, true, false, true];
/// `(node, [(amount, valid)])` for the two bidders of the worked auction.
pub const DEMO_BIDS: [(usize, [(u64, bool); 2]); 2] =
    [(1, [(100, true), (200, false)]), (2, [(150, true), (300, false)])];

#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub report: RoundReport,
    /// Sensors that stayed registered, by node index.
    pub sensors: Vec<usize>,
    pub trust_before: Vec<f64>,
    /// The demo chain, genesis first.
    pub blocks: Vec<Block>,
}

/// One hand-built round: five sensors at the demo trust values and
/// threshold 0.90 competing for three slots, and two bidders. With
/// `pu_idle` the channel is idle and every sensor reports it so.
pub fn demo_round(seed: u64, pu_idle: bool) -> Result<Demo, SimError> {
    let mut c = WorldConfig {
        seed,
        population: vec![PopulationEntry {
            profile: NodeProfile::standard(NodeKind::Rnode),
            count: 5,
        }],
        forced_pu: Some(!pu_idle),
        ..WorldConfig::default()
    };
    c.csc.n1 = 3;
    c.csc.tv_thr = 0.90;
    c.csc.d_s = 100;
    c.sac.n2 = 2;
    c.sac.d_a = 100;
    let mut world = World::new(c)?;
    let tvs: Vec<(usize, f64)> = DEMO_TRUST.iter().copied().enumerate().collect();
    world.set_trust(&tvs)?;
    let reports = DEMO_REPORTS
        .iter()
        .enumerate()
        .map(|(i, &sr)| (i, sr && !pu_idle))
        .collect();
    let script = RoundScript {
        bids: Some(DEMO_BIDS.iter().map(|(n, b)| (*n, b.to_vec())).collect()),
        arrivals: Some((0..5).collect()),
        reports: Some(reports),
        no_boost: true,
    };
    let report = world.run_scripted(&script)?;
    let sensors = report.nodes.iter().filter(|n| n.registered).map(|n| n.node).collect();
    Ok(Demo {
        report,
        sensors,
        trust_before: DEMO_TRUST.to_vec(),
        blocks: world.chain().blocks().to_vec(),
    })
}
