//! Trust-value model.
//!
//! A node's trust is derived from two counters: how often its sensing result
//! agreed with the fused result (`n_right`) and a recency-weighted count of
//! disagreements over the last `window` rounds. Inactivity is penalised by a
//! piecewise-linear attenuation of the sleep counter.
//!
//! ```text
//! tv1      = exp(-rho * N_w) * (1 - exp(-eta * N_r))
//! N_w(n)   = sum_{m = n-P}^{n} r(m) * (1 - (n - m) / P)
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrustError {
    #[error("round {round} is not after the last update (round {last})")]
    StaleRound { round: u64, last: u64 },
    #[error("invalid trust parameters: {0}")]
    InvalidParams(String),
}

/// Trust value in fixed point with four decimal digits (`10000` = 1.0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct TrustFixed(pub u32);

impl TrustFixed {
    pub const SCALE: u32 = 10_000;
    pub const ONE: TrustFixed = TrustFixed(Self::SCALE);

    pub fn from_f64(tv: f64) -> Self {
        TrustFixed((tv.max(0.0) * f64::from(Self::SCALE)).round() as u32)
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / f64::from(Self::SCALE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustParams {
    pub rho: f64,
    pub eta: f64,
    /// Forgetting window P, in rounds.
    pub window: u32,
    pub k1: u32,
    pub k2: u32,
    pub r1: f64,
    pub r2: f64,
    /// Reset the sleep counter whenever the node participates. Off by
    /// default: the counter accumulates every inactive round.
    #[serde(default)]
    pub sleep_reset: bool,
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams {
            rho: 1.0,
            eta: 1.0,
            window: 10,
            k1: 5,
            k2: 20,
            r1: 0.9,
            r2: 0.5,
            sleep_reset: false,
        }
    }
}

impl TrustParams {
    pub fn validate(&self) -> Result<(), TrustError> {
        let bad = |m: &str| Err(TrustError::InvalidParams(m.to_string()));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho must be positive");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.k1 == 0 || self.k1 >= self.k2 {
            return bad("require 0 < k1 < k2");
        }
        if !(0.0 < self.r2 && self.r2 < self.r1 && self.r1 < 1.0) {
            return bad("require 0 < r2 < r1 < 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Consistent,
    Inconsistent,
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrustState {
    pub tv: f64,
    pub n_right: u64,
    /// Rounds (within the forgetting window) in which the node was wrong.
    pub wrong_rounds: BTreeSet<u64>,
    pub r_sleep: u64,
    pub last_round: u64,
}

impl TrustState {
    pub fn fixed(&self) -> TrustFixed {
        TrustFixed::from_f64(self.tv)
    }

    /// Canonical byte encoding used for account-state merkle leaves.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * self.wrong_rounds.len());
        out.extend_from_slice(&self.tv.to_bits().to_be_bytes());
        out.extend_from_slice(&self.n_right.to_be_bytes());
        out.extend_from_slice(&self.r_sleep.to_be_bytes());
        out.extend_from_slice(&self.last_round.to_be_bytes());
        out.extend_from_slice(&(self.wrong_rounds.len() as u32).to_be_bytes());
        for m in &self.wrong_rounds {
            out.extend_from_slice(&m.to_be_bytes());
        }
        out
    }
}

/// Recency-weighted wrong count at round `n`. Entries older than `n - window`
/// contribute nothing.
pub fn effective_wrong_count<'a, I>(wrong_rounds: I, n: u64, window: u32) -> f64
where
    I: IntoIterator<Item = &'a u64>,
{
    let p = f64::from(window);
    wrong_rounds
        .into_iter()
        .filter(|&&m| m <= n && n - m <= u64::from(window))
        .map(|&m| 1.0 - (n - m) as f64 / p)
        .sum()
}

pub fn tv1(n_right: u64, n_wrong_effective: f64, params: &TrustParams) -> f64 {
    (-params.rho * n_wrong_effective).exp() * (1.0 - (-params.eta * n_right as f64).exp())
}

/// Attenuation for `r_sleep` inactive rounds: 1 at 0, `r1` at `k1`, `r2` at
/// and beyond `k2`, linear in between.
pub fn sleep_decay(r_sleep: u64, params: &TrustParams) -> f64 {
    let s = r_sleep as f64;
    let (k1, k2) = (f64::from(params.k1), f64::from(params.k2));
    let (r1, r2) = (params.r1, params.r2);
    if s <= k1 {
        (k1 - s) / k1 * (1.0 - r1) + r1
    } else if s <= k2 {
        (s - k2) / (k1 - k2) * (r1 - r2) + r2
    } else {
        r2
    }
}

pub fn update_trust(
    state: &TrustState,
    outcome: Outcome,
    n: u64,
    params: &TrustParams,
) -> Result<TrustState, TrustError> {
    if n <= state.last_round {
        return Err(TrustError::StaleRound {
            round: n,
            last: state.last_round,
        });
    }
    let mut next = state.clone();
    next.last_round = n;
    let horizon = n.saturating_sub(u64::from(params.window));
    next.wrong_rounds = next.wrong_rounds.split_off(&horizon);

    match outcome {
        Outcome::Inactive => {
            // decay with the counter as it stood before this round
            next.tv *= sleep_decay(next.r_sleep, params);
            next.r_sleep += 1;
        }
        Outcome::Consistent => {
            next.n_right += 1;
            let fresh = tv1(
                next.n_right,
                effective_wrong_count(&next.wrong_rounds, n, params.window),
                params,
            );
            let delta = fresh - next.tv;
            if delta > 0.0 {
                next.tv += delta * sleep_decay(next.r_sleep, params);
            } else {
                next.tv = fresh;
            }
            if params.sleep_reset {
                next.r_sleep = 0;
            }
        }
        Outcome::Inconsistent => {
            next.wrong_rounds.insert(n);
            next.tv = tv1(
                next.n_right,
                effective_wrong_count(&next.wrong_rounds, n, params.window),
                params,
            );
            if params.sleep_reset {
                next.r_sleep = 0;
            }
        }
    }
    next.tv = next.tv.clamp(0.0, 1.0);
    Ok(next)
}

/// Smallest `rho` (exclusive) that resists on-off attacks for a given `eta`.
pub fn onoff_threshold(eta: f64) -> f64 {
    eta / (1.0 - (-eta).exp()) - eta
}

pub fn check_onoff_resistance(rho: f64, eta: f64) -> bool {
    rho > onoff_threshold(eta)
}

/// Magnitude of d(tv1)/d(N_w): how fast trust falls per additional wrong.
pub fn marginal_drop_rate(n_right: f64, n_wrong: f64, rho: f64, eta: f64) -> f64 {
    rho * (-rho * n_wrong).exp() * (1.0 - (-eta * n_right).exp())
}

/// Magnitude of d(tv1)/d(N_r): how fast trust rises per additional right.
pub fn marginal_gain_rate(n_right: f64, n_wrong: f64, rho: f64, eta: f64) -> f64 {
    eta * (-rho * n_wrong).exp() * (-eta * n_right).exp()
}

/// Finite change of tv1 from one additional full-weight wrong.
pub fn single_step_drop(n_right: u64, n_wrong: f64, params: &TrustParams) -> f64 {
    tv1(n_right, n_wrong, params) - tv1(n_right, n_wrong + 1.0, params)
}

/// Finite change of tv1 from one additional right.
pub fn single_step_gain(n_right: u64, n_wrong: f64, params: &TrustParams) -> f64 {
    tv1(n_right + 1, n_wrong, params) - tv1(n_right, n_wrong, params)
}
