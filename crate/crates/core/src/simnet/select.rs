use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScheme {
    Random,
    RegisterTime,
    TrustValue,
}

impl SelectionScheme {
    pub const ALL: [SelectionScheme; 3] = [
        SelectionScheme::Random,
        SelectionScheme::RegisterTime,
        SelectionScheme::TrustValue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionScheme::Random => "random",
            SelectionScheme::RegisterTime => "register_time",
            SelectionScheme::TrustValue => "trust_value",
        }
    }
}

impl FromStr for SelectionScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown selection scheme `{s}`"))
    }
}

/// A node offering to sense, in arrival order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: usize,
    pub tv: f64,
}

/// Pick up to `n1` sensors from `candidates` (given in arrival order).
/// The result is a list of node indices in selection order.
pub fn select_sensors<R: Rng + ?Sized>(
    candidates: &[Candidate],
    scheme: SelectionScheme,
    n1: usize,
    rng: &mut R,
) -> Vec<usize> {
    let k = n1.min(candidates.len());
    match scheme {
        SelectionScheme::Random => candidates.choose_multiple(rng, k).map(|c| c.node).collect(),
        SelectionScheme::RegisterTime => candidates[..k].iter().map(|c| c.node).collect(),
        SelectionScheme::TrustValue => {
            let mut v = candidates.to_vec();
            v.sort_by(|a, b| b.tv.total_cmp(&a.tv).then(a.node.cmp(&b.node)));
            v.truncate(k);
            v.into_iter().map(|c| c.node).collect()
        }
    }
}
