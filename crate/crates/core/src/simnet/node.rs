use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    /// Reliable: honest and always available.
    Rnode,
    /// On-off attacker: honest except every `malicious_period`-th sensing.
    OOnode,
    /// Lazy: reports a coin flip without sensing.
    Lnode,
    /// Honest but signs up only part of the time.
    UAnode,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [NodeKind::Rnode, NodeKind::OOnode, NodeKind::Lnode, NodeKind::UAnode];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Rnode => "Rnode",
            NodeKind::OOnode => "OOnode",
            NodeKind::Lnode => "Lnode",
            NodeKind::UAnode => "UAnode",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub kind: NodeKind,
    pub p_d: f64,
    pub p_f: f64,
    /// Probability of registering for sensing in a round.
    pub participation: f64,
    /// Rounds between attacks; only used by [`NodeKind::OOnode`].
    pub malicious_period: u32,
}

impl NodeProfile {
    /// Defaults for each class: honest detectors at `p_d = 0.9, p_f = 0.15`,
    /// lazy nodes at a fair coin, half-time participation for `UAnode`.
    pub fn standard(kind: NodeKind) -> Self {
        let (p_d, p_f) = match kind {
            NodeKind::Lnode => (0.5, 0.5),
            _ => (0.9, 0.15),
        };
        NodeProfile {
            kind,
            p_d,
            p_f,
            participation: if kind == NodeKind::UAnode { 0.5 } else { 1.0 },
            malicious_period: 3,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("p_d", self.p_d),
            ("p_f", self.p_f),
            ("participation", self.participation),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1]"));
            }
        }
        if self.kind == NodeKind::OOnode && self.malicious_period == 0 {
            return Err("malicious_period must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-node sensing memory (the on-off attacker's schedule).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SensorMemory {
    pub sensings: u64,
}

/// Report for one sensing, from a uniform draw in `[0, 1)`. Using an
/// explicit draw lets paired runs share their randomness.
pub fn sense_with_draw(profile: &NodeProfile, memory: &mut SensorMemory, pu_active: bool, draw: f64) -> bool {
    let p = if pu_active { profile.p_d } else { profile.p_f };
    let honest = draw < p;
    memory.sensings += 1;
    if profile.kind == NodeKind::OOnode && memory.sensings.is_multiple_of(u64::from(profile.malicious_period)) {
        !honest
    } else {
        honest
    }
}

pub fn sense<R: Rng + ?Sized>(profile: &NodeProfile, memory: &mut SensorMemory, pu_active: bool, rng: &mut R) -> bool {
    sense_with_draw(profile, memory, pu_active, rng.gen())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rate(kind: NodeKind, pu: bool) -> f64 {
        let p = NodeProfile::standard(kind);
        let mut m = SensorMemory::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        (0..n).filter(|_| sense(&p, &mut m, pu, &mut rng)).count() as f64 / n as f64
    }

    #[test]
    fn reliable_detection_rate() {
        assert!((rate(NodeKind::Rnode, true) - 0.9).abs() < 0.02);
        assert!((rate(NodeKind::Rnode, false) - 0.15).abs() < 0.02);
    }

    #[test]
    fn lazy_node_is_a_coin() {
        assert!((rate(NodeKind::Lnode, true) - 0.5).abs() < 0.02);
        assert!((rate(NodeKind::Lnode, false) - 0.5).abs() < 0.02);
    }

    #[test]
    fn on_off_attacks_every_third_sensing() {
        let p = NodeProfile::standard(NodeKind::OOnode);
        let honest = NodeProfile::standard(NodeKind::Rnode);
        let mut m = SensorMemory::default();
        let mut h = SensorMemory::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for i in 1..=30u64 {
            let d: f64 = rng.gen();
            let a = sense_with_draw(&p, &mut m, true, d);
            let b = sense_with_draw(&honest, &mut h, true, d);
            assert_eq!(a != b, i % 3 == 0, "sensing {i}");
        }
    }
}
