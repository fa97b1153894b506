use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use spectrust_core::consensus::DifficultyParams;
use spectrust_core::simnet::{
    CscDefaults, MiningMode, NodeKind, NodeProfile, PopulationEntry, SacDefaults, SelectionScheme, WorldConfig,
};
use spectrust_core::trust::{check_onoff_resistance, onoff_threshold, TrustParams};

/// Rejected configuration, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigInvalid {
    pub field: String,
    pub message: String,
}

impl ConfigInvalid {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigInvalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigInvalid {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MiningCost,
    Sensing,
    Onoff,
    Calibrate,
    DemoRound,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MiningCost => "mining-cost",
            ExperimentKind::Sensing => "sensing",
            ExperimentKind::Onoff => "onoff",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::DemoRound => "demo-round",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub kind: NodeKind,
    pub count: usize,
    pub p_d: Option<f64>,
    pub p_f: Option<f64>,
    pub participation: Option<f64>,
    pub malicious_period: Option<u32>,
}

impl PopulationSpec {
    fn entry(&self) -> PopulationEntry {
        let base = NodeProfile::standard(self.kind);
        PopulationEntry {
            profile: NodeProfile {
                kind: self.kind,
                p_d: self.p_d.unwrap_or(base.p_d),
                p_f: self.p_f.unwrap_or(base.p_f),
                participation: self.participation.unwrap_or(base.participation),
                malicious_period: self.malicious_period.unwrap_or(base.malicious_period),
            },
            count: self.count,
        }
    }
}

/// Simulator settings that are not protocol parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub p_active: f64,
    pub selection: SelectionScheme,
    pub mining: MiningMode,
    pub key_bits: u64,
    pub initial_balance: u64,
    pub reward_mining: u64,
    pub compress_every: usize,
    pub fork_injection: bool,
    pub seal_difficulty: DifficultyParams,
}

impl Default for WorldSection {
    fn default() -> Self {
        let w = WorldConfig::default();
        WorldSection {
            p_active: w.p_active,
            selection: w.selection,
            mining: w.mining,
            key_bits: w.key_bits,
            initial_balance: w.initial_balance,
            reward_mining: w.reward_mining,
            compress_every: w.compress_every,
            fork_injection: w.fork_injection,
            seal_difficulty: w.seal_difficulty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningCostSection {
    pub slots: u64,
}

impl Default for MiningCostSection {
    fn default() -> Self {
        MiningCostSection { slots: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingSection {
    pub schemes: Vec<SelectionScheme>,
    pub n1: Vec<u32>,
    pub rounds: u64,
}

impl Default for SensingSection {
    fn default() -> Self {
        SensingSection {
            schemes: SelectionScheme::ALL.to_vec(),
            n1: vec![1, 3, 5, 7, 9, 12, 16, 20],
            rounds: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnoffSection {
    pub rounds: u64,
    /// Node that makes one wrong report in the paired recovery run.
    pub recovery_node: usize,
    pub recovery_round: u64,
}

impl Default for OnoffSection {
    fn default() -> Self {
        OnoffSection {
            rounds: 500,
            recovery_node: 0,
            recovery_round: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSection {
    /// Force the channel idle so the auction runs.
    pub pu_idle: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub max_z: u32,
    pub runs: u32,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection { max_z: 20, runs: 20 }
    }
}

fn default_trust() -> TrustParams {
    WorldConfig::default().trust
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_trust")]
    pub trust: TrustParams,
    #[serde(default)]
    pub difficulty: DifficultyParams,
    #[serde(default)]
    pub csc: CscDefaults,
    #[serde(default)]
    pub sac: SacDefaults,
    #[serde(default)]
    pub population: Vec<PopulationSpec>,
    #[serde(default)]
    pub world: WorldSection,
    #[serde(default)]
    pub mining_cost: MiningCostSection,
    #[serde(default)]
    pub sensing: SensingSection,
    #[serde(default)]
    pub onoff: OnoffSection,
    #[serde(default)]
    pub demo: DemoSection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigInvalid> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map_or_else(|| "<file>".to_string(), |s| locate(text, s));
            ConfigInvalid::new(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Ok(Self::parse(&text)?)
    }

    pub fn world_config(&self) -> WorldConfig {
        let w = &self.world;
        WorldConfig {
            seed: self.seed,
            trust: self.trust.clone(),
            difficulty: self.difficulty,
            seal_difficulty: w.seal_difficulty,
            csc: self.csc.clone(),
            sac: self.sac.clone(),
            population: self.population.iter().map(PopulationSpec::entry).collect(),
            p_active: w.p_active,
            selection: w.selection,
            mining: w.mining,
            key_bits: w.key_bits,
            initial_balance: w.initial_balance,
            reward_mining: w.reward_mining,
            compress_every: w.compress_every,
            fork_injection: w.fork_injection,
            forced_pu: None,
            inject_error: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigInvalid> {
        let t = &self.trust;
        t.validate().map_err(|e| ConfigInvalid::new("trust", e.to_string()))?;
        if !check_onoff_resistance(t.rho, t.eta) {
            return Err(ConfigInvalid::new(
                "trust.rho",
                format!(
                    "rho = {} does not exceed the on-off resistance bound eta/(1-e^-eta) - eta = {:.6} for eta = {}",
                    t.rho,
                    onoff_threshold(t.eta),
                    t.eta
                ),
            ));
        }
        self.difficulty
            .validate()
            .map_err(|e| ConfigInvalid::new("difficulty", e.to_string()))?;
        self.world
            .seal_difficulty
            .validate()
            .map_err(|e| ConfigInvalid::new("world.seal_difficulty", e.to_string()))?;

        let needs_population = !matches!(self.experiment, ExperimentKind::Calibrate | ExperimentKind::DemoRound);
        if needs_population && self.population.is_empty() {
            return Err(ConfigInvalid::new(
                "population",
                "at least one population entry is required",
            ));
        }
        for (i, p) in self.population.iter().enumerate() {
            if p.count == 0 {
                return Err(ConfigInvalid::new(
                    format!("population[{i}].count"),
                    "must be at least 1",
                ));
            }
            for (name, v) in [("p_d", p.p_d), ("p_f", p.p_f), ("participation", p.participation)] {
                if let Some(v) = v {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(ConfigInvalid::new(
                            format!("population[{i}].{name}"),
                            "must be in [0, 1]",
                        ));
                    }
                }
            }
            if p.malicious_period == Some(0) {
                return Err(ConfigInvalid::new(
                    format!("population[{i}].malicious_period"),
                    "must be at least 1",
                ));
            }
        }
        if self.csc.n1 == 0 {
            return Err(ConfigInvalid::new("csc.n1", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.csc.tv_thr) {
            return Err(ConfigInvalid::new("csc.tv_thr", "must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.world.p_active) {
            return Err(ConfigInvalid::new("world.p_active", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.sac.bid_participation) {
            return Err(ConfigInvalid::new("sac.bid_participation", "must be in [0, 1]"));
        }
        if self.sac.max_valuation == 0 {
            return Err(ConfigInvalid::new("sac.max_valuation", "must be at least 1"));
        }
        if self.world.compress_every < 2 {
            return Err(ConfigInvalid::new("world.compress_every", "must be at least 2"));
        }
        if !(16..=4096).contains(&self.world.key_bits) || !self.world.key_bits.is_multiple_of(2) {
            return Err(ConfigInvalid::new(
                "world.key_bits",
                "must be an even number in [16, 4096]",
            ));
        }

        let warm = 3 * u64::from(t.window);
        let nodes: usize = self.population.iter().map(|p| p.count).sum();
        match self.experiment {
            ExperimentKind::MiningCost if self.mining_cost.slots <= warm => Err(ConfigInvalid::new(
                "mining_cost.slots",
                format!("must exceed the warm-up of {warm} rounds"),
            )),
            ExperimentKind::Sensing => {
                let s = &self.sensing;
                if s.rounds <= warm {
                    return Err(ConfigInvalid::new(
                        "sensing.rounds",
                        format!("must exceed the warm-up of {warm} rounds"),
                    ));
                }
                if s.schemes.is_empty() {
                    return Err(ConfigInvalid::new("sensing.schemes", "must not be empty"));
                }
                if s.n1.is_empty() || s.n1.contains(&0) {
                    return Err(ConfigInvalid::new(
                        "sensing.n1",
                        "must be a non-empty list of positive counts",
                    ));
                }
                Ok(())
            }
            ExperimentKind::Onoff => {
                let o = &self.onoff;
                if o.rounds <= warm {
                    return Err(ConfigInvalid::new(
                        "onoff.rounds",
                        format!("must exceed the warm-up of {warm} rounds"),
                    ));
                }
                if o.recovery_node >= nodes {
                    return Err(ConfigInvalid::new(
                        "onoff.recovery_node",
                        format!("must be below {nodes}"),
                    ));
                }
                if o.recovery_round == 0 || o.recovery_round + u64::from(t.window) >= o.rounds {
                    return Err(ConfigInvalid::new(
                        "onoff.recovery_round",
                        "must leave at least one forgetting window before the end of the run",
                    ));
                }
                Ok(())
            }
            ExperimentKind::Calibrate => {
                let c = &self.calibrate;
                if !(1..=28).contains(&c.max_z) {
                    return Err(ConfigInvalid::new("calibrate.max_z", "must be in [1, 28]"));
                }
                if c.runs == 0 {
                    return Err(ConfigInvalid::new("calibrate.runs", "must be at least 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Dotted key path of the table entry containing byte offset `span.start`.
fn locate(text: &str, span: std::ops::Range<usize>) -> String {
    let before = &text[..span.start.min(text.len())];
    let table = before
        .lines()
        .rev()
        .find_map(|l| {
            let l = l.trim();
            l.strip_prefix('[')
                .map(|r| r.trim_start_matches('[').trim_end_matches(']').to_string())
        })
        .unwrap_or_default();
    let line = text[before.rfind('\n').map_or(0, |i| i + 1)..]
        .lines()
        .next()
        .unwrap_or("");
    let key = line.split('=').next().unwrap_or("").trim();
    match (table.is_empty(), key.is_empty() || key.starts_with('[')) {
        (true, true) => "<file>".into(),
        (true, false) => key.into(),
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}
