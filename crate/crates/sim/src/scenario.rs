//! Scenario files (TOML) and the validated simulation config they produce.

use std::path::Path;

use falcon_core::{MessageKind, NodeId, SortMode, SystemParams};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Lockstep,
    Random,
    Adversarial,
}

impl std::str::FromStr for ModeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lockstep" => Ok(ModeName::Lockstep),
            "random" => Ok(ModeName::Random),
            "adversarial" => Ok(ModeName::Adversarial),
            _ => Err(format!("unknown mode {s:?} (lockstep, random, adversarial)")),
        }
    }
}

/// One delay rule. Absent fields match everything; `extra` ticks are added
/// to the base delay of every matching message. First match wins.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub from: Option<u32>,
    pub to: Option<u32>,
    pub kind: Option<String>,
    pub instance: Option<u64>,
    pub index: Option<u32>,
    pub extra: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultFile {
    pub node: u32,
    pub kind: String,
    pub at: Option<u64>,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n: usize,
    pub f: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    pub instances: u64,
    #[serde(default = "default_tx_load")]
    pub tx_load: usize,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    #[serde(default = "default_block_cap")]
    pub block_cap: usize,
    #[serde(default)]
    pub sort_mode: SortModeName,
    #[serde(default = "default_max_events")]
    pub max_events: usize,
    #[serde(default = "default_true")]
    pub probes: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortModeName {
    #[default]
    Partial,
    Integral,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub min_delay: Option<u64>,
    pub max_delay: Option<u64>,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Subset of `events`, `latency`, `stages`, `throughput`, `chains`.
    pub metrics: Option<Vec<String>>,
    pub dir: Option<String>,
    /// Minimum distinct commit times for the stability report to call a run
    /// continuous.
    pub continuity_k: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: Option<String>,
    pub system: SystemSection,
    pub run: RunSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub faults: Vec<FaultFile>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_tx_load() -> usize {
    4
}
fn default_mode() -> ModeName {
    ModeName::Lockstep
}
fn default_block_cap() -> usize {
    32
}
fn default_max_events() -> usize {
    2_000_000
}
fn default_true() -> bool {
    true
}

pub const METRIC_NAMES: [&str; 5] = ["events", "latency", "stages", "throughput", "chains"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayRule {
    pub from: Option<NodeId>,
    pub to: Option<NodeId>,
    pub kind: Option<MessageKind>,
    pub instance: Option<u64>,
    pub index: Option<NodeId>,
    pub extra: u64,
}

impl DelayRule {
    pub fn any(extra: u64) -> Self {
        DelayRule {
            from: None,
            to: None,
            kind: None,
            instance: None,
            index: None,
            extra,
        }
    }

    pub fn matches(&self, env: &falcon_core::Envelope) -> bool {
        self.from.is_none_or(|x| x == env.from)
            && self.to.is_none_or(|x| x == env.to)
            && self.kind.is_none_or(|x| x == env.body.kind())
            && self.instance.is_none_or(|x| x == env.addr.acsq)
            && self.index.is_none_or(|x| x == env.addr.index())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every message arrives exactly one tick after it is sent.
    Lockstep,
    /// Uniform seeded delay in `[min, max]`.
    Random { min: u64, max: u64 },
    /// Seeded delay in `[min, max]` plus the first matching rule's extra.
    Adversarial {
        min: u64,
        max: u64,
        rules: Vec<DelayRule>,
    },
}

impl Mode {
    pub fn is_lockstep(&self) -> bool {
        matches!(self, Mode::Lockstep)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Lockstep => "lockstep",
            Mode::Random { .. } => "random",
            Mode::Adversarial { .. } => "adversarial",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FaultKind {
    /// Silent from `at` onward; messages to it are dropped.
    Crash { at: u64 },
    /// Sends different blocks to the two halves of the network.
    Equivocate,
    /// Withholds its own proposals, otherwise follows the protocol.
    Silent,
    /// Inverts its agreement inputs and shortcut votes.
    WrongAabaBit,
    /// A correct node whose outbound traffic the network slows down.
    DelayTarget { rules: Vec<DelayRule> },
}

impl FaultKind {
    /// Whether the node counts toward `f`.
    pub fn is_faulty(&self) -> bool {
        !matches!(self, FaultKind::DelayTarget { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FaultKind::Crash { .. } => "crash",
            FaultKind::Equivocate => "equivocate",
            FaultKind::Silent => "silent",
            FaultKind::WrongAabaBit => "wrong_aaba_bit",
            FaultKind::DelayTarget { .. } => "delay_target",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultSpec {
    pub node: NodeId,
    pub kind: FaultKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub name: String,
    pub params: SystemParams,
    pub seed: u64,
    pub mode: Mode,
    pub faults: Vec<FaultSpec>,
    /// Instances checked by the observer; one extra tail instance runs so
    /// that the last checked one can be triggered.
    pub num_instances: u64,
    pub tx_load: usize,
    pub block_cap: usize,
    pub sort_mode: SortMode,
    pub max_events: usize,
    pub probes: bool,
    pub metrics: Vec<String>,
    pub continuity_k: usize,
}

impl SimConfig {
    pub fn new(params: SystemParams, num_instances: u64) -> Self {
        SimConfig {
            name: "unnamed".into(),
            params,
            seed: 0,
            mode: Mode::Lockstep,
            faults: Vec::new(),
            num_instances,
            tx_load: default_tx_load(),
            block_cap: default_block_cap(),
            sort_mode: SortMode::Partial,
            max_events: default_max_events(),
            probes: true,
            metrics: METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
            continuity_k: 2,
        }
    }

    pub fn fault(&self, id: NodeId) -> Option<&FaultKind> {
        self.faults.iter().find(|f| f.node == id).map(|f| &f.kind)
    }

    /// Correct nodes: everyone not listed as faulty.
    pub fn is_correct(&self, id: NodeId) -> bool {
        self.fault(id).is_none_or(|k| !k.is_faulty())
    }

    pub fn correct_nodes(&self) -> Vec<NodeId> {
        self.params.nodes().filter(|&id| self.is_correct(id)).collect()
    }

    pub fn is_fault_free(&self) -> bool {
        self.faults.iter().all(|f| !f.kind.is_faulty())
    }

    /// Lockstep with no fault entries at all, delay targets included: the
    /// setting where every block should make it into every ACS set.
    pub fn is_favorable(&self) -> bool {
        self.mode.is_lockstep() && self.faults.is_empty()
    }

    pub fn instance_limit(&self) -> u64 {
        self.num_instances + 1
    }

    pub fn wants(&self, metric: &str) -> bool {
        self.metrics.iter().any(|m| m == metric)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_instances == 0 {
            return Err(invalid("run.instances must be at least 1"));
        }
        if self.block_cap == 0 {
            return Err(invalid("run.block_cap must be at least 1"));
        }
        let faulty = self.faults.iter().filter(|f| f.kind.is_faulty()).count();
        if faulty > self.params.f() {
            return Err(invalid(format!(
                "{faulty} faulty nodes exceed f = {}",
                self.params.f()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.faults {
            if !self.params.contains(f.node) {
                return Err(invalid(format!("fault on unknown node {}", f.node.get())));
            }
            if !seen.insert(f.node) {
                return Err(invalid(format!("node {} has two faults", f.node.get())));
            }
        }
        match &self.mode {
            Mode::Lockstep => {}
            Mode::Random { min, max } | Mode::Adversarial { min, max, .. } => {
                if *min == 0 || min > max {
                    return Err(invalid(format!(
                        "delay range [{min}, {max}] must satisfy 1 <= min <= max"
                    )));
                }
            }
        }
        for m in &self.metrics {
            if !METRIC_NAMES.contains(&m.as_str()) {
                return Err(invalid(format!("unknown metric {m:?}")));
            }
        }
        Ok(())
    }
}

fn node(n: usize, raw: u32, what: &str) -> Result<NodeId, ConfigError> {
    if raw == 0 || raw as usize > n {
        return Err(invalid(format!("{what} = {raw} is not a node in 1..={n}")));
    }
    Ok(NodeId::new(raw))
}

fn rule(n: usize, r: &RuleSpec) -> Result<DelayRule, ConfigError> {
    let kind = match &r.kind {
        None => None,
        Some(k) => Some(MessageKind::parse(k).ok_or_else(|| invalid(format!("unknown message kind {k:?}")))?),
    };
    Ok(DelayRule {
        from: r.from.map(|x| node(n, x, "rule.from")).transpose()?,
        to: r.to.map(|x| node(n, x, "rule.to")).transpose()?,
        kind,
        instance: r.instance,
        index: r.index.map(|x| node(n, x, "rule.index")).transpose()?,
        extra: r.extra,
    })
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Validated config, with optional command-line overrides.
    pub fn to_config(&self, seed: Option<u64>, mode: Option<ModeName>) -> Result<SimConfig, ConfigError> {
        let n = self.system.n;
        let params = match self.system.f {
            Some(f) => SystemParams::new(n, f),
            None => SystemParams::max_faults(n),
        }
        .map_err(|e| invalid(e.to_string()))?;
        let min = self.network.min_delay.unwrap_or(1);
        let max = self.network.max_delay.unwrap_or(10);
        let rules = self
            .network
            .rules
            .iter()
            .map(|r| rule(n, r))
            .collect::<Result<Vec<_>, _>>()?;
        let mode = match mode.unwrap_or(self.run.mode) {
            ModeName::Lockstep => {
                if !rules.is_empty() {
                    return Err(invalid("network.rules require mode = \"adversarial\""));
                }
                Mode::Lockstep
            }
            ModeName::Random => {
                if !rules.is_empty() {
                    return Err(invalid("network.rules require mode = \"adversarial\""));
                }
                Mode::Random { min, max }
            }
            ModeName::Adversarial => Mode::Adversarial { min, max, rules },
        };
        let mut faults = Vec::new();
        for f in &self.faults {
            let id = node(n, f.node, "faults.node")?;
            if f.kind != "crash" && f.at.is_some() {
                return Err(invalid(format!(
                    "`at` only applies to crash faults (node {})",
                    f.node
                )));
            }
            if f.kind != "delay_target" && !f.rules.is_empty() {
                return Err(invalid(format!(
                    "`rules` only apply to delay_target faults (node {})",
                    f.node
                )));
            }
            let kind = match f.kind.as_str() {
                "crash" => FaultKind::Crash {
                    at: f.at.unwrap_or(0),
                },
                "equivocate" => FaultKind::Equivocate,
                "silent" => FaultKind::Silent,
                "wrong_aaba_bit" => FaultKind::WrongAabaBit,
                "delay_target" => FaultKind::DelayTarget {
                    rules: f
                        .rules
                        .iter()
                        .map(|r| {
                            let mut d = rule(n, r)?;
                            d.from = Some(id);
                            Ok(d)
                        })
                        .collect::<Result<Vec<_>, ConfigError>>()?,
                },
                other => return Err(invalid(format!("unknown fault kind {other:?}"))),
            };
            faults.push(FaultSpec { node: id, kind });
        }
        let cfg = SimConfig {
            name: self.name.clone().unwrap_or_else(|| "unnamed".into()),
            params,
            seed: seed.unwrap_or(self.run.seed),
            mode,
            faults,
            num_instances: self.run.instances,
            tx_load: self.run.tx_load,
            block_cap: self.run.block_cap,
            sort_mode: match self.run.sort_mode {
                SortModeName::Partial => SortMode::Partial,
                SortModeName::Integral => SortMode::Integral,
            },
            max_events: self.run.max_events,
            probes: self.run.probes,
            metrics: self
                .output
                .metrics
                .clone()
                .unwrap_or_else(|| METRIC_NAMES.iter().map(|s| s.to_string()).collect()),
            continuity_k: self.output.continuity_k.unwrap_or(2),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
