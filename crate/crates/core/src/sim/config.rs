//! Scenario configuration: TOML schema, defaults, and validation.
//!
//! Documented key set (all under the listed tables):
//!
//! ```toml
//! [scenario]
//! episodes = 2000            # training-phase episode budget per block
//! epochs = 30                # training epochs per episode
//! blocks = 1                 # block intervals to run
//! latency_ticks = 1          # broadcast delivery delay (>= 1)
//! fee_rate = 0.05            # manager's cut of each block reward
//! block_reward = 1.0         # tokens per confirmed block
//! monitor_threshold = 0.05   # std-dev alert level
//! monitor_warmup = 500       # episodes before alerts may fire
//! collaboration = "collaborative"  # or "naive"
//! workers = "single"         # or "multi"
//!
//! [seeds]                    # required; runs are refused without it
//! master = 42
//!
//! [landscape]
//! noise = 0.02               # hash-noise amplitude, [0, 0.1]
//! optimum_count = 3
//!
//! [hardware]
//! lut_max = 100000
//! throughput_min = 10.0
//!
//! [controller]
//! learning_rate = 0.1
//! baseline_decay = 0.9
//!
//! [[miners]]
//! id = 0
//! strength = 1.0             # (0, 1]; 1.0 = strong
//! role = "strong"            # strong | weak | backup
//!
//! [[tasks]]                  # optional; a default task is supplied
//! id = "t0"
//! difficulty = 100.0
//! reward = 10.0
//!
//! [space]                    # optional; defaults to the built-in fixture
//! names = ["a", "b"]
//! ranges = [[1, 2], [3, 4]]
//!
//! [[departures]]
//! tick = 1000
//! miner = 3
//!
//! [[joins]]
//! tick = 1500
//! miner = 12                 # known id rejoins; new id registers
//! strength = 1.0
//! ```

use crate::chain::Task;
use crate::hw::HardwareConstraints;
use crate::pool::{CollaborationMode, MinerId, MinerProfile, Role};
use crate::space::{HyperparameterSpec, SearchSpace};
use serde::Deserialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: [seeds] with a master seed is required for reproducible runs")]
    MissingSeeds,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unknown miner {0}")]
    UnknownMiner(MinerId),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerMode {
    Single,
    Multi,
}

/// How explorer slots get their searching region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentMode {
    /// Split the space into one subspace per strong miner.
    Partition,
    /// No split: every explorer searches the whole space (the individual
    /// baseline).
    FullSpace,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub episodes: u32,
    pub epochs: u32,
    pub blocks: u32,
    pub latency_ticks: u64,
    pub fee_rate: f64,
    pub block_reward: f64,
    pub monitor_threshold: f64,
    pub monitor_warmup: u64,
    pub collaboration: CollaborationMode,
    pub workers: WorkerMode,
    pub assignment: AssignmentMode,
    pub master_seed: u64,
    pub noise: f64,
    pub optimum_count: usize,
    pub constraints: HardwareConstraints,
    pub learning_rate: f64,
    pub baseline_decay: f64,
    pub miners: Vec<MinerProfile>,
    pub tasks: Vec<Task>,
    pub space: SearchSpace,
    pub departures: Vec<(u64, MinerId)>,
    pub joins: Vec<(u64, MinerId, f64)>,
}

impl Scenario {
    /// Ticks per block interval: one Init tick, the training ticks, one
    /// commitment-deadline tick, one validation tick.
    pub fn block_ticks(&self) -> u64 {
        self.episodes as u64 + 3
    }

    pub fn horizon(&self) -> u64 {
        self.blocks as u64 * self.block_ticks()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        raw.validate()
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

/// Minimal inputs for the stand-alone partition command: the search space,
/// the master seed if configured, and the configured miner count. Unlike a
/// full scenario, miners and seeds may be absent (the command line can
/// supply both).
pub struct PartitionInputs {
    pub space: SearchSpace,
    pub seed: Option<u64>,
    pub miner_count: Option<usize>,
}

impl PartitionInputs {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        let space = match raw.space {
            Some(rs) => {
                if rs.names.len() != rs.ranges.len() {
                    return Err(SimError::InvalidScenario(
                        "space names and ranges must have the same length".into(),
                    ));
                }
                let specs = rs
                    .names
                    .into_iter()
                    .zip(rs.ranges)
                    .map(|(n, r)| HyperparameterSpec::new(n, r))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
                SearchSpace::new(specs).map_err(|e| SimError::InvalidScenario(e.to_string()))?
            }
            None => crate::space::load_fixture_subspaces().0,
        };
        Ok(Self {
            space,
            seed: raw.seeds.and_then(|s| s.master),
            miner_count: (!raw.miners.is_empty()).then_some(raw.miners.len()),
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    scenario: RawScenario,
    seeds: Option<RawSeeds>,
    #[serde(default)]
    landscape: RawLandscape,
    #[serde(default)]
    hardware: RawHardware,
    #[serde(default)]
    controller: RawController,
    #[serde(default)]
    miners: Vec<RawMiner>,
    tasks: Option<Vec<RawTask>>,
    space: Option<RawSpace>,
    #[serde(default)]
    departures: Vec<RawDeparture>,
    #[serde(default)]
    joins: Vec<RawJoin>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default = "default_episodes")]
    episodes: u32,
    #[serde(default = "default_epochs")]
    epochs: u32,
    #[serde(default = "default_blocks")]
    blocks: u32,
    #[serde(default = "default_latency")]
    latency_ticks: u64,
    #[serde(default = "default_fee_rate")]
    fee_rate: f64,
    #[serde(default = "default_block_reward")]
    block_reward: f64,
    #[serde(default = "default_monitor_threshold")]
    monitor_threshold: f64,
    #[serde(default = "default_monitor_warmup")]
    monitor_warmup: u64,
    #[serde(default = "default_collaboration")]
    collaboration: String,
    #[serde(default = "default_workers")]
    workers: String,
    #[serde(default = "default_assignment")]
    assignment: String,
}

impl Default for RawScenario {
    fn default() -> Self {
        Self {
            episodes: default_episodes(),
            epochs: default_epochs(),
            blocks: default_blocks(),
            latency_ticks: default_latency(),
            fee_rate: default_fee_rate(),
            block_reward: default_block_reward(),
            monitor_threshold: default_monitor_threshold(),
            monitor_warmup: default_monitor_warmup(),
            collaboration: default_collaboration(),
            workers: default_workers(),
            assignment: default_assignment(),
        }
    }
}

fn default_episodes() -> u32 {
    2000
}
fn default_epochs() -> u32 {
    30
}
fn default_blocks() -> u32 {
    1
}
fn default_latency() -> u64 {
    1
}
fn default_fee_rate() -> f64 {
    0.05
}
fn default_block_reward() -> f64 {
    1.0
}
fn default_monitor_threshold() -> f64 {
    0.05
}
fn default_monitor_warmup() -> u64 {
    500
}
fn default_collaboration() -> String {
    "collaborative".into()
}
fn default_workers() -> String {
    "single".into()
}
fn default_assignment() -> String {
    "partition".into()
}
fn default_noise() -> f64 {
    0.02
}
fn default_optimum_count() -> usize {
    40
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_baseline_decay() -> f64 {
    0.9
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeeds {
    master: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLandscape {
    #[serde(default = "default_noise")]
    noise: f64,
    #[serde(default = "default_optimum_count")]
    optimum_count: usize,
}

impl Default for RawLandscape {
    fn default() -> Self {
        Self {
            noise: default_noise(),
            optimum_count: default_optimum_count(),
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawHardware {
    lut_max: Option<u64>,
    throughput_min: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    #[serde(default = "default_learning_rate")]
    learning_rate: f64,
    #[serde(default = "default_baseline_decay")]
    baseline_decay: f64,
}

impl Default for RawController {
    fn default() -> Self {
        Self {
            learning_rate: default_learning_rate(),
            baseline_decay: default_baseline_decay(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMiner {
    id: u32,
    #[serde(default = "one")]
    strength: f64,
    #[serde(default = "default_role")]
    role: String,
}

fn one() -> f64 {
    1.0
}
fn default_role() -> String {
    "strong".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    id: String,
    difficulty: f64,
    reward: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    names: Vec<String>,
    ranges: Vec<Vec<u32>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeparture {
    tick: u64,
    miner: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoin {
    tick: u64,
    miner: u32,
    #[serde(default = "one")]
    strength: f64,
}

impl RawConfig {
    fn validate(self) -> Result<Scenario, SimError> {
        let master_seed = self
            .seeds
            .and_then(|s| s.master)
            .ok_or(SimError::MissingSeeds)?;

        let s = self.scenario;
        if s.episodes == 0 {
            return Err(SimError::InvalidScenario("episodes must be >= 1".into()));
        }
        if s.epochs == 0 {
            return Err(SimError::InvalidScenario("epochs must be >= 1".into()));
        }
        if s.blocks == 0 {
            return Err(SimError::InvalidScenario("blocks must be >= 1".into()));
        }
        if s.latency_ticks == 0 {
            return Err(SimError::InvalidScenario(
                "latency_ticks must be >= 1 (episodes are atomic)".into(),
            ));
        }
        if !(0.0..1.0).contains(&s.fee_rate) {
            return Err(SimError::InvalidScenario("fee_rate must be in [0, 1)".into()));
        }
        if s.block_reward <= 0.0 {
            return Err(SimError::InvalidScenario("block_reward must be positive".into()));
        }
        let collaboration = match s.collaboration.as_str() {
            "collaborative" => CollaborationMode::Collaborative,
            "naive" => CollaborationMode::Naive,
            other => {
                return Err(SimError::InvalidScenario(format!(
                    "collaboration must be \"collaborative\" or \"naive\", got {other:?}"
                )))
            }
        };
        let workers = match s.workers.as_str() {
            "single" => WorkerMode::Single,
            "multi" => WorkerMode::Multi,
            other => {
                return Err(SimError::InvalidScenario(format!(
                    "workers must be \"single\" or \"multi\", got {other:?}"
                )))
            }
        };
        let assignment = match s.assignment.as_str() {
            "partition" => AssignmentMode::Partition,
            "full-space" => AssignmentMode::FullSpace,
            other => {
                return Err(SimError::InvalidScenario(format!(
                    "assignment must be \"partition\" or \"full-space\", got {other:?}"
                )))
            }
        };
        if !(0.0..=0.1).contains(&self.landscape.noise) {
            return Err(SimError::InvalidScenario("noise must be in [0, 0.1]".into()));
        }
        if self.landscape.optimum_count == 0 {
            return Err(SimError::InvalidScenario("optimum_count must be >= 1".into()));
        }

        if self.miners.is_empty() {
            return Err(SimError::InvalidScenario("at least one miner is required".into()));
        }
        let mut ids = BTreeSet::new();
        let mut miners = Vec::with_capacity(self.miners.len());
        for m in &self.miners {
            if !ids.insert(m.id) {
                return Err(SimError::InvalidScenario(format!(
                    "duplicate miner id {}",
                    m.id
                )));
            }
            let role = match m.role.as_str() {
                "strong" => Role::Explorer,
                "weak" => Role::Exploiter,
                "backup" => Role::Backup,
                other => {
                    return Err(SimError::InvalidScenario(format!(
                        "miner role must be strong, weak, or backup, got {other:?}"
                    )))
                }
            };
            if role == Role::Explorer && m.strength != 1.0 {
                return Err(SimError::InvalidScenario(format!(
                    "miner {} declared strong but has strength {}",
                    m.id, m.strength
                )));
            }
            miners.push(
                MinerProfile::new(MinerId(m.id), m.strength, role)
                    .map_err(|e| SimError::InvalidScenario(e.to_string()))?,
            );
        }

        let tasks = match self.tasks {
            Some(raw) => raw
                .into_iter()
                .map(|t| {
                    if t.id.contains(char::is_whitespace) || t.id.is_empty() {
                        return Err(SimError::InvalidScenario(format!(
                            "task id {:?} must be non-empty without whitespace",
                            t.id
                        )));
                    }
                    Task::new(t.id, t.difficulty, t.reward)
                        .map_err(|e| SimError::InvalidScenario(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![Task::new("t0", 100.0, 10.0).expect("default task")],
        };
        if tasks.is_empty() {
            return Err(SimError::InvalidScenario("task list must not be empty".into()));
        }

        let space = match self.space {
            Some(raw) => {
                if raw.names.len() != raw.ranges.len() {
                    return Err(SimError::InvalidScenario(
                        "space names and ranges must have the same length".into(),
                    ));
                }
                let specs = raw
                    .names
                    .into_iter()
                    .zip(raw.ranges)
                    .map(|(n, r)| HyperparameterSpec::new(n, r))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
                SearchSpace::new(specs).map_err(|e| SimError::InvalidScenario(e.to_string()))?
            }
            None => crate::space::load_fixture_subspaces().0,
        };

        let constraints = HardwareConstraints {
            lut_max: self.hardware.lut_max.unwrap_or(100_000),
            throughput_min: self.hardware.throughput_min.unwrap_or(10.0),
        };

        let scenario = Scenario {
            episodes: s.episodes,
            epochs: s.epochs,
            blocks: s.blocks,
            latency_ticks: s.latency_ticks,
            fee_rate: s.fee_rate,
            block_reward: s.block_reward,
            monitor_threshold: s.monitor_threshold,
            monitor_warmup: s.monitor_warmup,
            collaboration,
            workers,
            assignment,
            master_seed,
            noise: self.landscape.noise,
            optimum_count: self.landscape.optimum_count,
            constraints,
            learning_rate: self.controller.learning_rate,
            baseline_decay: self.controller.baseline_decay,
            miners,
            tasks,
            space,
            departures: self
                .departures
                .iter()
                .map(|d| (d.tick, MinerId(d.miner)))
                .collect(),
            joins: self
                .joins
                .iter()
                .map(|j| (j.tick, MinerId(j.miner), j.strength))
                .collect(),
        };

        let horizon = scenario.horizon();
        for (tick, miner) in &scenario.departures {
            if *tick >= horizon {
                return Err(SimError::InvalidScenario(format!(
                    "departure of miner {miner} at tick {tick} is past the horizon {horizon}"
                )));
            }
            if !ids.contains(&miner.0) {
                return Err(SimError::UnknownMiner(*miner));
            }
        }
        for (tick, _, strength) in &scenario.joins {
            if *tick >= horizon {
                return Err(SimError::InvalidScenario(format!(
                    "join at tick {tick} is past the horizon {horizon}"
                )));
            }
            if !(*strength > 0.0 && *strength <= 1.0) {
                return Err(SimError::InvalidScenario(format!(
                    "join strength {strength} outside (0, 1]"
                )));
            }
        }
        Ok(scenario)
    }
}
