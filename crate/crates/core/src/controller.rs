//! Per-miner architecture search: sample a configuration from a learned
//! policy, gate it against the hardware model, query the reward oracle,
//! update the policy, and track the best result so far.
//!
//! The policy is one independent categorical distribution per hyperparameter
//! (softmax over per-value logits) trained with REINFORCE against an
//! exponential-moving-average baseline. Constraint-violating episodes feed
//! their zero reward to the learner rather than being skipped.

use crate::hw::{gate, HardwareConstraints};
use crate::oracle::RewardOracle;
use crate::rng::SplitMix64;
use crate::space::{Configuration, Subspace};

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_BASELINE_DECAY: f64 = 0.9;

/// Episode and epoch budget for one search task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub episodes: u32,
    pub epochs_per_episode: u32,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            episodes: 2000,
            epochs_per_episode: 30,
        }
    }
}

/// One completed episode: the sampled configuration, its gated reward, and
/// the running maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub config: Configuration,
    pub reward: f64,
    pub best_so_far: f64,
}

/// Independent per-hyperparameter categorical policies over a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    ranges: Vec<Vec<u32>>,
    logits: Vec<Vec<f64>>,
    learning_rate: f64,
    baseline_decay: f64,
    baseline: f64,
}

impl Policy {
    /// Uniform policy (all logits zero) over the subspace's ranges.
    pub fn uniform(sub: &Subspace, learning_rate: f64, baseline_decay: f64) -> Self {
        Self {
            ranges: sub.ranges().to_vec(),
            logits: sub.ranges().iter().map(|r| vec![0.0; r.len()]).collect(),
            learning_rate,
            baseline_decay,
            baseline: 0.0,
        }
    }

    pub fn arity(&self) -> usize {
        self.ranges.len()
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    /// Softmax probabilities for one hyperparameter.
    pub fn probabilities(&self, field: usize) -> Vec<f64> {
        softmax(&self.logits[field])
    }

    pub fn set_logit(&mut self, field: usize, index: usize, value: f64) {
        self.logits[field][index] = value;
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Draw one configuration: each hyperparameter value is sampled
/// independently from the softmax of its logit vector.
pub fn sample(policy: &Policy, sub: &Subspace, rng: &mut SplitMix64) -> Configuration {
    debug_assert_eq!(policy.ranges, sub.ranges(), "policy built for another subspace");
    let values = policy
        .ranges
        .iter()
        .zip(&policy.logits)
        .map(|(range, logits)| {
            let probs = softmax(logits);
            let u = rng.next_f64();
            let mut acc = 0.0;
            let mut chosen = range.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            range[chosen]
        })
        .collect();
    Configuration::new(values)
}

/// REINFORCE update for one (configuration, gated reward) observation.
///
/// For each hyperparameter, the chosen value's logit moves by
/// `lr * (reward - baseline) * (1 - p_chosen)` and every other logit by
/// `-lr * (reward - baseline) * p_other` (the exact softmax log-likelihood
/// gradient). The baseline then decays toward the reward.
pub fn update(policy: &mut Policy, config: &Configuration, reward: f64) {
    let advantage = reward - policy.baseline;
    for (field, &value) in config.values().iter().enumerate() {
        let chosen = policy.ranges[field]
            .iter()
            .position(|&v| v == value)
            .expect("configuration value outside the policy's ranges");
        let probs = softmax(&policy.logits[field]);
        for (i, p) in probs.iter().enumerate() {
            let indicator = if i == chosen { 1.0 } else { 0.0 };
            let delta = policy.learning_rate * advantage * (indicator - p);
            policy.set_logit(field, i, policy.logits[field][i] + delta);
        }
    }
    policy.baseline =
        policy.baseline_decay * policy.baseline + (1.0 - policy.baseline_decay) * reward;
}

/// Incremental search state for one miner. The sim drives this one episode
/// at a time; `run_search` drives it to completion in one call.
#[derive(Debug, Clone)]
pub struct Controller {
    policy: Policy,
    sub: Subspace,
    best_so_far: f64,
    episode: u32,
}

impl Controller {
    pub fn new(sub: Subspace, learning_rate: f64, baseline_decay: f64) -> Self {
        Self {
            policy: Policy::uniform(&sub, learning_rate, baseline_decay),
            sub,
            best_so_far: 0.0,
            episode: 0,
        }
    }

    pub fn subspace(&self) -> &Subspace {
        &self.sub
    }

    pub fn best_so_far(&self) -> f64 {
        self.best_so_far
    }

    pub fn episodes_done(&self) -> u32 {
        self.episode
    }

    /// Used when a backup miner inherits a departed miner's search.
    pub fn resume_from(&mut self, best_so_far: f64) {
        self.best_so_far = self.best_so_far.max(best_so_far);
    }

    /// One episode: sample, gate against the hardware model, query the
    /// reward oracle (the synthetic landscape, or any substitute trainer),
    /// update the policy, record.
    pub fn step(
        &mut self,
        epochs: u32,
        hc: &HardwareConstraints,
        oracle: &dyn RewardOracle,
        rng: &mut SplitMix64,
    ) -> EpisodeRecord {
        let config = sample(&self.policy, &self.sub, rng);
        let reward = gate(&config, hc, oracle.reward(&config, epochs));
        update(&mut self.policy, &config, reward);
        self.best_so_far = self.best_so_far.max(reward);
        self.episode += 1;
        EpisodeRecord {
            episode: self.episode - 1,
            config,
            reward,
            best_so_far: self.best_so_far,
        }
    }
}

/// Run a full search over a subspace: `budget.episodes` records, best-so-far
/// non-decreasing, fully deterministic given the rng seed.
pub fn run_search(
    sub: &Subspace,
    budget: &SearchBudget,
    hc: &HardwareConstraints,
    oracle: &dyn RewardOracle,
    rng: &mut SplitMix64,
) -> Vec<EpisodeRecord> {
    let mut controller = Controller::new(
        sub.clone(),
        DEFAULT_LEARNING_RATE,
        DEFAULT_BASELINE_DECAY,
    );
    (0..budget.episodes)
        .map(|_| controller.step(budget.epochs_per_episode, hc, oracle, rng))
        .collect()
}
