//! Three-phase block-interval consensus: task selection by ranking score,
//! model commitment during training, and validation of submissions in
//! decreasing order of claimed accuracy.
//!
//! A commitment binds `(configuration, claimed reward, miner id)` through a
//! SHA-256 digest taken over a canonical serialization: each configuration
//! value as a big-endian `u32`, the claim as a decimal string rounded to six
//! places, then the miner id as a big-endian `u32`. Submissions lacking a
//! digest accepted during the training phase are discarded before
//! validation. The first submission, in decreasing-claimed order, whose
//! re-evaluated reward reaches its claim wins the block; if none does, the
//! round produces no block.

use crate::pool::MinerId;
use crate::space::Configuration;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("task list is empty")]
    EmptyTaskList,
    #[error("task difficulty and reward must be positive")]
    InvalidTask,
}

/// A NAS task offered to miners, picked by its difficulty/reward ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    /// Aggregate difficulty score (model size, data size, FLOPs proxies).
    pub difficulty: f64,
    pub task_reward: f64,
}

impl Task {
    pub fn new(
        id: impl Into<String>,
        difficulty: f64,
        task_reward: f64,
    ) -> Result<Self, ChainError> {
        if difficulty <= 0.0 || task_reward <= 0.0 {
            return Err(ChainError::InvalidTask);
        }
        Ok(Self {
            id: id.into(),
            difficulty,
            task_reward,
        })
    }

    pub fn ranking_score(&self) -> f64 {
        self.difficulty / self.task_reward
    }
}

/// Order tasks by ascending difficulty/reward ratio (lower is more
/// attractive), ties by task id. The head is the next task to mine.
pub fn rank_tasks(tasks: &[Task]) -> Result<Vec<&Task>, ChainError> {
    if tasks.is_empty() {
        return Err(ChainError::EmptyTaskList);
    }
    let mut ranked: Vec<&Task> = tasks.iter().collect();
    ranked.sort_by(|a, b| {
        a.ranking_score()
            .total_cmp(&b.ranking_score())
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Training,
    Validation,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Init => write!(f, "Init"),
            Phase::Training => write!(f, "Training"),
            Phase::Validation => write!(f, "Validation"),
        }
    }
}

/// Events that move the phase clock. Only the event matching the current
/// phase advances it; the cycle is strict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseEvent {
    /// Init -> Training: the next task has been selected.
    TaskSelected,
    /// Training -> Validation: the episode budget elapsed.
    TrainingBudgetElapsed,
    /// Validation -> Init: a block was confirmed or the round came up empty.
    RoundClosed,
}

/// A stored commitment, stamped with the phase the full node saw it in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment {
    pub digest: [u8; 32],
    pub miner: MinerId,
    pub phase_stamp: Phase,
}

/// A revealed result: the configuration, the claimed reward, and the miner.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub config: Configuration,
    pub claimed: f64,
    pub miner: MinerId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub height: u64,
    pub task: String,
    pub winner: MinerId,
    pub winning_config: Configuration,
    pub claimed: f64,
    pub validated_reward: f64,
    pub commit_digest: [u8; 32],
    pub prev_digest: [u8; 32],
    pub header_digest: [u8; 32],
}

/// Canonical commitment digest over (configuration, claim, miner).
pub fn commitment_digest(config: &Configuration, claimed: f64, miner: MinerId) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for &v in config.values() {
        hasher.update(v.to_be_bytes());
    }
    hasher.update(format!("{claimed:.6}").as_bytes());
    hasher.update(miner.0.to_be_bytes());
    hasher.finalize().into()
}

/// Header digest binding every block field; used for chain linkage and for
/// offline re-verification of a serialized block log.
pub fn header_digest(block: &Block) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(block.height.to_be_bytes());
    hasher.update(block.task.as_bytes());
    hasher.update(block.winner.0.to_be_bytes());
    for &v in block.winning_config.values() {
        hasher.update(v.to_be_bytes());
    }
    hasher.update(format!("{:.6}", block.claimed).as_bytes());
    hasher.update(format!("{:.6}", block.validated_reward).as_bytes());
    hasher.update(block.commit_digest);
    hasher.update(block.prev_digest);
    hasher.finalize().into()
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Single-owner chain state: the phase clock, the commitment book for the
/// open round, and the confirmed blocks.
#[derive(Debug, Clone)]
pub struct Chain {
    phase: Phase,
    tip_digest: [u8; 32],
    blocks: Vec<Block>,
    commitments: Vec<Commitment>,
    accepted_digests: BTreeSet<(MinerId, [u8; 32])>,
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Chain {
    pub fn new() -> Self {
        Self {
            phase: Phase::Init,
            tip_digest: [0u8; 32],
            blocks: Vec::new(),
            commitments: Vec::new(),
            accepted_digests: BTreeSet::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip_digest(&self) -> [u8; 32] {
        self.tip_digest
    }

    pub fn commitments(&self) -> &[Commitment] {
        &self.commitments
    }

    /// Strict phase cycle; an event that does not match the current phase
    /// leaves it unchanged.
    pub fn advance(&mut self, event: PhaseEvent) -> Phase {
        self.phase = match (self.phase, event) {
            (Phase::Init, PhaseEvent::TaskSelected) => Phase::Training,
            (Phase::Training, PhaseEvent::TrainingBudgetElapsed) => Phase::Validation,
            (Phase::Validation, PhaseEvent::RoundClosed) => {
                self.commitments.clear();
                self.accepted_digests.clear();
                Phase::Init
            }
            (phase, _) => phase,
        };
        self.phase
    }

    /// Receive a commitment digest from a miner. Accepted and stored only
    /// during the training phase; a duplicate from the same miner is
    /// idempotent. The returned record carries the node-side phase stamp.
    pub fn submit_commitment(&mut self, miner: MinerId, digest: [u8; 32]) -> (bool, Commitment) {
        let record = Commitment {
            digest,
            miner,
            phase_stamp: self.phase,
        };
        if self.phase != Phase::Training {
            return (false, record);
        }
        if self.accepted_digests.insert((miner, digest)) {
            self.commitments.push(record.clone());
        }
        (true, record)
    }

    fn has_commitment(&self, sub: &Submission) -> bool {
        let digest = commitment_digest(&sub.config, sub.claimed, sub.miner);
        self.accepted_digests.contains(&(sub.miner, digest))
    }

    /// Validate the round: drop uncommitted submissions, sort the rest by
    /// claimed reward descending (ties by miner id ascending), and evaluate
    /// in order until one claim holds up. The evaluator must be the same
    /// gated reward function the miners used.
    pub fn validate_round(
        &mut self,
        task: &str,
        submissions: &[Submission],
        evaluator: &mut dyn FnMut(&Configuration) -> f64,
    ) -> Option<Block> {
        let mut eligible: Vec<&Submission> = submissions
            .iter()
            .filter(|s| self.has_commitment(s))
            .collect();
        eligible.sort_by(|a, b| {
            b.claimed
                .total_cmp(&a.claimed)
                .then_with(|| a.miner.cmp(&b.miner))
        });
        for sub in eligible {
            let validated = evaluator(&sub.config);
            if validated >= sub.claimed {
                let mut block = Block {
                    height: self.height() + 1,
                    task: task.to_string(),
                    winner: sub.miner,
                    winning_config: sub.config.clone(),
                    claimed: sub.claimed,
                    validated_reward: validated,
                    commit_digest: commitment_digest(&sub.config, sub.claimed, sub.miner),
                    prev_digest: self.tip_digest,
                    header_digest: [0u8; 32],
                };
                block.header_digest = header_digest(&block);
                self.tip_digest = block.header_digest;
                self.blocks.push(block.clone());
                return Some(block);
            }
        }
        None
    }
}
