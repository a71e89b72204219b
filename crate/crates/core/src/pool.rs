//! Pool manager: subspace assignment, result collection, weak-miner
//! exploitation, reliability monitoring, backup promotion, and
//! contribution-proportional reward splitting.
//!
//! Strong miners (strength 1.0) explore assigned subspaces; weak miners
//! exploit the best architecture confirmed so far by mutating one
//! hyperparameter at a time over the full space. The manager watches the
//! dispersion of high-reward miners' best curves and, when it rises after
//! the warm-up window, promotes a backup to take over a departed explorer's
//! subspace and search state.

use crate::controller::EpisodeRecord;
use crate::rng::SplitMix64;
use crate::space::{partition, Configuration, SearchSpace, SpaceError, Subspace};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("no strong miners to assign subspaces to")]
    NoStrongMiners,
    #[error("no miners in the pool")]
    NoMiners,
    #[error("unknown miner {0}")]
    UnknownMiner(MinerId),
    #[error("fewer than two high-reward miners to monitor")]
    TooFewMiners,
    #[error("no backup candidate available for {0}")]
    NoBackupAvailable(MinerId),
    #[error("no contribution recorded, nothing to distribute")]
    NoContribution,
    #[error("fee rate {0} outside [0, 1)")]
    InvalidFeeRate(f64),
    #[error("miner strength {0} outside (0, 1]")]
    InvalidStrength(f64),
    #[error("miner {0} holds no subspace assignment")]
    NotAnExplorer(MinerId),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MinerId(pub u32);

impl std::fmt::Display for MinerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Searches an assigned subspace with its own controller.
    Explorer,
    /// Refines the pool's best known configuration over the full space.
    Exploiter,
    /// Idle standby, promoted when an explorer departs.
    Backup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinerProfile {
    pub id: MinerId,
    /// Fraction of the strong-miner episode budget this miner completes;
    /// 1.0 is a strong miner, 0.1 the canonical weak miner.
    pub strength: f64,
    pub role: Role,
    pub online: bool,
}

impl MinerProfile {
    pub fn new(id: MinerId, strength: f64, role: Role) -> Result<Self, PoolError> {
        if !(strength > 0.0 && strength <= 1.0) {
            return Err(PoolError::InvalidStrength(strength));
        }
        Ok(Self {
            id,
            strength,
            role,
            online: true,
        })
    }

    pub fn is_strong(&self) -> bool {
        self.strength == 1.0
    }
}

/// How subspace slots are staffed. Both modes split the space into one
/// subspace per strong miner; they differ in who searches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollaborationMode {
    /// Subspaces go to strong miners only; weak miners exploit broadcasts.
    Collaborative,
    /// Strength-blind staffing: weak miners take the first subspace slots
    /// at their fractional budget and the displaced strong miners idle.
    /// This is the misallocation baseline the collaboration strategy
    /// replaces.
    Naive,
}

/// The pool's best result and who found it.
#[derive(Debug, Clone, PartialEq)]
pub struct BestRecord {
    pub config: Configuration,
    pub reward: f64,
    pub finder: MinerId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlertKind {
    PrepareBackup,
}

impl std::fmt::Display for AlertKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlertKind::PrepareBackup => write!(f, "PrepareBackup"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub episode: u64,
    pub kind: AlertKind,
    /// The departed explorer this alert is about, when there is one.
    pub miner: Option<MinerId>,
}

/// Per-recipient fractions of one block reward. The manager's fee comes off
/// the top; the remainder is proportional to episodes contributed.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardShare {
    pub manager: f64,
    pub miners: BTreeMap<MinerId, f64>,
}

impl RewardShare {
    pub fn total(&self) -> f64 {
        self.manager + self.miners.values().sum::<f64>()
    }

    /// Token amounts for a concrete block reward.
    pub fn amounts(&self, block_reward: f64) -> Vec<(Option<MinerId>, f64)> {
        let mut out = vec![(None, self.manager * block_reward)];
        out.extend(
            self.miners
                .iter()
                .map(|(id, f)| (Some(*id), f * block_reward)),
        );
        out
    }
}

/// The manager's view of miners, assignments, bests, and dispersion.
#[derive(Debug, Clone, Default)]
pub struct PoolState {
    miners: BTreeMap<MinerId, MinerProfile>,
    assignments: BTreeMap<MinerId, Subspace>,
    best_global: Option<BestRecord>,
    per_miner_best: BTreeMap<MinerId, Vec<f64>>,
    contribution: BTreeMap<MinerId, u64>,
    stddev_series: Vec<(u64, f64)>,
    /// Departed explorers whose subspace has not been handed to a backup yet.
    pending_backfill: BTreeSet<MinerId>,
    /// Pending departures that already got their one PrepareBackup alert.
    alerted: BTreeSet<MinerId>,
}

impl PoolState {
    /// Register miners without assigning subspaces (degraded operation when
    /// no explorer is available).
    pub fn from_profiles(miners: &[MinerProfile]) -> Self {
        let mut state = Self::default();
        for p in miners {
            state.miners.insert(p.id, p.clone());
        }
        state
    }

    pub fn miners(&self) -> &BTreeMap<MinerId, MinerProfile> {
        &self.miners
    }

    pub fn assignments(&self) -> &BTreeMap<MinerId, Subspace> {
        &self.assignments
    }

    pub fn best_global(&self) -> Option<&BestRecord> {
        self.best_global.as_ref()
    }

    pub fn per_miner_best(&self) -> &BTreeMap<MinerId, Vec<f64>> {
        &self.per_miner_best
    }

    pub fn current_best(&self, miner: MinerId) -> Option<f64> {
        self.per_miner_best.get(&miner).and_then(|s| s.last()).copied()
    }

    pub fn contribution(&self) -> &BTreeMap<MinerId, u64> {
        &self.contribution
    }

    pub fn stddev_series(&self) -> &[(u64, f64)] {
        &self.stddev_series
    }

    pub fn pending_backfill(&self) -> &BTreeSet<MinerId> {
        &self.pending_backfill
    }

    /// Mark a miner offline. A departed explorer keeps its assignment until
    /// a backup takes over; its best series freezes at the last value.
    pub fn mark_departed(&mut self, miner: MinerId) -> Result<(), PoolError> {
        let profile = self
            .miners
            .get_mut(&miner)
            .ok_or(PoolError::UnknownMiner(miner))?;
        profile.online = false;
        if self.assignments.contains_key(&miner) {
            self.pending_backfill.insert(miner);
        }
        Ok(())
    }

    /// Mark a known miner online again. History and contribution survive the
    /// outage. A rejoining miner whose subspace was handed off comes back as
    /// a backup candidate.
    pub fn mark_rejoined(&mut self, miner: MinerId) -> Result<(), PoolError> {
        let profile = self
            .miners
            .get_mut(&miner)
            .ok_or(PoolError::UnknownMiner(miner))?;
        profile.online = true;
        if self.pending_backfill.remove(&miner) {
            // it returned before any backup inherited the subspace, so it is
            // simply an explorer again
            self.alerted.remove(&miner);
            return Ok(());
        }
        if !self.assignments.contains_key(&miner) && profile.role == Role::Explorer {
            profile.role = Role::Backup;
        }
        Ok(())
    }

    /// Keep an offline miner on the books (no assignment, no role change)
    /// so a later rejoin is recognized.
    pub fn register_offline(&mut self, mut profile: MinerProfile) {
        profile.online = false;
        self.miners.entry(profile.id).or_insert(profile);
    }

    /// Register a miner that joins mid-run. Strong joiners wait as backups;
    /// weak joiners start exploiting.
    pub fn register_joiner(&mut self, mut profile: MinerProfile) {
        profile.role = if profile.is_strong() {
            Role::Backup
        } else {
            Role::Exploiter
        };
        profile.online = true;
        self.miners.insert(profile.id, profile);
    }

    /// Record one finished episode from a miner. Returns the new best when
    /// this record improves on the pool's best (the broadcast trigger).
    /// Ties do not replace: the first miner to reach a reward keeps the
    /// credit.
    pub fn collect(
        &mut self,
        miner: MinerId,
        record: &EpisodeRecord,
    ) -> Result<Option<BestRecord>, PoolError> {
        if !self.miners.contains_key(&miner) {
            return Err(PoolError::UnknownMiner(miner));
        }
        let series = self.per_miner_best.entry(miner).or_default();
        let next = series.last().copied().unwrap_or(0.0).max(record.reward);
        series.push(next);
        *self.contribution.entry(miner).or_insert(0) += 1;

        let improved = match &self.best_global {
            Some(best) => record.reward > best.reward,
            None => record.reward > 0.0,
        };
        if improved {
            let best = BestRecord {
                config: record.config.clone(),
                reward: record.reward,
                finder: miner,
            };
            self.best_global = Some(best.clone());
            return Ok(Some(best));
        }
        Ok(None)
    }

    /// Dispersion check over the high-reward cohort: online miners whose
    /// current best is at or above the (lower) median of online bests, plus
    /// any departed explorers awaiting backfill (their frozen series is
    /// exactly what the manager is worried about). Appends to the std-dev
    /// series and raises `PrepareBackup` once the dispersion exceeds the
    /// threshold after the warm-up episode.
    pub fn monitor(
        &mut self,
        episode: u64,
        threshold: f64,
        warmup: u64,
    ) -> Result<Vec<Alert>, PoolError> {
        let mut live: Vec<f64> = Vec::new();
        let mut frozen: Vec<f64> = Vec::new();
        for (id, series) in &self.per_miner_best {
            let Some(profile) = self.miners.get(id) else { continue };
            let Some(&last) = series.last() else { continue };
            if profile.online {
                live.push(last);
            } else if self.pending_backfill.contains(id) {
                frozen.push(last);
            }
        }
        let median_basis = if live.is_empty() { &frozen } else { &live };
        if median_basis.is_empty() {
            return Err(PoolError::TooFewMiners);
        }
        let median = lower_median(median_basis);
        let mut cohort: Vec<f64> = live.iter().copied().filter(|b| *b >= median).collect();
        cohort.extend(frozen.iter().copied());
        if cohort.len() < 2 {
            return Err(PoolError::TooFewMiners);
        }
        let prev_sd = self.stddev_series.last().map(|(_, s)| *s);
        let sd = population_stddev(&cohort);
        self.stddev_series.push((episode, sd));

        let mut alerts = Vec::new();
        if episode >= warmup && sd > threshold {
            // rising-edge advisory when nothing is pending
            if self.pending_backfill.is_empty() && prev_sd.is_none_or(|p| p <= threshold) {
                alerts.push(Alert {
                    episode,
                    kind: AlertKind::PrepareBackup,
                    miner: None,
                });
            }
            // one targeted alert per departed explorer
            for &miner in &self.pending_backfill {
                if self.alerted.insert(miner) {
                    alerts.push(Alert {
                        episode,
                        kind: AlertKind::PrepareBackup,
                        miner: Some(miner),
                    });
                }
            }
        }
        Ok(alerts)
    }

    /// Hand a departed explorer's subspace and best-so-far to the lowest
    /// current-best online candidate (ties to the smaller id). Returns the
    /// chosen backup.
    pub fn promote_backup(
        &mut self,
        departed: MinerId,
        candidates: &[MinerId],
    ) -> Result<MinerId, PoolError> {
        let sub = self
            .assignments
            .get(&departed)
            .cloned()
            .ok_or(PoolError::NotAnExplorer(departed))?;
        let chosen = candidates
            .iter()
            .filter(|id| {
                self.miners
                    .get(id)
                    .map(|p| p.online && !self.assignments.contains_key(id))
                    .unwrap_or(false)
            })
            .map(|id| (self.current_best(*id).unwrap_or(0.0), *id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
            .ok_or(PoolError::NoBackupAvailable(departed))?;

        self.assignments.remove(&departed);
        self.pending_backfill.remove(&departed);
        self.alerted.remove(&departed);
        self.assignments.insert(chosen, sub);
        if let Some(p) = self.miners.get_mut(&chosen) {
            p.role = Role::Explorer;
        }
        if let Some(p) = self.miners.get_mut(&departed) {
            p.role = Role::Backup;
        }
        // the backup resumes from the departed miner's best
        let inherited = self.current_best(departed).unwrap_or(0.0);
        let series = self.per_miner_best.entry(chosen).or_default();
        let resumed = series.last().copied().unwrap_or(0.0).max(inherited);
        series.push(resumed);
        Ok(chosen)
    }

    /// Split one block reward: the manager keeps `fee_rate`, the rest is
    /// proportional to episodes completed.
    pub fn distribute(&self, fee_rate: f64) -> Result<RewardShare, PoolError> {
        proportional_shares(&self.contribution, fee_rate)
    }
}

/// Fee off the top, remainder proportional to contribution counts.
pub fn proportional_shares(
    contribution: &BTreeMap<MinerId, u64>,
    fee_rate: f64,
) -> Result<RewardShare, PoolError> {
    if !(0.0..1.0).contains(&fee_rate) {
        return Err(PoolError::InvalidFeeRate(fee_rate));
    }
    let total: u64 = contribution.values().sum();
    if total == 0 {
        return Err(PoolError::NoContribution);
    }
    let pot = 1.0 - fee_rate;
    let miners = contribution
        .iter()
        .map(|(id, c)| (*id, pot * (*c as f64 / total as f64)))
        .collect();
    Ok(RewardShare {
        manager: fee_rate,
        miners,
    })
}

/// Lower median: the (n-1)/2-th order statistic, so the cutoff is always an
/// observed value.
fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Population standard deviation (divisor n, not n-1).
pub fn population_stddev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Partition the space into one subspace per strong miner and build the
/// initial pool state. Collaborative staffing sends every subspace to a
/// strong miner and turns weak miners into exploiters. Naive staffing lets
/// the weak miners occupy the first slots (so their fractional budget is
/// wasted on them) while the displaced strong miners sit idle.
pub fn assign(
    space: &SearchSpace,
    miners: &[MinerProfile],
    mode: CollaborationMode,
    rng: &mut SplitMix64,
) -> Result<PoolState, PoolError> {
    if miners.is_empty() {
        return Err(PoolError::NoMiners);
    }
    let mut sorted: Vec<MinerProfile> = miners.to_vec();
    sorted.sort_by_key(|p| p.id);

    let strong: Vec<MinerId> = sorted
        .iter()
        .filter(|p| p.role != Role::Backup && p.is_strong())
        .map(|p| p.id)
        .collect();
    let weak: Vec<MinerId> = sorted
        .iter()
        .filter(|p| p.role != Role::Backup && !p.is_strong())
        .map(|p| p.id)
        .collect();
    if strong.is_empty() {
        return Err(PoolError::NoStrongMiners);
    }

    let subspaces = partition(space, strong.len(), rng)?;
    staff(sorted, strong, weak, subspaces, mode)
}

/// Staffing without a partition: every explorer slot holds the full space.
/// This is the individual-miner baseline used for comparisons.
pub fn assign_full_space(
    space: &SearchSpace,
    miners: &[MinerProfile],
    mode: CollaborationMode,
) -> Result<PoolState, PoolError> {
    if miners.is_empty() {
        return Err(PoolError::NoMiners);
    }
    let mut sorted: Vec<MinerProfile> = miners.to_vec();
    sorted.sort_by_key(|p| p.id);
    let strong: Vec<MinerId> = sorted
        .iter()
        .filter(|p| p.role != Role::Backup && p.is_strong())
        .map(|p| p.id)
        .collect();
    let weak: Vec<MinerId> = sorted
        .iter()
        .filter(|p| p.role != Role::Backup && !p.is_strong())
        .map(|p| p.id)
        .collect();
    if strong.is_empty() {
        return Err(PoolError::NoStrongMiners);
    }
    let subspaces = vec![space.as_subspace(); strong.len()];
    staff(sorted, strong, weak, subspaces, mode)
}

fn staff(
    sorted: Vec<MinerProfile>,
    strong: Vec<MinerId>,
    weak: Vec<MinerId>,
    subspaces: Vec<Subspace>,
    mode: CollaborationMode,
) -> Result<PoolState, PoolError> {
    let (explorer_ids, idle_ids): (Vec<MinerId>, Vec<MinerId>) = match mode {
        CollaborationMode::Collaborative => (strong, Vec::new()),
        CollaborationMode::Naive => {
            let stolen = weak.len().min(strong.len());
            let mut ids: Vec<MinerId> = weak.iter().copied().take(stolen).collect();
            ids.extend(strong.iter().copied().skip(stolen));
            // the displaced strong miners have no slot and stand by
            let idle = strong.iter().copied().take(stolen).collect();
            (ids, idle)
        }
    };

    let mut state = PoolState::default();
    for mut profile in sorted {
        if profile.role != Role::Backup {
            profile.role = if explorer_ids.contains(&profile.id) {
                Role::Explorer
            } else if idle_ids.contains(&profile.id) {
                Role::Backup
            } else if mode == CollaborationMode::Naive {
                // naive scheduling has no exploitation step
                Role::Backup
            } else {
                Role::Exploiter
            };
        }
        state.miners.insert(profile.id, profile);
    }
    for (id, sub) in explorer_ids.into_iter().zip(subspaces) {
        state.assignments.insert(id, sub);
    }
    Ok(state)
}

/// One exploitation move: mutate exactly one hyperparameter of `best` to an
/// adjacent value in the full range. Boundary values move inward; if no
/// hyperparameter has a neighbor the input comes back unchanged.
pub fn exploit_step(
    best: &Configuration,
    full_space: &SearchSpace,
    rng: &mut SplitMix64,
) -> Configuration {
    let specs = full_space.specs();
    let mutable: Vec<usize> = (0..specs.len())
        .filter(|&i| specs[i].range().len() > 1)
        .collect();
    if mutable.is_empty() {
        return best.clone();
    }
    let coord = mutable[rng.index(mutable.len())];
    let range = specs[coord].range();
    let value = best.values()[coord];
    let idx = nearest_index(range, value);
    let new_idx = if idx == 0 {
        1
    } else if idx == range.len() - 1 {
        range.len() - 2
    } else if rng.index(2) == 0 {
        idx - 1
    } else {
        idx + 1
    };
    let mut values = best.values().to_vec();
    values[coord] = range[new_idx];
    Configuration::new(values)
}

/// Index of `value` in the sorted range, or of the closest value when it is
/// absent (the pool best may carry fixture values missing from the full
/// range). Ties go to the lower index.
fn nearest_index(range: &[u32], value: u32) -> usize {
    match range.binary_search(&value) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i == range.len() => range.len() - 1,
        Err(i) => {
            let below = value - range[i - 1];
            let above = range[i] - value;
            if above < below {
                i
            } else {
                i - 1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{load_fixture_subspaces, HyperparameterSpec};

    fn strong(id: u32) -> MinerProfile {
        MinerProfile::new(MinerId(id), 1.0, Role::Explorer).unwrap()
    }

    fn weak(id: u32) -> MinerProfile {
        MinerProfile::new(MinerId(id), 0.1, Role::Exploiter).unwrap()
    }

    fn record(reward: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode: 0,
            config: Configuration::new(vec![1, 1, 4, 1, 1, 1, 0, 1, 0, 1]),
            reward,
            best_so_far: reward,
        }
    }

    #[test]
    fn assign_nine_strong() {
        let (space, _) = load_fixture_subspaces();
        let miners: Vec<MinerProfile> = (0..9).map(strong).collect();
        let state = assign(
            &space,
            &miners,
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(1),
        )
        .unwrap();
        assert_eq!(state.assignments().len(), 9);
        for p in state.miners().values() {
            assert_eq!(p.role, Role::Explorer);
        }
        for sub in state.assignments().values() {
            assert!(sub.is_within(&space));
        }
    }

    #[test]
    fn assign_one_strong_three_weak() {
        let (space, _) = load_fixture_subspaces();
        let mut miners = vec![strong(0)];
        miners.extend((1..4).map(weak));
        let state = assign(
            &space,
            &miners,
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(2),
        )
        .unwrap();
        assert_eq!(state.assignments().len(), 1);
        assert!(state.assignments().contains_key(&MinerId(0)));
        let exploiters = state
            .miners()
            .values()
            .filter(|p| p.role == Role::Exploiter)
            .count();
        assert_eq!(exploiters, 3);
    }

    #[test]
    fn assign_without_strong_miners_fails() {
        let (space, _) = load_fixture_subspaces();
        let miners = vec![weak(0), weak(1)];
        assert_eq!(
            assign(
                &space,
                &miners,
                CollaborationMode::Collaborative,
                &mut SplitMix64::new(3)
            )
            .unwrap_err(),
            PoolError::NoStrongMiners
        );
    }

    #[test]
    fn naive_mode_hands_the_same_slots_to_weak_miners() {
        let (space, _) = load_fixture_subspaces();
        let miners = vec![strong(0), strong(1), strong(2), weak(7), weak(8)];
        let collab = assign(
            &space,
            &miners,
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(9),
        )
        .unwrap();
        let naive = assign(
            &space,
            &miners,
            CollaborationMode::Naive,
            &mut SplitMix64::new(9),
        )
        .unwrap();
        // same three subspace slots in both modes
        assert_eq!(collab.assignments().len(), 3);
        assert_eq!(naive.assignments().len(), 3);
        // weak miners steal the first slots; the displaced strong miners idle
        assert_eq!(
            naive.assignments()[&MinerId(7)],
            collab.assignments()[&MinerId(0)]
        );
        assert_eq!(
            naive.assignments()[&MinerId(8)],
            collab.assignments()[&MinerId(1)]
        );
        assert_eq!(
            naive.assignments()[&MinerId(2)],
            collab.assignments()[&MinerId(2)]
        );
        assert_eq!(naive.miners()[&MinerId(0)].role, Role::Backup);
        assert_eq!(naive.miners()[&MinerId(1)].role, Role::Backup);
        assert_eq!(naive.miners()[&MinerId(2)].role, Role::Explorer);
    }

    #[test]
    fn collect_updates_best_and_contribution() {
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &[strong(0), strong(1)],
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        assert!(state.collect(MinerId(0), &record(0.5)).unwrap().is_some());
        assert!(state.collect(MinerId(1), &record(0.3)).unwrap().is_none());
        assert_eq!(state.best_global().unwrap().finder, MinerId(0));
        assert_eq!(state.contribution()[&MinerId(0)], 1);
        assert_eq!(state.contribution()[&MinerId(1)], 1);
        // improvement broadcasts
        let improved = state.collect(MinerId(1), &record(0.7)).unwrap();
        assert_eq!(improved.unwrap().finder, MinerId(1));
    }

    #[test]
    fn equal_reward_keeps_first_writer() {
        let (space, _) = load_fixture_subspaces();
        for order in [[0u32, 1], [1, 0]] {
            let state = &mut assign(
                &space,
                &[strong(0), strong(1)],
                CollaborationMode::Collaborative,
                &mut SplitMix64::new(4),
            )
            .unwrap();
            state.collect(MinerId(order[0]), &record(0.6)).unwrap();
            state.collect(MinerId(order[1]), &record(0.6)).unwrap();
            assert_eq!(
                state.best_global().unwrap().finder,
                MinerId(order[0]),
                "first received wins"
            );
        }
    }

    #[test]
    fn collect_rejects_unknown_miner() {
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &[strong(0)],
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        assert_eq!(
            state.collect(MinerId(99), &record(0.1)).unwrap_err(),
            PoolError::UnknownMiner(MinerId(99))
        );
    }

    #[test]
    fn monitor_identical_bests_zero_stddev_no_alert() {
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &(0..4).map(strong).collect::<Vec<_>>(),
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        for id in 0..4 {
            state.collect(MinerId(id), &record(0.8)).unwrap();
        }
        let alerts = state.monitor(800, 0.05, 500).unwrap();
        assert!(alerts.is_empty());
        assert_eq!(state.stddev_series().last().unwrap().1, 0.0);
    }

    #[test]
    fn monitor_frozen_departed_series_alerts() {
        // Three live miners at 0.8 and one departed explorer frozen at 0.4:
        // population std-dev of {0.8, 0.8, 0.8, 0.4} is sqrt(0.03) = 0.1732.
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &(0..4).map(strong).collect::<Vec<_>>(),
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        state.collect(MinerId(3), &record(0.4)).unwrap();
        state.mark_departed(MinerId(3)).unwrap();
        for id in 0..3 {
            state.collect(MinerId(id), &record(0.8)).unwrap();
        }
        let alerts = state.monitor(800, 0.05, 500).unwrap();
        let (_, sd) = *state.stddev_series().last().unwrap();
        assert!((sd - 0.03f64.sqrt()).abs() < 1e-12);
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].miner, Some(MinerId(3)));
        assert_eq!(alerts[0].kind, AlertKind::PrepareBackup);
    }

    #[test]
    fn monitor_before_warmup_records_but_stays_quiet() {
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &(0..4).map(strong).collect::<Vec<_>>(),
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        state.collect(MinerId(3), &record(0.4)).unwrap();
        state.mark_departed(MinerId(3)).unwrap();
        for id in 0..3 {
            state.collect(MinerId(id), &record(0.8)).unwrap();
        }
        let alerts = state.monitor(300, 0.05, 500).unwrap();
        assert!(alerts.is_empty());
        assert_eq!(state.stddev_series().len(), 1);
    }

    #[test]
    fn monitor_needs_two_miners() {
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &[strong(0)],
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        state.collect(MinerId(0), &record(0.5)).unwrap();
        assert_eq!(
            state.monitor(600, 0.05, 500).unwrap_err(),
            PoolError::TooFewMiners
        );
    }

    #[test]
    fn monitor_stddev_matches_independent_formula() {
        // independent two-pass computation over randomized inputs
        let mut rng = SplitMix64::new(77);
        for _ in 0..200 {
            let n = 2 + rng.index(8);
            let values: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let mean: f64 = values.iter().sum::<f64>() / n as f64;
            let expected =
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!((population_stddev(&values) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn promote_backup_transfers_subspace_and_best() {
        let (space, _) = load_fixture_subspaces();
        let mut miners: Vec<MinerProfile> = (0..3).map(strong).collect();
        miners.push(MinerProfile::new(MinerId(9), 1.0, Role::Backup).unwrap());
        let state = &mut assign(
            &space,
            &miners,
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        assert_eq!(state.assignments().len(), 3, "backup gets no subspace");
        state.collect(MinerId(0), &record(0.9)).unwrap();
        state.mark_departed(MinerId(0)).unwrap();
        let sub_before = state.assignments()[&MinerId(0)].clone();
        let chosen = state.promote_backup(MinerId(0), &[MinerId(9)]).unwrap();
        assert_eq!(chosen, MinerId(9));
        assert_eq!(state.assignments()[&MinerId(9)], sub_before);
        assert!(!state.assignments().contains_key(&MinerId(0)));
        assert_eq!(state.current_best(MinerId(9)), Some(0.9));
        assert_eq!(state.miners()[&MinerId(9)].role, Role::Explorer);
        assert!(state.pending_backfill().is_empty());
    }

    #[test]
    fn promote_backup_prefers_lowest_best_then_smaller_id() {
        let (space, _) = load_fixture_subspaces();
        let miners = vec![strong(0), weak(5), weak(3)];
        let state = &mut assign(
            &space,
            &miners,
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        state.collect(MinerId(0), &record(0.9)).unwrap();
        // both candidates tie at no recorded best
        state.mark_departed(MinerId(0)).unwrap();
        let chosen = state
            .promote_backup(MinerId(0), &[MinerId(5), MinerId(3)])
            .unwrap();
        assert_eq!(chosen, MinerId(3), "tie broken by smaller id");
    }

    #[test]
    fn promote_backup_without_candidates_fails() {
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &[strong(0)],
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        state.mark_departed(MinerId(0)).unwrap();
        assert_eq!(
            state.promote_backup(MinerId(0), &[]).unwrap_err(),
            PoolError::NoBackupAvailable(MinerId(0))
        );
    }

    #[test]
    fn distribute_single_miner() {
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &[strong(0)],
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        state.collect(MinerId(0), &record(0.5)).unwrap();
        let share = state.distribute(0.1).unwrap();
        assert!((share.manager - 0.1).abs() < 1e-15);
        assert!((share.miners[&MinerId(0)] - 0.9).abs() < 1e-15);
        assert!((share.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distribute_proportional_to_episodes() {
        // contributions 2000:2000:200 (two strong, one weak at 1/10)
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &[strong(0), strong(1), weak(2)],
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        for _ in 0..2000 {
            state.collect(MinerId(0), &record(0.1)).unwrap();
            state.collect(MinerId(1), &record(0.1)).unwrap();
        }
        for _ in 0..200 {
            state.collect(MinerId(2), &record(0.1)).unwrap();
        }
        let share = state.distribute(0.0).unwrap();
        let s0 = share.miners[&MinerId(0)];
        let s2 = share.miners[&MinerId(2)];
        assert!((s0 / s2 - 10.0).abs() < 1e-9, "10:1 strong-to-weak ratio");
        assert!((share.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distribute_with_no_contribution_fails() {
        let (space, _) = load_fixture_subspaces();
        let state = assign(
            &space,
            &[strong(0)],
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        assert_eq!(state.distribute(0.1).unwrap_err(), PoolError::NoContribution);
    }

    #[test]
    fn exploit_step_mutates_one_coordinate_to_adjacent() {
        let (space, _) = load_fixture_subspaces();
        let best = Configuration::new(vec![5, 5, 24, 3, 3, 1, 2, 3, 2, 3]);
        let mut rng = SplitMix64::new(10);
        for _ in 0..500 {
            let mutated = exploit_step(&best, &space, &mut rng);
            let diffs: Vec<usize> = (0..10)
                .filter(|&i| mutated.values()[i] != best.values()[i])
                .collect();
            assert_eq!(diffs.len(), 1, "exactly one coordinate changes");
            let coord = diffs[0];
            let range = space.specs()[coord].range();
            let old = range
                .iter()
                .position(|&v| v == best.values()[coord])
                .unwrap();
            let new = range
                .iter()
                .position(|&v| v == mutated.values()[coord])
                .unwrap();
            assert_eq!(old.abs_diff(new), 1, "adjacent index");
            if coord == 0 {
                // kernel height 5 in {1,3,5,7,9} moves to 3 or 7
                assert!(matches!(mutated.values()[0], 3 | 7));
            }
        }
    }

    #[test]
    fn exploit_step_moves_inward_from_boundaries() {
        let space = SearchSpace::new(vec![
            HyperparameterSpec::new("a", vec![1, 2, 3]).unwrap(),
            HyperparameterSpec::new("b", vec![5, 6, 7]).unwrap(),
        ])
        .unwrap();
        let best = Configuration::new(vec![1, 7]); // both at boundaries
        let mut rng = SplitMix64::new(11);
        for _ in 0..100 {
            let mutated = exploit_step(&best, &space, &mut rng);
            assert!(
                mutated == Configuration::new(vec![2, 7])
                    || mutated == Configuration::new(vec![1, 6])
            );
        }
    }

    #[test]
    fn exploit_step_with_no_neighbors_returns_input() {
        let space = SearchSpace::new(vec![
            HyperparameterSpec::new("a", vec![4]).unwrap(),
            HyperparameterSpec::new("b", vec![9]).unwrap(),
        ])
        .unwrap();
        let best = Configuration::new(vec![4, 9]);
        assert_eq!(exploit_step(&best, &space, &mut SplitMix64::new(1)), best);
    }

    #[test]
    fn exploit_step_handles_values_outside_the_range() {
        // fixture subspaces carry 48 which is absent from the full
        // num_kernels range; the nearest value anchors the move
        let (space, _) = load_fixture_subspaces();
        let best = Configuration::new(vec![5, 5, 48, 3, 3, 1, 2, 3, 2, 3]);
        let mut rng = SplitMix64::new(12);
        for _ in 0..200 {
            let mutated = exploit_step(&best, &space, &mut rng);
            if mutated.values()[2] != 48 {
                // 48 is nearer 36 than 64, so the anchor is 36 and the
                // adjacent values are 24 and 64
                assert!(matches!(mutated.values()[2], 24 | 64));
            }
        }
    }

    #[test]
    fn full_space_assignment_gives_every_explorer_the_whole_space() {
        let (space, _) = load_fixture_subspaces();
        let miners = vec![strong(0), strong(1), weak(2)];
        let state =
            assign_full_space(&space, &miners, CollaborationMode::Collaborative).unwrap();
        assert_eq!(state.assignments().len(), 2);
        for sub in state.assignments().values() {
            assert_eq!(sub, &space.as_subspace());
        }
        assert_eq!(state.miners()[&MinerId(2)].role, Role::Exploiter);
    }

    #[test]
    fn weak_miners_hold_no_subspace_under_collaborative_scheduling() {
        let (space, _) = load_fixture_subspaces();
        let miners = vec![strong(0), strong(1), weak(5), weak(6), weak(7)];
        let state = assign(
            &space,
            &miners,
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(8),
        )
        .unwrap();
        for (id, profile) in state.miners() {
            if !profile.is_strong() {
                assert!(!state.assignments().contains_key(id));
                assert_eq!(profile.role, Role::Exploiter);
            }
        }
    }

    #[test]
    fn rejoin_restores_online_and_keeps_history() {
        let (space, _) = load_fixture_subspaces();
        let state = &mut assign(
            &space,
            &[strong(0), strong(1)],
            CollaborationMode::Collaborative,
            &mut SplitMix64::new(4),
        )
        .unwrap();
        state.collect(MinerId(1), &record(0.6)).unwrap();
        state.mark_departed(MinerId(1)).unwrap();
        assert!(state.pending_backfill().contains(&MinerId(1)));
        state.mark_rejoined(MinerId(1)).unwrap();
        assert!(state.miners()[&MinerId(1)].online);
        assert!(state.pending_backfill().is_empty());
        assert_eq!(state.current_best(MinerId(1)), Some(0.6));
        assert_eq!(state.contribution()[&MinerId(1)], 1);
    }
}
