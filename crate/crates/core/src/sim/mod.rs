//! Deterministic discrete-event harness.
//!
//! One queue ordered by `(time, sequence)` drives everything: miner episode
//! completions, best-result broadcasts, commitment deadlines, validation,
//! scripted departures and joins. Episode computations for one tick may run
//! on parallel workers, but results are applied in sequence order, so the
//! multi-worker mode produces byte-identical artifacts to the
//! single-threaded one.
//!
//! Time layout per block interval: tick 0 is Init (task selection,
//! partition, assignment), ticks `1..=episodes` are the training phase (one
//! episode per tick for a strong miner; a miner of strength `s` completes
//! `floor(s * episodes)` episodes on an evenly spread schedule), tick
//! `episodes + 1` is the commitment deadline, and tick `episodes + 2` the
//! validation round.

pub mod config;

pub use config::{AssignmentMode, Scenario, SimError, WorkerMode};

use crate::chain::{self, Chain, PhaseEvent, Submission};
use crate::controller::{Controller, EpisodeRecord};
use crate::oracle::{gated_reward, LandscapeParams};
use crate::pool::{self, BestRecord, MinerId, MinerProfile, PoolError, PoolState, Role};
use crate::rng::{mix_words, SplitMix64};
use crate::space::Configuration;
use rayon::prelude::*;
use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;

/// One scheduled occurrence. Events are totally ordered by
/// `(time, seq)`; sequence numbers are unique and assigned at scheduling
/// time.
#[derive(Debug, Clone)]
pub struct Event {
    pub time: u64,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub enum EventKind {
    /// A miner finishes one episode of its current role.
    EpisodeDone { miner: MinerId, block: u32, episode: u32 },
    /// A pool-best improvement reaches the exploiters.
    BestBroadcast { best: BestRecord },
    /// Commitment deadline: the pool commits its best to the full nodes.
    Commit { block: u32 },
    /// Validation round: the pool submits and the round closes.
    Submit { block: u32 },
    /// Phase bookkeeping: block initialization or a per-episode monitor tick.
    PhaseTick { mark: TickMark },
    MinerDeparture { miner: MinerId },
    MinerJoin { miner: MinerId, strength: f64 },
}

#[derive(Debug, Clone, Copy)]
pub enum TickMark {
    Init { block: u32 },
    Monitor { block: u32, episode: u32 },
}

struct QueuedEvent(Event);

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.0.time == other.0.time && self.0.seq == other.0.seq
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.0.time, self.0.seq).cmp(&(other.0.time, other.0.seq))
    }
}

/// Per-miner mutable state owned by the harness.
#[derive(Debug)]
struct MinerRuntime {
    id: MinerId,
    strength: f64,
    configured_role: Role,
    online: bool,
    /// Stream for the miner's own decisions (exploitation moves, cold-start
    /// sampling).
    rng: SplitMix64,
    controller: Option<Controller>,
    /// Stream of the subspace search. Seeded from the subspace content, so
    /// whoever holds a slot replays the same search, and a backup promotion
    /// continues the stream where the departed miner left it.
    search_rng: Option<SplitMix64>,
    exploit_best: f64,
}

/// Everything a run produces, as in-memory artifact bodies plus a summary.
/// Writing to a directory yields the fixed file set.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub episodes_csv: String,
    pub stddev_csv: String,
    pub blocks_log: String,
    pub shares_csv: String,
    pub alerts_log: String,
    pub summary: RunSummary,
}

impl RunArtifacts {
    pub fn write_to_dir(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("episodes.csv"), &self.episodes_csv)?;
        std::fs::write(dir.join("stddev.csv"), &self.stddev_csv)?;
        std::fs::write(dir.join("blocks.log"), &self.blocks_log)?;
        std::fs::write(dir.join("shares.csv"), &self.shares_csv)?;
        std::fs::write(dir.join("alerts.log"), &self.alerts_log)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    /// Best result over the whole run (across blocks).
    pub final_best: Option<BestRecord>,
    pub blocks: Vec<chain::Block>,
    pub empty_rounds: u32,
    /// Reward split per confirmed block.
    pub shares: Vec<(u32, pool::RewardShare)>,
    /// Episodes completed per miner over the whole run.
    pub episode_totals: BTreeMap<MinerId, u64>,
}

/// Convenience entry point: build and run in one call.
pub fn run_scenario(scenario: &Scenario) -> Result<RunArtifacts, SimError> {
    Simulation::new(scenario.clone())?.run()
}

pub struct Simulation {
    scenario: Scenario,
    params: LandscapeParams,
    chain: Chain,
    pool: PoolState,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    next_seq: u64,
    now: u64,
    runtimes: Vec<MinerRuntime>,
    index: BTreeMap<MinerId, usize>,
    manager_rng: SplitMix64,
    miner_seed_base: u64,
    slot_seed_base: u64,
    /// Latest broadcast that has reached the exploiters.
    delivered_best: Option<BestRecord>,
    pending_submission: Option<Submission>,
    // artifact accumulators
    episodes_csv: String,
    stddev_csv: String,
    blocks_log: String,
    shares_csv: String,
    alerts_log: String,
    summary: RunSummary,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        let mut root = SplitMix64::new(scenario.master_seed);
        let manager_rng = root.split();
        let landscape_seed = root.next_u64();
        let miner_seed_base = root.next_u64();
        let slot_seed_base = root.next_u64();
        let params = LandscapeParams::new(
            landscape_seed,
            scenario.optimum_count,
            scenario.noise,
            &scenario.space,
        )
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;

        let mut runtimes = Vec::with_capacity(scenario.miners.len());
        let mut index = BTreeMap::new();
        for profile in &scenario.miners {
            index.insert(profile.id, runtimes.len());
            runtimes.push(MinerRuntime {
                id: profile.id,
                strength: profile.strength,
                configured_role: profile.role,
                online: true,
                rng: SplitMix64::new(mix_words(&[miner_seed_base, profile.id.0 as u64])),
                controller: None,
                search_rng: None,
                exploit_best: 0.0,
            });
        }

        let mut sim = Self {
            params,
            chain: Chain::new(),
            pool: PoolState::default(),
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
            runtimes,
            index,
            manager_rng,
            miner_seed_base,
            slot_seed_base,
            delivered_best: None,
            pending_submission: None,
            episodes_csv: String::from("block,episode,miner,reward,best\n"),
            stddev_csv: String::from("block,episode,stddev\n"),
            blocks_log: String::new(),
            shares_csv: String::from("block,recipient,fraction,amount\n"),
            alerts_log: String::new(),
            summary: RunSummary::default(),
            scenario,
        };

        for (tick, miner) in sim.scenario.departures.clone() {
            sim.inject_departure(tick, miner)?;
        }
        for (tick, miner, strength) in sim.scenario.joins.clone() {
            sim.inject_join(tick, miner, strength)?;
        }
        Ok(sim)
    }

    fn push(&mut self, time: u64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(QueuedEvent(Event { time, seq, kind })));
    }

    /// Schedule a miner to go offline. The tick must not be in the past and
    /// the miner must exist.
    pub fn inject_departure(&mut self, tick: u64, miner: MinerId) -> Result<(), SimError> {
        if tick < self.now {
            return Err(SimError::InvalidScenario(format!(
                "departure tick {tick} is in the past (now {})",
                self.now
            )));
        }
        if !self.index.contains_key(&miner) {
            return Err(SimError::UnknownMiner(miner));
        }
        self.push(tick, EventKind::MinerDeparture { miner });
        Ok(())
    }

    /// Schedule a rejoin of a known miner or the arrival of a new one.
    pub fn inject_join(&mut self, tick: u64, miner: MinerId, strength: f64) -> Result<(), SimError> {
        if tick < self.now {
            return Err(SimError::InvalidScenario(format!(
                "join tick {tick} is in the past (now {})",
                self.now
            )));
        }
        self.push(tick, EventKind::MinerJoin { miner, strength });
        Ok(())
    }

    /// Run every scheduled block interval to completion and collect the
    /// artifacts.
    pub fn run(mut self) -> Result<RunArtifacts, SimError> {
        for block in 0..self.scenario.blocks {
            let start = block as u64 * self.scenario.block_ticks();
            self.push(start, EventKind::PhaseTick {
                mark: TickMark::Init { block },
            });
        }
        while let Some(Reverse(QueuedEvent(event))) = self.queue.pop() {
            self.now = event.time;
            match event.kind {
                EventKind::EpisodeDone { miner, block, episode } => {
                    // batch the consecutive same-tick episode events
                    let mut batch = vec![(miner, block, episode)];
                    while let Some(Reverse(QueuedEvent(next))) = self.queue.peek() {
                        if next.time != event.time
                            || !matches!(next.kind, EventKind::EpisodeDone { .. })
                        {
                            break;
                        }
                        let Some(Reverse(QueuedEvent(next))) = self.queue.pop() else {
                            break;
                        };
                        if let EventKind::EpisodeDone { miner, block, episode } = next.kind {
                            batch.push((miner, block, episode));
                        }
                    }
                    self.process_episode_batch(&batch);
                }
                EventKind::BestBroadcast { best } => {
                    self.delivered_best = Some(best);
                }
                EventKind::Commit { block } => self.process_commit(block),
                EventKind::Submit { block } => self.process_submit(block)?,
                EventKind::PhaseTick { mark } => match mark {
                    TickMark::Init { block } => self.process_init(block)?,
                    TickMark::Monitor { block, episode } => self.process_monitor(block, episode),
                },
                EventKind::MinerDeparture { miner } => {
                    if let Some(&idx) = self.index.get(&miner) {
                        self.runtimes[idx].online = false;
                    }
                    let _ = self.pool.mark_departed(miner);
                }
                EventKind::MinerJoin { miner, strength } => self.process_join(miner, strength),
            }
        }
        Ok(RunArtifacts {
            episodes_csv: self.episodes_csv,
            stddev_csv: self.stddev_csv,
            blocks_log: self.blocks_log,
            shares_csv: self.shares_csv,
            alerts_log: self.alerts_log,
            summary: self.summary,
        })
    }

    fn profiles(&self) -> Vec<MinerProfile> {
        self.runtimes
            .iter()
            .map(|rt| MinerProfile {
                id: rt.id,
                strength: rt.strength,
                role: rt.configured_role,
                online: rt.online,
            })
            .collect()
    }

    fn process_init(&mut self, block: u32) -> Result<(), SimError> {
        let task = chain::rank_tasks(&self.scenario.tasks)
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?[0]
            .id
            .clone();
        let profiles = self.profiles();
        let online_profiles: Vec<MinerProfile> =
            profiles.iter().filter(|p| p.online).cloned().collect();
        let assigned = match self.scenario.assignment {
            AssignmentMode::Partition => pool::assign(
                &self.scenario.space,
                &online_profiles,
                self.scenario.collaboration,
                &mut self.manager_rng,
            ),
            AssignmentMode::FullSpace => pool::assign_full_space(
                &self.scenario.space,
                &online_profiles,
                self.scenario.collaboration,
            ),
        };
        self.pool = match assigned {
            Ok(state) => state,
            // with no explorer available the pool idles through the block
            Err(PoolError::NoStrongMiners) | Err(PoolError::NoMiners) => {
                PoolState::from_profiles(&online_profiles)
            }
            Err(e) => return Err(SimError::InvalidScenario(e.to_string())),
        };
        // offline miners stay registered so a later rejoin is recognized
        for p in profiles.iter().filter(|p| !p.online) {
            let mut offline = p.clone();
            offline.role = Role::Backup;
            self.pool.register_offline(offline);
        }

        self.delivered_best = None;
        self.pending_submission = None;
        let assignments = self.pool.assignments().clone();
        for rt in &mut self.runtimes {
            let sub = assignments.get(&rt.id);
            rt.controller = sub.map(|sub| {
                Controller::new(
                    sub.clone(),
                    self.scenario.learning_rate,
                    self.scenario.baseline_decay,
                )
            });
            rt.search_rng = sub.map(|sub| {
                SplitMix64::new(subspace_stream_seed(self.slot_seed_base, block, sub))
            });
            rt.exploit_best = 0.0;
        }

        let start = block as u64 * self.scenario.block_ticks();
        let episodes = self.scenario.episodes as u64;
        // per-tick episode events in runtime order, then the monitor tick
        let schedules: Vec<(u64, u64)> = self
            .runtimes
            .iter()
            .map(|rt| ((rt.strength * episodes as f64).floor() as u64, episodes))
            .collect();
        for t in 1..=episodes {
            for (i, rt) in self.runtimes.iter().enumerate() {
                let (budget, total) = schedules[i];
                // evenly spread schedule: act when the cumulative quota rises
                if (t * budget) / total > ((t - 1) * budget) / total {
                    let miner = rt.id;
                    let seq = self.next_seq;
                    self.next_seq += 1;
                    self.queue.push(Reverse(QueuedEvent(Event {
                        time: start + t,
                        seq,
                        kind: EventKind::EpisodeDone {
                            miner,
                            block,
                            episode: t as u32,
                        },
                    })));
                }
            }
            self.push(start + t, EventKind::PhaseTick {
                mark: TickMark::Monitor {
                    block,
                    episode: t as u32,
                },
            });
        }
        self.push(start + episodes + 1, EventKind::Commit { block });
        self.push(start + episodes + 2, EventKind::Submit { block });

        self.chain.advance(PhaseEvent::TaskSelected);
        self.blocks_log
            .push_str(&format!("P {} Training {}\n", start, task));
        Ok(())
    }

    fn process_episode_batch(&mut self, batch: &[(MinerId, u32, u32)]) {
        let jobs: Vec<(usize, u32, u32)> = batch
            .iter()
            .filter_map(|(miner, block, episode)| {
                self.index.get(miner).map(|&idx| (idx, *block, *episode))
            })
            .collect();
        let mut job_for: Vec<Option<(u32, u32)>> = vec![None; self.runtimes.len()];
        for (idx, block, episode) in &jobs {
            job_for[*idx] = Some((*block, *episode));
        }

        let pool = &self.pool;
        let params = &self.params;
        let space = &self.scenario.space;
        let delivered = &self.delivered_best;
        let hc = self.scenario.constraints;
        let epochs = self.scenario.epochs;

        let compute = |(rt, job): (&mut MinerRuntime, Option<(u32, u32)>)| -> Option<EpisodeRecord> {
            let (_, episode) = job?;
            if !rt.online {
                return None;
            }
            let role = pool.miners().get(&rt.id)?.role;
            match role {
                Role::Explorer => match (&mut rt.controller, &mut rt.search_rng) {
                    (Some(c), Some(rng)) => Some(c.step(epochs, &hc, params, rng)),
                    _ => None,
                },
                Role::Exploiter => {
                    let config = match delivered {
                        Some(best) => pool::exploit_step(&best.config, space, &mut rt.rng),
                        None => uniform_config(space, &mut rt.rng),
                    };
                    let reward = gated_reward(&config, params, &hc, epochs);
                    rt.exploit_best = rt.exploit_best.max(reward);
                    Some(EpisodeRecord {
                        episode,
                        config,
                        reward,
                        best_so_far: rt.exploit_best,
                    })
                }
                Role::Backup => None,
            }
        };

        let outcomes: Vec<Option<EpisodeRecord>> = match self.scenario.workers {
            WorkerMode::Single => self
                .runtimes
                .iter_mut()
                .zip(job_for.iter().copied())
                .map(compute)
                .collect(),
            WorkerMode::Multi => self
                .runtimes
                .par_iter_mut()
                .zip(job_for.par_iter().copied())
                .map(compute)
                .collect(),
        };

        for (idx, block, episode) in jobs {
            let Some(record) = &outcomes[idx] else { continue };
            let miner = self.runtimes[idx].id;
            let improved = match self.pool.collect(miner, record) {
                Ok(improved) => improved,
                Err(_) => continue,
            };
            *self.summary.episode_totals.entry(miner).or_insert(0) += 1;
            let best_now = self.pool.current_best(miner).unwrap_or(0.0);
            self.episodes_csv.push_str(&format!(
                "{},{},{},{},{}\n",
                block, episode, miner, record.reward, best_now
            ));
            if let Some(best) = improved {
                let delivery = self.now + self.scenario.latency_ticks;
                self.push(delivery, EventKind::BestBroadcast { best });
            }
        }
    }

    fn process_monitor(&mut self, block: u32, episode: u32) {
        let alerts = match self.pool.monitor(
            episode as u64,
            self.scenario.monitor_threshold,
            self.scenario.monitor_warmup,
        ) {
            Ok(alerts) => alerts,
            Err(_) => return, // too few miners to measure
        };
        let (_, sd) = *self.pool.stddev_series().last().expect("just recorded");
        self.stddev_csv
            .push_str(&format!("{},{},{}\n", block, episode, sd));
        for alert in alerts {
            let miner = alert
                .miner
                .map(|m| m.to_string())
                .unwrap_or_else(|| "-".into());
            self.alerts_log
                .push_str(&format!("{},{},{},{}\n", block, episode, alert.kind, miner));
            if let Some(departed) = alert.miner {
                self.try_promote(block, episode, departed);
            }
        }
    }

    fn try_promote(&mut self, block: u32, episode: u32, departed: MinerId) {
        let candidates: Vec<MinerId> = self
            .pool
            .miners()
            .values()
            .filter(|p| p.online && !self.pool.assignments().contains_key(&p.id))
            .map(|p| p.id)
            .collect();
        let Ok(backup) = self.pool.promote_backup(departed, &candidates) else {
            return; // degraded: keep searching without the subspace
        };
        // the backup inherits the departed miner's controller (policy state
        // and best-so-far) together with the slot's search stream
        let taken = self.index.get(&departed).map(|&i| {
            let rt = &mut self.runtimes[i];
            (rt.controller.take(), rt.search_rng.take())
        });
        if let (Some(&bi), Some((controller, search_rng))) = (self.index.get(&backup), taken) {
            self.runtimes[bi].controller = controller;
            self.runtimes[bi].search_rng = search_rng;
        }
        self.alerts_log
            .push_str(&format!("{},{},BackupPromoted,{}\n", block, episode, backup));
    }

    fn process_commit(&mut self, _block: u32) {
        if let Some(best) = self.pool.best_global().cloned() {
            let digest = chain::commitment_digest(&best.config, best.reward, best.finder);
            let (accepted, _) = self.chain.submit_commitment(best.finder, digest);
            if accepted {
                self.blocks_log.push_str(&format!(
                    "C {} {} {}\n",
                    self.chain.height() + 1,
                    best.finder,
                    chain::to_hex(&digest)
                ));
                self.pending_submission = Some(Submission {
                    config: best.config,
                    claimed: best.reward,
                    miner: best.finder,
                });
            }
        }
        self.chain.advance(PhaseEvent::TrainingBudgetElapsed);
        self.blocks_log
            .push_str(&format!("P {} Validation\n", self.now));
    }

    fn process_submit(&mut self, block: u32) -> Result<(), SimError> {
        let task = chain::rank_tasks(&self.scenario.tasks)
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?[0]
            .id
            .clone();
        let submissions: Vec<Submission> = self.pending_submission.take().into_iter().collect();
        let params = &self.params;
        let hc = self.scenario.constraints;
        let epochs = self.scenario.epochs;
        let mut evaluator = |c: &Configuration| gated_reward(c, params, &hc, epochs);
        let outcome = self
            .chain
            .validate_round(&task, &submissions, &mut evaluator);
        match outcome {
            Some(b) => {
                self.blocks_log.push_str(&format!(
                    "B {} {} {} {} {} {} {} {} {}\n",
                    b.height,
                    b.task,
                    b.winner,
                    b.winning_config,
                    b.claimed,
                    b.validated_reward,
                    chain::to_hex(&b.commit_digest),
                    chain::to_hex(&b.prev_digest),
                    chain::to_hex(&b.header_digest)
                ));
                match self.pool.distribute(self.scenario.fee_rate) {
                    Ok(share) => {
                        for (recipient, fraction) in std::iter::once(("manager".to_string(), share.manager))
                            .chain(share.miners.iter().map(|(id, f)| (id.to_string(), *f)))
                        {
                            self.shares_csv.push_str(&format!(
                                "{},{},{},{}\n",
                                block,
                                recipient,
                                fraction,
                                fraction * self.scenario.block_reward
                            ));
                        }
                        self.summary.shares.push((block, share));
                    }
                    Err(PoolError::NoContribution) => {}
                    Err(e) => return Err(SimError::InvalidScenario(e.to_string())),
                }
                self.summary.blocks.push(b);
            }
            None => {
                self.blocks_log.push_str(&format!("N {} {}\n", block, task));
                self.summary.empty_rounds += 1;
            }
        }
        if let Some(best) = self.pool.best_global() {
            let better = match &self.summary.final_best {
                Some(current) => best.reward > current.reward,
                None => true,
            };
            if better {
                self.summary.final_best = Some(best.clone());
            }
        }
        self.chain.advance(PhaseEvent::RoundClosed);
        self.blocks_log.push_str(&format!("P {} Init\n", self.now));
        Ok(())
    }

    fn process_join(&mut self, miner: MinerId, strength: f64) {
        if let Some(&idx) = self.index.get(&miner) {
            self.runtimes[idx].online = true;
            let _ = self.pool.mark_rejoined(miner);
            return;
        }
        // a brand-new miner: it participates from the next block interval
        let role = if strength == 1.0 { Role::Backup } else { Role::Exploiter };
        self.index.insert(miner, self.runtimes.len());
        self.runtimes.push(MinerRuntime {
            id: miner,
            strength,
            configured_role: role,
            online: true,
            rng: SplitMix64::new(mix_words(&[self.miner_seed_base, miner.0 as u64])),
            controller: None,
            search_rng: None,
            exploit_best: 0.0,
        });
        if let Ok(profile) = MinerProfile::new(miner, strength, role) {
            self.pool.register_joiner(profile);
        }
    }
}

/// Seed of a subspace slot's search stream, derived from the subspace
/// content: the same slot replays identically regardless of who holds it.
fn subspace_stream_seed(base: u64, block: u32, sub: &crate::space::Subspace) -> u64 {
    let mut words = vec![base, block as u64];
    for range in sub.ranges() {
        words.push(range.len() as u64);
        words.extend(range.iter().map(|&v| v as u64 + 1));
    }
    mix_words(&words)
}

fn uniform_config(space: &crate::space::SearchSpace, rng: &mut SplitMix64) -> Configuration {
    let values = space
        .specs()
        .iter()
        .map(|s| s.range()[rng.index(s.range().len())])
        .collect();
    Configuration::new(values)
}
