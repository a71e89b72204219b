//! Offline re-verification of run artifacts: best-curve monotonicity,
//! commitment audit, share conservation, and chain linkage. The first
//! failing invariant is reported by name.

use naspool_core::chain::{self, Block};
use naspool_core::pool::MinerId;
use naspool_core::space::Configuration;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl Violation {
    fn new(invariant: &'static str, detail: impl Into<String>) -> Self {
        Self {
            invariant,
            detail: detail.into(),
        }
    }
}

pub fn validate_dir(dir: &Path) -> Result<Vec<String>, Violation> {
    let mut passed = Vec::new();
    check_monotonicity(dir)?;
    passed.push("monotonicity: best curves non-decreasing".to_string());
    let blocks = check_chain_linkage(dir)?;
    passed.push(format!("chain linkage: {} block(s) linked and digests verified", blocks));
    check_commitment_audit(dir)?;
    passed.push("commitment audit: every winner committed pre-deadline".to_string());
    check_share_conservation(dir)?;
    passed.push("share conservation: fractions sum to one per block".to_string());
    Ok(passed)
}

fn read(dir: &Path, name: &str, invariant: &'static str) -> Result<String, Violation> {
    std::fs::read_to_string(dir.join(name))
        .map_err(|e| Violation::new(invariant, format!("cannot read {name}: {e}")))
}

fn check_monotonicity(dir: &Path) -> Result<(), Violation> {
    let text = read(dir, "episodes.csv", "monotonicity")?;
    let mut best: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Violation::new(
                "monotonicity",
                format!("episodes.csv line {}: expected 5 columns", i + 1),
            ));
        }
        let key = (cols[0].to_string(), cols[2].to_string());
        let value: f64 = cols[4].parse().map_err(|_| {
            Violation::new("monotonicity", format!("episodes.csv line {}: bad best", i + 1))
        })?;
        if let Some(prev) = best.get(&key) {
            if value < *prev {
                return Err(Violation::new(
                    "monotonicity",
                    format!(
                        "episodes.csv line {}: best for miner {} dips {} -> {}",
                        i + 1,
                        key.1,
                        prev,
                        value
                    ),
                ));
            }
        }
        best.insert(key, value);
    }
    Ok(())
}

fn parse_hex32(text: &str) -> Option<[u8; 32]> {
    if text.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, byte) in out.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&text[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

struct LoggedBlock {
    block: Block,
}

/// Commitment records keyed by (height, miner, digest hex).
type CommitBook = BTreeSet<(u64, u32, String)>;

fn parse_blocks(dir: &Path) -> Result<(Vec<LoggedBlock>, CommitBook), Violation> {
    let text = read(dir, "blocks.log", "chain linkage")?;
    let mut blocks = Vec::new();
    let mut commits = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split(' ').collect();
        match cols.first().copied() {
            Some("C") if cols.len() == 4 => {
                let height: u64 = cols[1].parse().map_err(|_| {
                    Violation::new("commitment audit", format!("blocks.log line {}: bad height", i + 1))
                })?;
                let miner: u32 = cols[2].parse().map_err(|_| {
                    Violation::new("commitment audit", format!("blocks.log line {}: bad miner", i + 1))
                })?;
                commits.insert((height, miner, cols[3].to_string()));
            }
            Some("B") if cols.len() == 10 => {
                let bad = |what: &str| {
                    Violation::new(
                        "chain linkage",
                        format!("blocks.log line {}: bad {what}", i + 1),
                    )
                };
                let height: u64 = cols[1].parse().map_err(|_| bad("height"))?;
                let winner: u32 = cols[3].parse().map_err(|_| bad("winner"))?;
                let values: Vec<u32> = cols[4]
                    .split(',')
                    .map(|v| v.parse::<u32>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("config"))?;
                let claimed: f64 = cols[5].parse().map_err(|_| bad("claim"))?;
                let validated: f64 = cols[6].parse().map_err(|_| bad("validated"))?;
                let commit_digest = parse_hex32(cols[7]).ok_or_else(|| bad("commit digest"))?;
                let prev_digest = parse_hex32(cols[8]).ok_or_else(|| bad("prev digest"))?;
                let header = parse_hex32(cols[9]).ok_or_else(|| bad("header digest"))?;
                blocks.push(LoggedBlock {
                    block: Block {
                        height,
                        task: cols[2].to_string(),
                        winner: MinerId(winner),
                        winning_config: Configuration::new(values),
                        claimed,
                        validated_reward: validated,
                        commit_digest,
                        prev_digest,
                        header_digest: header,
                    },
                });
            }
            Some("P") | Some("N") | None => {}
            Some(other) => {
                return Err(Violation::new(
                    "chain linkage",
                    format!("blocks.log line {}: unknown record {other:?}", i + 1),
                ))
            }
        }
    }
    Ok((blocks, commits))
}

fn check_chain_linkage(dir: &Path) -> Result<usize, Violation> {
    let (blocks, _) = parse_blocks(dir)?;
    let mut prev = [0u8; 32];
    for (i, logged) in blocks.iter().enumerate() {
        let b = &logged.block;
        if b.height != i as u64 + 1 {
            return Err(Violation::new(
                "chain linkage",
                format!("expected height {} but log shows {}", i + 1, b.height),
            ));
        }
        if b.prev_digest != prev {
            return Err(Violation::new(
                "chain linkage",
                format!("block {} prev digest does not match prior header", b.height),
            ));
        }
        if chain::header_digest(b) != b.header_digest {
            return Err(Violation::new(
                "chain linkage",
                format!("block {} header digest does not recompute", b.height),
            ));
        }
        prev = b.header_digest;
    }
    Ok(blocks.len())
}

fn check_commitment_audit(dir: &Path) -> Result<(), Violation> {
    let (blocks, commits) = parse_blocks(dir)?;
    for logged in &blocks {
        let b = &logged.block;
        let recomputed = chain::commitment_digest(&b.winning_config, b.claimed, b.winner);
        if recomputed != b.commit_digest {
            return Err(Violation::new(
                "commitment audit",
                format!("block {}: commitment digest does not recompute", b.height),
            ));
        }
        let key = (b.height, b.winner.0, chain::to_hex(&b.commit_digest));
        if !commits.contains(&key) {
            return Err(Violation::new(
                "commitment audit",
                format!("block {}: no pre-deadline commitment on record", b.height),
            ));
        }
    }
    Ok(())
}

fn check_share_conservation(dir: &Path) -> Result<(), Violation> {
    let text = read(dir, "shares.csv", "share conservation")?;
    let mut per_block: BTreeMap<String, f64> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Violation::new(
                "share conservation",
                format!("shares.csv line {}: expected 4 columns", i + 1),
            ));
        }
        let fraction: f64 = cols[2].parse().map_err(|_| {
            Violation::new(
                "share conservation",
                format!("shares.csv line {}: bad fraction", i + 1),
            )
        })?;
        if fraction < 0.0 {
            return Err(Violation::new(
                "share conservation",
                format!("shares.csv line {}: negative fraction", i + 1),
            ));
        }
        *per_block.entry(cols[0].to_string()).or_insert(0.0) += fraction;
    }
    for (block, total) in per_block {
        if (total - 1.0).abs() > 1e-9 {
            return Err(Violation::new(
                "share conservation",
                format!("block {block}: fractions sum to {total}"),
            ));
        }
    }
    Ok(())
}
