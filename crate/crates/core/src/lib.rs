//! Core library of the NAS mining-pool simulator.
//!
//! A pool manager partitions a discrete hyperparameter space among strong
//! miners, each of which runs a policy-gradient architecture search against
//! a deterministic surrogate reward landscape under FPGA-style hardware
//! constraints. Weak miners refine the pool's best known architecture, the
//! manager monitors high-reward-miner dispersion and promotes backups, and
//! block production follows a three-phase commit/submit/validate interval.

pub mod chain;
pub mod controller;
pub mod hw;
pub mod oracle;
pub mod pool;
pub mod rng;
pub mod sim;
pub mod space;
