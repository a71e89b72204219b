//! Hyperparameter search spaces and their partition into per-miner subspaces.
//!
//! A [`SearchSpace`] is an ordered list of named discrete ranges. The pool
//! manager splits it by enumerating, for every hyperparameter, all non-empty
//! subsets of its range, then drawing one subset per hyperparameter per miner.
//! Subspaces produced this way may overlap; no de-overlap pass is applied.

use crate::rng::SplitMix64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpaceError {
    #[error("empty range for hyperparameter {0:?}")]
    EmptyRange(String),
    #[error("range of size {size} exceeds subset enumeration cap {cap}")]
    RangeTooLarge { size: usize, cap: usize },
    #[error("range values must be strictly increasing ({0:?})")]
    NotIncreasing(String),
    #[error("duplicate hyperparameter name {0:?}")]
    DuplicateName(String),
    #[error("search space must have at least one hyperparameter")]
    NoHyperparameters,
    #[error("miner count must be at least 1")]
    NoMiners,
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
}

/// Largest range size accepted by subset enumeration (2^k growth).
pub const MAX_RANGE_FOR_SUBSETS: usize = 12;

/// One hyperparameter and its searching range: an ordered set of discrete
/// values the architecture may take for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperparameterSpec {
    name: String,
    range: Vec<u32>,
}

impl HyperparameterSpec {
    pub fn new(name: impl Into<String>, range: Vec<u32>) -> Result<Self, SpaceError> {
        let name = name.into();
        if range.is_empty() {
            return Err(SpaceError::EmptyRange(name));
        }
        if !range.windows(2).all(|w| w[0] < w[1]) {
            return Err(SpaceError::NotIncreasing(name));
        }
        Ok(Self { name, range })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn range(&self) -> &[u32] {
        &self.range
    }
}

/// The full searching space: an ordered list of hyperparameter specs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    specs: Vec<HyperparameterSpec>,
}

impl SearchSpace {
    pub fn new(specs: Vec<HyperparameterSpec>) -> Result<Self, SpaceError> {
        if specs.is_empty() {
            return Err(SpaceError::NoHyperparameters);
        }
        for (i, s) in specs.iter().enumerate() {
            if specs[..i].iter().any(|t| t.name == s.name) {
                return Err(SpaceError::DuplicateName(s.name.clone()));
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[HyperparameterSpec] {
        &self.specs
    }

    pub fn arity(&self) -> usize {
        self.specs.len()
    }

    /// The subspace covering every full range.
    pub fn as_subspace(&self) -> Subspace {
        Subspace {
            ranges: self.specs.iter().map(|s| s.range.clone()).collect(),
        }
    }

    pub fn contains(&self, config: &Configuration) -> Result<bool, SpaceError> {
        self.as_subspace().contains(config)
    }
}

/// One searching range per hyperparameter: the region assigned to a miner.
///
/// Ranges keep the parent ordering. Subset closure against a parent space is
/// checked with [`Subspace::is_within`], not enforced at construction: the
/// published fixture contains two subspace cells whose values do not appear
/// in the full-space row, and those are preserved verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    ranges: Vec<Vec<u32>>,
}

impl Subspace {
    pub fn new(ranges: Vec<Vec<u32>>) -> Result<Self, SpaceError> {
        if ranges.is_empty() {
            return Err(SpaceError::NoHyperparameters);
        }
        for (i, r) in ranges.iter().enumerate() {
            if r.is_empty() {
                return Err(SpaceError::EmptyRange(format!("#{i}")));
            }
            if !r.windows(2).all(|w| w[0] < w[1]) {
                return Err(SpaceError::NotIncreasing(format!("#{i}")));
            }
        }
        Ok(Self { ranges })
    }

    pub fn ranges(&self) -> &[Vec<u32>] {
        &self.ranges
    }

    pub fn arity(&self) -> usize {
        self.ranges.len()
    }

    /// Number of configurations in the subspace (product of range sizes),
    /// saturating at `u64::MAX`.
    pub fn size(&self) -> u64 {
        self.ranges
            .iter()
            .fold(1u64, |acc, r| acc.saturating_mul(r.len() as u64))
    }

    /// True iff every range is an order-preserving subset of the parent's.
    pub fn is_within(&self, parent: &SearchSpace) -> bool {
        self.ranges.len() == parent.arity()
            && self
                .ranges
                .iter()
                .zip(parent.specs())
                .all(|(r, spec)| r.iter().all(|v| spec.range().contains(v)))
    }

    /// True iff every configuration value lies in the matching range.
    pub fn contains(&self, config: &Configuration) -> Result<bool, SpaceError> {
        if config.values().len() != self.ranges.len() {
            return Err(SpaceError::ArityMismatch {
                expected: self.ranges.len(),
                got: config.values().len(),
            });
        }
        Ok(self
            .ranges
            .iter()
            .zip(config.values())
            .all(|(r, v)| r.contains(v)))
    }
}

/// One concrete value per hyperparameter; the unit of search, commitment,
/// and reward evaluation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    values: Vec<u32>,
}

impl Configuration {
    pub fn new(values: Vec<u32>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// All non-empty, order-preserving subsets of a range, enumerated by subset
/// bitmask ascending (bit i selects `range[i]`).
pub fn enumerate_subsets(range: &[u32]) -> Result<Vec<Vec<u32>>, SpaceError> {
    let k = range.len();
    if k == 0 {
        return Err(SpaceError::EmptyRange("<anonymous>".into()));
    }
    if k > MAX_RANGE_FOR_SUBSETS {
        return Err(SpaceError::RangeTooLarge {
            size: k,
            cap: MAX_RANGE_FOR_SUBSETS,
        });
    }
    let total = (1usize << k) - 1;
    let mut subsets = Vec::with_capacity(total);
    for mask in 1..=total {
        let mut subset = Vec::new();
        for (i, &v) in range.iter().enumerate() {
            if mask & (1 << i) != 0 {
                subset.push(v);
            }
        }
        subsets.push(subset);
    }
    Ok(subsets)
}

/// Split a search space into `m` subspaces: for each miner and each
/// hyperparameter, draw one entry uniformly from the table of all non-empty
/// subsets of that hyperparameter's range. Subspaces may overlap.
pub fn partition(
    space: &SearchSpace,
    m: usize,
    rng: &mut SplitMix64,
) -> Result<Vec<Subspace>, SpaceError> {
    if m == 0 {
        return Err(SpaceError::NoMiners);
    }
    let tables: Vec<Vec<Vec<u32>>> = space
        .specs()
        .iter()
        .map(|s| enumerate_subsets(s.range()))
        .collect::<Result<_, _>>()?;
    let mut subspaces = Vec::with_capacity(m);
    for _ in 0..m {
        let ranges = tables
            .iter()
            .map(|table| table[rng.index(table.len())].clone())
            .collect();
        subspaces.push(Subspace { ranges });
    }
    Ok(subspaces)
}

/// Hyperparameter names of the CNN architecture + quantization space, in
/// field order: kernel height/width, number of kernels, stride height/width,
/// pool size, then activation and weight integer/fraction bit counts.
pub const FIXTURE_NAMES: [&str; 10] = [
    "kernel_height",
    "kernel_width",
    "num_kernels",
    "stride_height",
    "stride_width",
    "pool_size",
    "act_num_int_bits",
    "act_num_frac_bits",
    "weight_num_int_bits",
    "weight_num_frac_bits",
];

const FIXTURE_FULL: [&[u32]; 10] = [
    &[1, 3, 5, 7, 9],
    &[1, 3, 5, 7, 9],
    &[4, 8, 12, 24, 36, 64, 128],
    &[1, 2, 3, 4, 5],
    &[1, 2, 3, 4, 5],
    &[1, 2],
    &[0, 1, 2, 3],
    &[0, 1, 2, 3, 4, 5, 6],
    &[0, 1, 2, 3, 4],
    &[0, 1, 2, 3, 4, 5, 6],
];

const FIXTURE_SUBSPACES: [[&[u32]; 10]; 9] = [
    // S1
    [
        &[1, 5, 7],
        &[3, 5, 7],
        &[24, 36, 48, 64],
        &[1, 2, 3],
        &[1, 2, 3],
        &[1, 2],
        &[1, 2, 3],
        &[1, 2, 3, 4, 5],
        &[0, 1, 2, 3, 4],
        &[2, 3, 4, 5],
    ],
    // S2
    [
        &[1, 3, 5, 7],
        &[1, 3, 5, 7],
        &[24, 36, 48, 64],
        &[1, 2, 3],
        &[1, 2, 3],
        &[1, 2],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3, 4, 5, 6],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3, 4, 5, 6],
    ],
    // S3 (stride ranges include 0, preserved verbatim; the hardware model
    // treats a zero stride as a constraint violation, not an error)
    [
        &[1, 3, 5, 7, 9],
        &[1, 3, 5, 7, 9],
        &[4, 8, 12, 24, 36, 64, 128],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3],
        &[1],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3, 4, 5, 6],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3, 4, 5, 6],
    ],
    // S4
    [
        &[1, 3, 5, 7, 9],
        &[1, 3, 5, 7, 9],
        &[4, 8, 12, 24, 36, 64, 128],
        &[1, 2, 3, 4, 5],
        &[1, 2, 3, 4, 5],
        &[1],
        &[2, 3],
        &[4, 5, 6],
        &[2, 3],
        &[4, 5, 6],
    ],
    // S5
    [
        &[1, 3, 5, 7, 9],
        &[1, 3, 5, 7, 9],
        &[4, 8, 12, 24, 36, 64, 128],
        &[1, 2, 3, 4, 5],
        &[1, 2, 3, 4, 5],
        &[1],
        &[0, 1],
        &[1, 2, 3],
        &[0, 1],
        &[1, 2, 3],
    ],
    // S6
    [
        &[1, 3, 5],
        &[1, 3, 5],
        &[4, 8, 12],
        &[1, 2, 3],
        &[1, 2, 3],
        &[1],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3, 4, 5, 6],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3, 4, 5, 6],
    ],
    // S7 (num_kernels 32 is absent from the full-space row; kept verbatim)
    [
        &[5, 7, 9],
        &[5, 7, 9],
        &[32, 64, 128],
        &[3, 4, 5],
        &[3, 4, 5],
        &[1],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3, 4, 5, 6],
        &[0, 1, 2, 3],
        &[0, 1, 2, 3, 4, 5, 6],
    ],
    // S8
    [
        &[5, 7, 9],
        &[5, 7, 9],
        &[32, 64, 128],
        &[3, 4, 5],
        &[3, 4, 5],
        &[1],
        &[2, 3],
        &[4, 5, 6],
        &[2, 3],
        &[4, 5, 6],
    ],
    // S9
    [
        &[1, 3, 5],
        &[1, 3, 5],
        &[24, 36],
        &[1, 2, 3],
        &[1, 2, 3],
        &[1],
        &[2, 3],
        &[5, 6],
        &[2, 3],
        &[5, 6],
    ],
];

/// The published 10-hyperparameter full space and the nine subspaces S1..S9,
/// exactly as tabulated.
pub fn load_fixture_subspaces() -> (SearchSpace, Vec<Subspace>) {
    let specs = FIXTURE_NAMES
        .iter()
        .zip(FIXTURE_FULL.iter())
        .map(|(name, range)| HyperparameterSpec::new(*name, range.to_vec()).expect("fixture"))
        .collect();
    let space = SearchSpace::new(specs).expect("fixture");
    let subs = FIXTURE_SUBSPACES
        .iter()
        .map(|rows| Subspace::new(rows.iter().map(|r| r.to_vec()).collect()).expect("fixture"))
        .collect();
    (space, subs)
}

/// Render spaces as a plain-text table: a header row naming each
/// hyperparameter, then one row per space, each cell holding that range's
/// comma-separated values in double quotes.
pub fn to_table(names: &[&str], rows: &[(String, &Subspace)]) -> String {
    let mut out = String::from("space_id");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (id, sub) in rows {
        out.push_str(id);
        for range in sub.ranges() {
            let cell: Vec<String> = range.iter().map(|v| v.to_string()).collect();
            out.push_str(",\"");
            out.push_str(&cell.join(", "));
            out.push('"');
        }
        out.push('\n');
    }
    out
}

/// Parse the table format written by [`to_table`].
pub fn from_table(text: &str) -> Result<Vec<(String, Subspace)>, SpaceError> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = match line.split_once(',') {
            Some(parts) => parts,
            None => continue,
        };
        let mut ranges = Vec::new();
        for cell in rest.split("\",\"") {
            let cell = cell.trim_matches(|c| c == '"' || c == ',');
            let values: Vec<u32> = cell
                .split(',')
                .filter_map(|v| v.trim().parse().ok())
                .collect();
            ranges.push(values);
        }
        rows.push((id.to_string(), Subspace::new(ranges)?));
    }
    Ok(rows)
}
