//! The placement structure on a single linear order.
//!
//! Every super bin owns `k + 1` virtual bins: one in each level range and one
//! in the overflow range past `2^64`. Balls are hashed to one position, which
//! is also their priority (smaller is higher). The placement is always the
//! canonical one: insert balls in priority order, each into the first virtual
//! bin at or after its position whose super bin is not full.
//!
//! Each virtual bin keeps a pass count, the number of balls that start at or
//! before it and land after it. Pass counts are what make deletions and bin
//! insertions local.

mod check;
mod rebuild;
mod snapshot;
mod update;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::capacity::{plan_for, CapacityMode, CapacityPlan};
use crate::error::{Error, Result};
use crate::hashing::{HashFamily, HashMode};
use crate::levels::LevelScheme;

pub use check::Violation;
pub use rebuild::rebuild_from_scratch;
pub use snapshot::{BallSnapshot, BinSnapshot, Snapshot};
pub use update::SearchResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub hash: HashMode,
    pub scheme: LevelScheme,
    pub capacity: CapacityMode,
}

impl SystemConfig {
    pub fn new(hash: HashMode, scheme: LevelScheme, capacity: CapacityMode) -> Self {
        SystemConfig {
            hash,
            scheme,
            capacity,
        }
    }

    pub(crate) fn hash_family(&self) -> Result<HashFamily> {
        HashFamily::new(self.hash, self.scheme.universe()?)
    }
}

/// Priority key of a ball: position first, id breaks ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BallKey {
    pub position: u64,
    pub id: u64,
}

/// One entry of the ordered index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VirtualBin {
    pub position: u128,
    pub owner: u64,
    pub level: u32,
    pub pass_count: u32,
}

impl VirtualBin {
    fn key(&self) -> (u128, u64) {
        (self.position, self.owner)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SuperBin {
    pub(crate) capacity: u64,
    /// Balls in priority order with the level of the virtual bin they landed in.
    pub(crate) balls: BTreeMap<BallKey, u32>,
    /// Position of the virtual bin at each level `0..=k`.
    pub(crate) positions: Vec<u128>,
    /// Levels whose virtual bin has a positive pass count.
    pub(crate) passed_levels: BTreeSet<u32>,
    pub(crate) selection: u64,
}

impl SuperBin {
    fn load(&self) -> u64 {
        self.balls.len() as u64
    }

    fn is_full(&self) -> bool {
        self.load() >= self.capacity
    }
}

/// Deliberate defects for exercising the invariant checker.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Pass-count increments during insertion add 2 instead of 1.
    PassIncrementOffByOne,
}

/// Full state of a bounded-load consistent hashing system.
///
/// Mutating operations need `&mut self`; `search_ball` and the checks are
/// read-only.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub(crate) config: SystemConfig,
    pub(crate) hashes: Arc<HashFamily>,
    /// Virtual bins sorted by `(position, owner)`.
    pub(crate) index: Vec<VirtualBin>,
    pub(crate) bins: BTreeMap<u64, SuperBin>,
    /// Ball id to (owning bin, position).
    pub(crate) balls: HashMap<u64, (u64, u64)>,
    /// `(selection hash, bin id)`, sorted; rank order for dynamic capacities.
    pub(crate) selection: Vec<(u64, u64)>,
    pub(crate) fault: Option<Fault>,
}

impl SystemState {
    /// An empty system over `initial_bins`.
    pub fn new(config: SystemConfig, initial_bins: &[u64]) -> Result<Self> {
        rebuild_from_scratch(config, &[], initial_bins)
    }

    pub(crate) fn empty(config: SystemConfig) -> Result<Self> {
        Ok(SystemState {
            config,
            hashes: Arc::new(config.hash_family()?),
            index: Vec::new(),
            bins: BTreeMap::new(),
            balls: HashMap::new(),
            selection: Vec::new(),
            fault: None,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn hashes(&self) -> &HashFamily {
        &self.hashes
    }

    /// Number of balls.
    pub fn n(&self) -> u64 {
        self.balls.len() as u64
    }

    /// Number of super bins.
    pub fn m(&self) -> u64 {
        self.bins.len() as u64
    }

    /// Number of normal levels `k`.
    pub fn levels(&self) -> u32 {
        self.config.scheme.levels()
    }

    pub fn ball_key(&self, ball_id: u64) -> BallKey {
        BallKey {
            position: self.hashes.ball(ball_id),
            id: ball_id,
        }
    }

    pub fn contains_ball(&self, ball_id: u64) -> bool {
        self.balls.contains_key(&ball_id)
    }

    pub fn contains_bin(&self, bin_id: u64) -> bool {
        self.bins.contains_key(&bin_id)
    }

    /// Bin currently holding `ball_id`.
    pub fn bin_of(&self, ball_id: u64) -> Option<u64> {
        self.balls.get(&ball_id).map(|&(bin, _)| bin)
    }

    pub fn bin_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.bins.keys().copied()
    }

    /// Ball ids in no particular order.
    pub fn ball_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.balls.keys().copied()
    }

    pub fn load(&self, bin_id: u64) -> Option<u64> {
        self.bins.get(&bin_id).map(SuperBin::load)
    }

    pub fn capacity(&self, bin_id: u64) -> Option<u64> {
        self.bins.get(&bin_id).map(|b| b.capacity)
    }

    pub fn total_capacity(&self) -> u64 {
        self.bins.values().map(|b| b.capacity).sum()
    }

    pub fn max_capacity(&self) -> u64 {
        self.bins.values().map(|b| b.capacity).max().unwrap_or(0)
    }

    /// Balls of a bin in priority order, with their landing level.
    pub fn balls_in(&self, bin_id: u64) -> Vec<(BallKey, u32)> {
        self.bins
            .get(&bin_id)
            .map(|b| b.balls.iter().map(|(k, l)| (*k, *l)).collect())
            .unwrap_or_default()
    }

    pub fn pass_count(&self, bin_id: u64, level: u32) -> Option<u32> {
        let bin = self.bins.get(&bin_id)?;
        let pos = *bin.positions.get(level as usize)?;
        Some(self.index[self.locate_key(pos, bin_id)].pass_count)
    }

    /// The ordered index of virtual bins.
    pub fn virtual_bins(&self) -> &[VirtualBin] {
        &self.index
    }

    /// Fraction of bins holding fewer balls than their capacity.
    pub fn nonfull_fraction(&self) -> f64 {
        if self.bins.is_empty() {
            return 0.0;
        }
        let nonfull = self.bins.values().filter(|b| !b.is_full()).count();
        nonfull as f64 / self.bins.len() as f64
    }

    /// Dynamic-capacity plan for `(n, m)`, or `None` under fixed capacities.
    pub fn plan(&self, n: u64, m: u64) -> Result<Option<CapacityPlan>> {
        match self.config.capacity {
            CapacityMode::Fixed { .. } => Ok(None),
            CapacityMode::Dynamic { balance } => plan_for(balance, n, m).map(Some),
        }
    }

    /// Selection rank of a bin among the current bins.
    pub fn selection_rank(&self, bin_id: u64) -> Option<u64> {
        let bin = self.bins.get(&bin_id)?;
        self.selection
            .binary_search(&(bin.selection, bin_id))
            .ok()
            .map(|r| r as u64)
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: Option<Fault>) {
        self.fault = fault;
    }

    /// Overwrites a pass count without touching anything else.
    #[doc(hidden)]
    pub fn corrupt_pass_count(&mut self, bin_id: u64, level: u32, value: u32) {
        let pos = self.bins[&bin_id].positions[level as usize];
        let i = self.locate_key(pos, bin_id);
        self.index[i].pass_count = value;
    }

    /// Overwrites a capacity without rebalancing.
    #[doc(hidden)]
    pub fn corrupt_capacity(&mut self, bin_id: u64, capacity: u64) {
        if let Some(b) = self.bins.get_mut(&bin_id) {
            b.capacity = capacity;
        }
    }

    /// Drops a ball from the ball table only.
    #[doc(hidden)]
    pub fn corrupt_forget_ball(&mut self, ball_id: u64) {
        self.balls.remove(&ball_id);
    }

    /// Index of the first virtual bin at or after a ball position.
    pub(crate) fn start_index(&self, position: u64) -> usize {
        let p = position as u128;
        self.index.partition_point(|v| v.position < p)
    }

    pub(crate) fn locate_key(&self, position: u128, owner: u64) -> usize {
        self.index
            .binary_search_by(|v| v.key().cmp(&(position, owner)))
            .expect("virtual bin missing from index")
    }

    pub(crate) fn locate(&self, owner: u64, level: u32) -> usize {
        let pos = self.bins[&owner].positions[level as usize];
        self.locate_key(pos, owner)
    }

    pub(crate) fn check_bin_absent(&self, bin_id: u64) -> Result<()> {
        if self.bins.contains_key(&bin_id) {
            Err(Error::DuplicateBin(bin_id))
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests;
