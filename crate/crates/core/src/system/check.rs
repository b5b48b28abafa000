use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::capacity::CapacityMode;

use super::SystemState;

/// One broken structural invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    #[error("index holds {actual} virtual bins, expected {expected}")]
    IndexSize { expected: usize, actual: usize },
    #[error("index out of order at entry {at}")]
    IndexOrder { at: usize },
    #[error("virtual bin of {bin:#x} at level {level} is misplaced")]
    VirtualBinPosition { bin: u64, level: u32 },
    #[error("bin {bin:#x} holds {load} balls over capacity {capacity}")]
    Overload { bin: u64, load: u64, capacity: u64 },
    #[error("ball {ball:#x} disagrees with the ball table")]
    BallTable { ball: u64 },
    #[error("ball table has {table} entries but bins hold {stored}")]
    BallCount { table: u64, stored: u64 },
    #[error("ball {ball:#x} landed before its own position")]
    LandedBeforeStart { ball: u64 },
    #[error("bin {bin:#x} has capacity {actual}, plan says {expected}")]
    Capacity {
        bin: u64,
        expected: u64,
        actual: u64,
    },
    #[error("total capacity {capacity} below {balls} balls")]
    CapacityTotal { balls: u64, capacity: u64 },
    #[error("pass count of {bin:#x} level {level} is {actual}, expected {expected}")]
    PassCount {
        bin: u64,
        level: u32,
        expected: u64,
        actual: u32,
    },
    #[error("passed-level set of {bin:#x} is stale")]
    PassedLevels { bin: u64 },
    #[error("selection order is inconsistent with the bin table")]
    Selection,
}

impl SystemState {
    /// Read-only audit of the structural invariants. Pass counts are
    /// recounted from the placement itself: each ball passes every virtual
    /// bin from its start up to, not including, where it landed.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let k = self.levels();
        let expected = (k as usize + 1) * self.bins.len();
        if self.index.len() != expected {
            out.push(Violation::IndexSize {
                expected,
                actual: self.index.len(),
            });
        }
        for (at, w) in self.index.windows(2).enumerate() {
            if w[0].key() >= w[1].key() {
                out.push(Violation::IndexOrder { at });
            }
        }
        for (&id, bin) in &self.bins {
            for l in 0..=k {
                let hashed = self.hashes.virtual_bin(id, l).ok();
                let stored = bin.positions.get(l as usize).copied();
                let indexed = stored.and_then(|p| {
                    self.index
                        .binary_search_by(|v| v.key().cmp(&(p, id)))
                        .ok()
                        .filter(|&i| self.index[i].level == l)
                });
                if hashed.is_none() || hashed != stored || indexed.is_none() {
                    out.push(Violation::VirtualBinPosition { bin: id, level: l });
                }
            }
            if bin.load() > bin.capacity {
                out.push(Violation::Overload {
                    bin: id,
                    load: bin.load(),
                    capacity: bin.capacity,
                });
            }
        }
        if !out.is_empty() {
            // The remaining checks navigate the index and need it intact.
            return out;
        }

        let mut stored = 0;
        let mut diff = vec![0i64; self.index.len() + 1];
        for (&id, bin) in &self.bins {
            for (key, &level) in &bin.balls {
                stored += 1;
                let recorded = self.balls.get(&key.id);
                if recorded != Some(&(id, key.position)) || self.hashes.ball(key.id) != key.position
                {
                    out.push(Violation::BallTable { ball: key.id });
                    continue;
                }
                let start = self.start_index(key.position);
                let landing = self.locate(id, level);
                if landing < start {
                    out.push(Violation::LandedBeforeStart { ball: key.id });
                    continue;
                }
                diff[start] += 1;
                diff[landing] -= 1;
            }
        }
        if stored != self.n() {
            out.push(Violation::BallCount {
                table: self.n(),
                stored,
            });
        }

        let mut running = 0i64;
        let mut passed: Vec<(u64, u32)> = Vec::new();
        for (i, v) in self.index.iter().enumerate() {
            running += diff[i];
            if running != v.pass_count as i64 {
                out.push(Violation::PassCount {
                    bin: v.owner,
                    level: v.level,
                    expected: running.max(0) as u64,
                    actual: v.pass_count,
                });
            }
            if v.pass_count > 0 {
                passed.push((v.owner, v.level));
            }
        }
        for (&id, bin) in &self.bins {
            let want: BTreeSet<u32> = passed
                .iter()
                .filter(|&&(o, _)| o == id)
                .map(|&(_, l)| l)
                .collect();
            if want != bin.passed_levels {
                out.push(Violation::PassedLevels { bin: id });
            }
        }

        let mut selection: Vec<(u64, u64)> = self
            .bins
            .iter()
            .map(|(&id, _)| (self.hashes.capacity_selection(id), id))
            .collect();
        selection.sort_unstable();
        let cached_ok = self
            .bins
            .iter()
            .all(|(&id, b)| b.selection == self.hashes.capacity_selection(id));
        if selection != self.selection || !cached_ok {
            out.push(Violation::Selection);
        }

        match self.config.capacity {
            CapacityMode::Fixed { capacity } => {
                for (&id, bin) in &self.bins {
                    if bin.capacity != capacity {
                        out.push(Violation::Capacity {
                            bin: id,
                            expected: capacity,
                            actual: bin.capacity,
                        });
                    }
                }
            }
            CapacityMode::Dynamic { balance } => {
                if let Ok(plan) = crate::capacity::plan_for(balance, self.n(), self.m()) {
                    for (rank, &(_, id)) in selection.iter().enumerate() {
                        let expected = plan.capacity_at(rank as u64);
                        let actual = self.bins[&id].capacity;
                        if actual != expected {
                            out.push(Violation::Capacity {
                                bin: id,
                                expected,
                                actual,
                            });
                        }
                    }
                }
            }
        }
        let capacity = self.total_capacity();
        if capacity < self.n() {
            out.push(Violation::CapacityTotal {
                balls: self.n(),
                capacity,
            });
        }
        out
    }
}
