//! Bin capacities: a fixed uniform `C`, or big/small capacities that follow
//! `⌈c·n/m⌉` as balls and bins come and go.
//!
//! Under dynamic capacities the total is `T = ⌈c·n⌉`, dealt round-robin over
//! the bins sorted by a dedicated selection hash: the bin at rank `r` gets
//! `⌊(T - 1 - r)/m⌋ + 1` units, never less than 1. So the `q = T mod m`
//! lowest-ranked bins are big (`⌊T/m⌋ + 1`) and the rest small (`⌊T/m⌋`).
//! Moving `T` by one unit changes the capacity of exactly one bin, which is
//! what keeps capacity churn per ball update at `⌈c⌉`.
//!
//! A capacity drop is applied by the placement structure as an artificial
//! top-priority ball in that bin; a capacity raise removes one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-point denominator for the balancing parameter.
const BALANCE_DEN: u64 = 1_000_000;

/// Balancing parameter `c = 1 + ε > 1`, held as an exact fraction so that
/// `⌈c·n⌉` is computed without rounding error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BalanceFactor {
    num: u64,
    den: u64,
}

impl BalanceFactor {
    /// Rounds `c` to six decimals.
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 1.0 || c > 1e6 {
            return Err(Error::BalanceDomain(c));
        }
        let num = (c * BALANCE_DEN as f64).round() as u64;
        if num <= BALANCE_DEN {
            return Err(Error::BalanceDomain(c));
        }
        Ok(BalanceFactor {
            num,
            den: BALANCE_DEN,
        })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `⌈c·n⌉`
    pub fn ceil_times(&self, n: u64) -> u64 {
        (n as u128 * self.num as u128).div_ceil(self.den as u128) as u64
    }

    /// `⌈c⌉`
    pub fn ceil(&self) -> u64 {
        self.num.div_ceil(self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CapacityMode {
    /// Every bin holds exactly `capacity` balls.
    Fixed { capacity: u64 },
    /// Capacities track `⌈c·n/m⌉`.
    Dynamic { balance: BalanceFactor },
}

impl CapacityMode {
    pub fn fixed(capacity: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::ZeroCapacity);
        }
        Ok(CapacityMode::Fixed { capacity })
    }

    pub fn dynamic(c: f64) -> Result<Self> {
        Ok(CapacityMode::Dynamic {
            balance: BalanceFactor::new(c)?,
        })
    }
}

/// Capacities for given `(c, n, m)`, indexed by selection rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityPlan {
    balls: u64,
    bins: u64,
    /// `⌈c·n⌉`
    total: u64,
    /// `⌊c·n/m⌋`
    floor_avg: u64,
}

impl CapacityPlan {
    /// Largest capacity, `max(1, ⌈c·n/m⌉)`.
    pub fn max_capacity(&self) -> u64 {
        self.total.div_ceil(self.bins).max(1)
    }

    /// `q = ⌈c·n⌉ - m·⌊c·n/m⌋`, clamped to `[0, m]`.
    pub fn q(&self) -> u64 {
        self.total
            .saturating_sub(self.bins * self.floor_avg)
            .min(self.bins)
    }

    pub fn balls(&self) -> u64 {
        self.balls
    }

    pub fn bins(&self) -> u64 {
        self.bins
    }

    /// `⌈c·n⌉`, the capacity before the floor of 1 is applied.
    pub fn raw_total(&self) -> u64 {
        self.total
    }

    /// Capacity of the bin at selection rank `rank`.
    pub fn capacity_at(&self, rank: u64) -> u64 {
        debug_assert!(rank < self.bins);
        let units = (self.total as i128 - 1 - rank as i128).div_euclid(self.bins as i128) + 1;
        (units.max(1)) as u64
    }

    /// Whether the bin at `rank` has the maximal capacity.
    pub fn is_big(&self, rank: u64) -> bool {
        self.capacity_at(rank) == self.max_capacity()
    }

    /// Sum of all capacities.
    pub fn total_capacity(&self) -> u64 {
        if self.total >= self.bins {
            self.total
        } else {
            self.bins
        }
    }

    /// Ranks whose capacity may differ between `self` and `other` (same `m`).
    /// `None` means every rank must be rechecked.
    pub fn changed_ranks(&self, other: &CapacityPlan) -> Option<Vec<u64>> {
        if self.bins != other.bins {
            return None;
        }
        let (lo, hi) = if self.total <= other.total {
            (self.total, other.total)
        } else {
            (other.total, self.total)
        };
        if hi - lo >= self.bins {
            return None;
        }
        let mut ranks: Vec<u64> = (lo..hi)
            .map(|t| t % self.bins)
            .filter(|&r| self.capacity_at(r) != other.capacity_at(r))
            .collect();
        ranks.sort_unstable();
        Some(ranks)
    }
}

/// The dynamic-capacity plan for `n` balls over `m` bins.
pub fn plan_for(balance: BalanceFactor, n: u64, m: u64) -> Result<CapacityPlan> {
    if m == 0 {
        return Err(Error::NoBins);
    }
    let floor_avg = (n as u128 * balance.num as u128 / (balance.den as u128 * m as u128)) as u64;
    Ok(CapacityPlan {
        balls: n,
        bins: m,
        total: balance.ceil_times(n),
        floor_avg,
    })
}

/// One bin's capacity change during an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityChange {
    pub bin: u64,
    pub old: u64,
    pub new: u64,
}
